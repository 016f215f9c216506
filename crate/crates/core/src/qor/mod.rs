//! QoR evaluation backends.
//!
//! * [`MockBackend`]: closed-form analytical latency/resource model.
//! * [`ReplayBackend`]: lookup over previously recorded results.
//! * [`ExternalBackend`]: runs an HLS tool on an emitted Tcl script and
//!   parses its report.

mod external;
mod mock;
mod replay;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{DirectiveConfig, HlsDesign};
use crate::pareto::{utilization, Objectives, UtilWeights};

pub use external::{ExternalBackend, KeyValueReport, ParsedReport, ReportGrammar, TIMEOUT_ENV};
pub(crate) use mock::{collect_accesses, effective_factor};
pub use mock::{
    mock_analysis, mock_latency, mock_resources, ComputeUnit, MockAnalysis, MockBackend, MockModelParams, Resources,
};
pub use replay::{ReplayBackend, ReplayRecord};

/// Default synthesis wall-clock cap (20 minutes).
pub const DEFAULT_TIMEOUT_SECS: f64 = 1200.0;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend transport failure: {0}")]
    Transport(String),
    #[error("no recorded result for config {0}")]
    UnknownKey(String),
    #[error("replay dataset line {line}: {reason}")]
    Dataset { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result of one evaluation. An invalid result carries zero latency and
/// resource figures; `note` explains why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoR {
    pub latency: u64,
    pub lut: f64,
    pub ff: f64,
    pub dsp: f64,
    pub bram: f64,
    pub util: f64,
    pub valid: bool,
    pub eval_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl QoR {
    pub fn new(latency: u64, res: Resources, weights: &UtilWeights, eval_seconds: f64) -> Self {
        Self {
            latency,
            lut: res.lut,
            ff: res.ff,
            dsp: res.dsp,
            bram: res.bram,
            util: utilization(res.lut, res.ff, res.dsp, res.bram, weights),
            valid: true,
            eval_seconds,
            note: None,
        }
    }

    pub fn invalid(eval_seconds: f64, note: impl Into<String>) -> Self {
        Self {
            latency: 0,
            lut: 0.0,
            ff: 0.0,
            dsp: 0.0,
            bram: 0.0,
            util: 0.0,
            valid: false,
            eval_seconds,
            note: Some(note.into()),
        }
    }

    /// Objectives for front construction; `None` for invalid results.
    pub fn objectives(&self) -> Option<Objectives> {
        self.valid.then(|| Objectives::new(self.latency as f64, self.util))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub batch: bool,
    /// Exposes per-loop II / bottleneck detail via [`QorBackend::analyze`].
    pub introspection: bool,
}

/// Evaluation contract shared by all backends. Implementations must be
/// safe to call concurrently.
pub trait QorBackend: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    fn evaluate(&self, design: &HlsDesign, config: &DirectiveConfig) -> Result<QoR, BackendError>;

    /// Evaluates `configs`, returning results in input order.
    fn evaluate_batch(&self, design: &HlsDesign, configs: &[DirectiveConfig]) -> Result<Vec<QoR>, BackendError> {
        configs.iter().map(|c| self.evaluate(design, c)).collect()
    }

    /// Per-loop analysis, when the backend supports introspection.
    fn analyze(&self, _design: &HlsDesign, _config: &DirectiveConfig) -> Option<MockAnalysis> {
        None
    }
}

impl<T: QorBackend + ?Sized> QorBackend for Box<T> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn evaluate(&self, design: &HlsDesign, config: &DirectiveConfig) -> Result<QoR, BackendError> {
        (**self).evaluate(design, config)
    }
    fn evaluate_batch(&self, design: &HlsDesign, configs: &[DirectiveConfig]) -> Result<Vec<QoR>, BackendError> {
        (**self).evaluate_batch(design, configs)
    }
    fn analyze(&self, design: &HlsDesign, config: &DirectiveConfig) -> Option<MockAnalysis> {
        (**self).analyze(design, config)
    }
}
