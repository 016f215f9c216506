//! Advisors propose designs, pruning rules and search candidates.
//!
//! Every advisor output is treated as untrusted: configs are repaired into
//! the space and filtered by the caller before anything is evaluated.

mod http;
mod rule;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{DirectiveConfig, HlsDesign};
use crate::pareto::RankedDesign;
use crate::search::OperatorContext;
use crate::space::{DesignSpace, RuleDescriptor};

pub use http::{
    extract_json_block, ChatMessage, ChatRequest, ChatTransport, HttpAdvisor, HttpAdvisorConfig, RecordingTransport,
    ReplayTransport, ScriptedTransport, TranscriptEntry, TransportError, UreqTransport, ENV_KEY, ENV_MODEL, ENV_URL,
};
pub use rule::{RuleAdvisor, SeedLadder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Performance,
    Resource,
    Balanced,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Performance => "performance",
            Objective::Resource => "resource",
            Objective::Balanced => "balanced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    ExtractFeatures,
    PruneRules,
    SeedDirectives,
    ReflectTrajectory,
    ConvergentHints,
    DivergentHints,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Role::ExtractFeatures => "extract_features",
            Role::PruneRules => "prune_rules",
            Role::SeedDirectives => "seed_directives",
            Role::ReflectTrajectory => "reflect_trajectory",
            Role::ConvergentHints => "convergent_hints",
            Role::DivergentHints => "divergent_hints",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AdvisorError {
    #[error("advisor does not support role {0}")]
    Unsupported(Role),
    #[error("invalid request for role {role}: {reason}")]
    BadRequest { role: Role, reason: String },
    #[error("role {role} failed after {attempts} request(s): {last}")]
    Exhausted { role: Role, attempts: usize, last: String },
}

/// Shortlist entry returned by trajectory reflection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentNote {
    /// Index into the labelled population.
    pub index: usize,
    #[serde(default)]
    pub note: String,
}

/// Input to [`Advisor::reflect_trajectory`].
pub struct ReflectRequest<'a> {
    pub design: &'a HlsDesign,
    pub population: &'a [RankedDesign],
    /// Elite indices into `population`, in selection order.
    pub elites: &'a [usize],
    /// One bottleneck note per elite.
    pub notes: &'a [String],
    pub digest: &'a str,
}

pub trait Advisor: Send + Sync {
    fn name(&self) -> &str;

    fn extract_features(&self, source: &str) -> Result<HlsDesign, AdvisorError>;

    fn prune_rules(&self, design: &HlsDesign, space: &DesignSpace) -> Result<Vec<RuleDescriptor>, AdvisorError>;

    fn seed_directives(
        &self,
        design: &HlsDesign,
        space: &DesignSpace,
        objective: Objective,
        count: usize,
    ) -> Result<Vec<DirectiveConfig>, AdvisorError>;

    fn reflect_trajectory(&self, req: &ReflectRequest) -> Result<Vec<ParentNote>, AdvisorError>;

    fn convergent_hints(&self, ctx: &OperatorContext, count: usize) -> Result<Vec<DirectiveConfig>, AdvisorError>;

    fn divergent_hints(
        &self,
        ctx: &OperatorContext,
        count: usize,
        seed: u64,
    ) -> Result<Vec<DirectiveConfig>, AdvisorError>;
}
