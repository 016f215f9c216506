use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BackendError, Capabilities, QoR, QorBackend};
use crate::design::{config_hash, DirectiveConfig, HlsDesign};
use crate::pareto::{utilization, UtilWeights};

/// One line of a replay dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub config_hash: String,
    pub latency: u64,
    pub lut: f64,
    pub ff: f64,
    pub dsp: f64,
    pub bram: f64,
    pub valid: bool,
    pub eval_seconds: f64,
}

impl ReplayRecord {
    pub fn from_qor(config_hash: String, q: &QoR) -> Self {
        Self {
            config_hash,
            latency: q.latency,
            lut: q.lut,
            ff: q.ff,
            dsp: q.dsp,
            bram: q.bram,
            valid: q.valid,
            eval_seconds: q.eval_seconds,
        }
    }
}

/// Serves recorded results keyed by the canonical config hash.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    records: HashMap<String, ReplayRecord>,
    pub weights: UtilWeights,
}

impl ReplayBackend {
    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        Self {
            records: records.into_iter().map(|r| (r.config_hash.clone(), r)).collect(),
            weights: UtilWeights::default(),
        }
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, BackendError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(&line)
                .map_err(|e| BackendError::Dataset { line: i + 1, reason: e.to_string() })?;
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let f = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes records as JSON lines, sorted by hash.
    pub fn write_jsonl(records: &[ReplayRecord], mut out: impl Write) -> std::io::Result<()> {
        let mut sorted: Vec<&ReplayRecord> = records.iter().collect();
        sorted.sort_by(|a, b| a.config_hash.cmp(&b.config_hash));
        for r in sorted {
            writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"))?;
        }
        Ok(())
    }
}

impl QorBackend for ReplayBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities { batch: true, introspection: false }
    }

    fn evaluate(&self, design: &HlsDesign, config: &DirectiveConfig) -> Result<QoR, BackendError> {
        let key = config_hash(design, config);
        let r = self.records.get(&key).ok_or(BackendError::UnknownKey(key))?;
        if !r.valid {
            return Ok(QoR::invalid(r.eval_seconds, "recorded as invalid"));
        }
        Ok(QoR {
            latency: r.latency,
            lut: r.lut,
            ff: r.ff,
            dsp: r.dsp,
            bram: r.bram,
            util: utilization(r.lut, r.ff, r.dsp, r.bram, &self.weights),
            valid: true,
            eval_seconds: r.eval_seconds,
            note: None,
        })
    }
}
