use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::design::{config_hash, encode_feature_vector, DirectiveConfig, FeatureRecord, HlsDesign};
use crate::pareto::{pareto_indices, Objectives};
use crate::qor::QoR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorTag {
    Warm,
    Convergent,
    Divergent,
    Crossover,
    Mutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub id: usize,
    pub iteration: usize,
    pub config_hash: String,
    pub config: Vec<FeatureRecord>,
    pub qor: QoR,
    pub operator: OperatorTag,
    /// Trajectory ids of the parents this candidate was derived from.
    pub parents: Vec<usize>,
}

/// Append-only evaluation log. Each config appears at most once.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    entries: Vec<TrajectoryEntry>,
    configs: Vec<DirectiveConfig>,
    by_hash: HashMap<String, usize>,
    /// Degraded-mode and fallback notes, in the order they occurred.
    pub notes: Vec<String>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TrajectoryEntry] {
        &self.entries
    }

    pub fn config(&self, id: usize) -> &DirectiveConfig {
        &self.configs[id]
    }

    pub fn configs(&self) -> &[DirectiveConfig] {
        &self.configs
    }

    pub fn contains(&self, design: &HlsDesign, config: &DirectiveConfig) -> bool {
        self.by_hash.contains_key(&config_hash(design, config))
    }

    /// Appends an evaluation and returns its id, or `None` when the config
    /// is already present.
    pub fn push(
        &mut self,
        design: &HlsDesign,
        config: DirectiveConfig,
        qor: QoR,
        operator: OperatorTag,
        iteration: usize,
        parents: Vec<usize>,
    ) -> Option<usize> {
        let hash = config_hash(design, &config);
        if self.by_hash.contains_key(&hash) {
            return None;
        }
        let id = self.entries.len();
        self.by_hash.insert(hash.clone(), id);
        self.entries.push(TrajectoryEntry {
            id,
            iteration,
            config_hash: hash,
            config: encode_feature_vector(design, &config).unwrap_or_default(),
            qor,
            operator,
            parents,
        });
        self.configs.push(config);
        Some(id)
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.notes.push(msg);
    }

    pub fn invalid_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.qor.valid).count()
    }

    /// (id, objectives) of every valid evaluation.
    pub fn valid(&self) -> Vec<(usize, Objectives)> {
        self.entries.iter().filter_map(|e| e.qor.objectives().map(|o| (e.id, o))).collect()
    }

    /// Rank-1 front over all valid evaluations, as trajectory ids sorted by
    /// latency.
    pub fn front_ids(&self) -> Vec<usize> {
        let valid = self.valid();
        let objs: Vec<Objectives> = valid.iter().map(|v| v.1).collect();
        pareto_indices(&objs).into_iter().map(|i| valid[i].0).collect()
    }

    /// Short text summary of the most recent `last` evaluations.
    pub fn digest(&self, last: usize) -> String {
        let start = self.entries.len().saturating_sub(last);
        let mut s = String::new();
        for e in &self.entries[start..] {
            if e.qor.valid {
                s.push_str(&format!(
                    "#{} iter {} {:?}: latency {} util {:.4}\n",
                    e.id, e.iteration, e.operator, e.qor.latency, e.qor.util
                ));
            } else {
                s.push_str(&format!("#{} iter {} {:?}: invalid\n", e.id, e.iteration, e.operator));
            }
        }
        s
    }

    /// One JSON object per entry.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(out, "{}", serde_json::to_string(e).map_err(std::io::Error::other)?)?;
        }
        Ok(())
    }
}
