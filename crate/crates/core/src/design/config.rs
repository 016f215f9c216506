use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DesignError, HlsDesign};

/// `ARRAY_PARTITION` type. Integer codes: complete=0, block=1, cyclic=2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionType {
    Complete,
    Block,
    Cyclic,
}

impl PartitionType {
    pub const ALL: [PartitionType; 3] = [Self::Complete, Self::Block, Self::Cyclic];

    pub fn code(self) -> u8 {
        match self {
            Self::Complete => 0,
            Self::Block => 1,
            Self::Cyclic => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Complete),
            1 => Some(Self::Block),
            2 => Some(Self::Cyclic),
            _ => None,
        }
    }

    pub fn tcl_name(self) -> &'static str {
        match self {
            Self::Complete => "complete",
            Self::Block => "block",
            Self::Cyclic => "cyclic",
        }
    }
}

impl fmt::Display for PartitionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tcl_name())
    }
}

/// Per-loop directives. `unroll == 0` means no unrolling; 1 is folded into 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LoopDirective {
    pub pipeline: bool,
    pub unroll: u64,
}

impl LoopDirective {
    pub fn new(pipeline: bool, unroll: u64) -> Self {
        Self { pipeline, unroll: if unroll == 1 { 0 } else { unroll } }
    }

    /// Unroll factor as a replication count (at least 1).
    pub fn replication(&self) -> u64 {
        self.unroll.max(1)
    }

    pub fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

/// Per-array partition directive.
///
/// A non-complete partition with factor 0 is "off"; all such values are
/// folded into the canonical [`ArrayDirective::OFF`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArrayDirective {
    pub kind: PartitionType,
    /// 1-based dimension index.
    pub dim: usize,
    pub factor: u64,
}

impl ArrayDirective {
    pub const OFF: ArrayDirective = ArrayDirective { kind: PartitionType::Cyclic, dim: 1, factor: 0 };

    pub fn new(kind: PartitionType, dim: usize, factor: u64) -> Self {
        let d = Self { kind, dim, factor };
        if d.is_active() {
            d
        } else {
            Self::OFF
        }
    }

    pub fn complete(dim: usize) -> Self {
        Self { kind: PartitionType::Complete, dim, factor: 0 }
    }

    pub fn is_active(&self) -> bool {
        self.kind == PartitionType::Complete || self.factor > 0
    }
}

impl Default for ArrayDirective {
    fn default() -> Self {
        Self::OFF
    }
}

/// One point of the design space. Sites without an entry carry default
/// (off) directives, so two configs compare equal iff they configure the
/// same hardware directives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DirectiveConfig {
    loops: BTreeMap<String, LoopDirective>,
    arrays: BTreeMap<String, ArrayDirective>,
}

impl DirectiveConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn loop_directive(&self, name: &str) -> LoopDirective {
        self.loops.get(name).copied().unwrap_or_default()
    }

    pub fn array_directive(&self, name: &str) -> ArrayDirective {
        self.arrays.get(name).copied().unwrap_or_default()
    }

    pub fn set_loop(&mut self, name: &str, d: LoopDirective) {
        let d = LoopDirective::new(d.pipeline, d.unroll);
        if d.is_default() {
            self.loops.remove(name);
        } else {
            self.loops.insert(name.to_string(), d);
        }
    }

    pub fn set_pipeline(&mut self, name: &str, on: bool) {
        let d = self.loop_directive(name);
        self.set_loop(name, LoopDirective::new(on, d.unroll));
    }

    pub fn set_unroll(&mut self, name: &str, unroll: u64) {
        let d = self.loop_directive(name);
        self.set_loop(name, LoopDirective::new(d.pipeline, unroll));
    }

    pub fn set_array(&mut self, name: &str, d: ArrayDirective) {
        // Complete keeps whatever factor it was given so that `contains` can
        // reject it and `repair` can clear it.
        let d = if d.kind == PartitionType::Complete { d } else { ArrayDirective::new(d.kind, d.dim, d.factor) };
        if d == ArrayDirective::OFF {
            self.arrays.remove(name);
        } else {
            self.arrays.insert(name.to_string(), d);
        }
    }

    /// Explicitly configured loops (non-default entries only).
    pub fn loop_entries(&self) -> impl Iterator<Item = (&str, &LoopDirective)> {
        self.loops.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn array_entries(&self) -> impl Iterator<Item = (&str, &ArrayDirective)> {
        self.arrays.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty() && self.arrays.is_empty()
    }

    /// Fails on the first entry naming a loop or array absent from `design`.
    pub fn check_names(&self, design: &HlsDesign) -> Result<(), DesignError> {
        for name in self.loops.keys() {
            if design.find_loop(name).is_none() {
                return Err(DesignError::UnknownSite { kind: "loop", name: name.clone() });
            }
        }
        for name in self.arrays.keys() {
            if design.array(name).is_none() {
                return Err(DesignError::UnknownSite { kind: "array", name: name.clone() });
            }
        }
        Ok(())
    }

    /// Rebuilds a config from feature-vector records. Sites not listed keep defaults.
    pub fn from_records(design: &HlsDesign, records: &[FeatureRecord]) -> Result<Self, DesignError> {
        let mut cfg = Self::new();
        for r in records {
            match r {
                FeatureRecord::Loop(l) => {
                    if design.find_loop(&l.name).is_none() {
                        return Err(DesignError::UnknownSite { kind: "loop", name: l.name.clone() });
                    }
                    if l.pipeline > 1 {
                        return Err(DesignError::BadRecord {
                            name: l.name.clone(),
                            reason: format!("pipeline must be 0 or 1, got {}", l.pipeline),
                        });
                    }
                    cfg.set_loop(&l.name, LoopDirective::new(l.pipeline == 1, l.unroll));
                }
                FeatureRecord::Array(a) => {
                    if design.array(&a.name).is_none() {
                        return Err(DesignError::UnknownSite { kind: "array", name: a.name.clone() });
                    }
                    let kind = PartitionType::from_code(a.kind).ok_or_else(|| DesignError::BadRecord {
                        name: a.name.clone(),
                        reason: format!("partition type must be 0, 1 or 2, got {}", a.kind),
                    })?;
                    if a.dim == 0 {
                        return Err(DesignError::BadRecord { name: a.name.clone(), reason: "dim is 1-based".into() });
                    }
                    cfg.set_array(&a.name, ArrayDirective { kind, dim: a.dim, factor: a.factor });
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub name: String,
    pub pipeline: u8,
    pub unroll: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayRecord {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: u8,
    pub dim: usize,
    pub factor: u64,
}

/// Feature-vector tuple for one directive site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureRecord {
    Loop(LoopRecord),
    Array(ArrayRecord),
}

/// One record per loop (declaration order) then one per array.
pub fn encode_feature_vector(design: &HlsDesign, config: &DirectiveConfig) -> Result<Vec<FeatureRecord>, DesignError> {
    config.check_names(design)?;
    let mut out = Vec::new();
    for node in design.loop_nodes() {
        let d = config.loop_directive(&node.info.name);
        out.push(FeatureRecord::Loop(LoopRecord {
            name: node.info.name.clone(),
            pipeline: u8::from(d.pipeline),
            unroll: d.unroll,
        }));
    }
    for a in &design.arrays {
        let d = config.array_directive(&a.name);
        out.push(FeatureRecord::Array(ArrayRecord {
            name: a.name.clone(),
            kind: d.kind.code(),
            dim: d.dim,
            factor: d.factor,
        }));
    }
    Ok(out)
}

/// Canonical 16-hex-digit hash of the feature-vector encoding.
pub fn config_hash(design: &HlsDesign, config: &DirectiveConfig) -> String {
    let records = encode_feature_vector(design, config).unwrap_or_default();
    let bytes = serde_json::to_vec(&records).expect("records serialize");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn unroll_one_folds_to_zero() {
        let mut c = DirectiveConfig::new();
        c.set_unroll("mul", 1);
        assert!(c.is_empty());
        assert_eq!(LoopDirective::new(true, 1).unroll, 0);
    }

    #[test]
    fn off_partitions_fold() {
        let mut c = DirectiveConfig::new();
        c.set_array("A", ArrayDirective { kind: PartitionType::Block, dim: 1, factor: 0 });
        assert!(c.is_empty());
        c.set_array("A", ArrayDirective { kind: PartitionType::Complete, dim: 1, factor: 4 });
        assert_eq!(c.array_directive("A").factor, 4);
    }

    #[test]
    fn feature_records_match_table_example() {
        let d = fixtures::vector_mul();
        let mut c = DirectiveConfig::new();
        c.set_loop("mul", LoopDirective::new(true, 2));
        c.set_array("C", ArrayDirective::new(PartitionType::Cyclic, 1, 2));
        let recs = encode_feature_vector(&d, &c).unwrap();
        let json: Vec<String> = recs.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        assert_eq!(json[0], r#"{"name":"mul","pipeline":1,"unroll":2}"#);
        assert_eq!(json[3], r#"{"name":"C","type":2,"dim":1,"factor":2}"#);
    }

    #[test]
    fn absent_directives_encode_defaults() {
        let d = fixtures::vector_mul();
        let recs = encode_feature_vector(&d, &DirectiveConfig::new()).unwrap();
        assert_eq!(recs.len(), 4);
        for r in recs {
            match r {
                FeatureRecord::Loop(l) => assert_eq!((l.pipeline, l.unroll), (0, 0)),
                FeatureRecord::Array(a) => assert_eq!(a.factor, 0),
            }
        }
    }

    #[test]
    fn unknown_site_is_an_error() {
        let d = fixtures::vector_mul();
        let mut c = DirectiveConfig::new();
        c.set_unroll("nope", 4);
        assert!(matches!(encode_feature_vector(&d, &c), Err(DesignError::UnknownSite { .. })));
    }

    #[test]
    fn records_round_trip() {
        let d = fixtures::gemm();
        let mut c = DirectiveConfig::new();
        c.set_loop("k", LoopDirective::new(true, 8));
        c.set_array("A", ArrayDirective::new(PartitionType::Block, 2, 8));
        c.set_array("B", ArrayDirective::complete(1));
        let recs = encode_feature_vector(&d, &c).unwrap();
        let text = serde_json::to_string(&recs).unwrap();
        let back: Vec<FeatureRecord> = serde_json::from_str(&text).unwrap();
        assert_eq!(DirectiveConfig::from_records(&d, &back).unwrap(), c);
        assert_eq!(config_hash(&d, &c).len(), 16);
    }
}
