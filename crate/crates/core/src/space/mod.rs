//! The directive design space: per-site legal value domains.

mod prune;

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{ArrayDirective, DirectiveConfig, HlsDesign, LoopDirective, PartitionType};

pub use prune::{prune, prune_with, BuiltinRule, PruneRuleSet, RuleAction, RuleDescriptor};

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("pruning rule references unknown site `{0}`")]
    UnknownSite(String),
    #[error("field `{field}` does not apply to {kind} `{site}`")]
    BadField { site: String, kind: &'static str, field: String },
    #[error("rule on `{site}`.{field} would leave an empty domain")]
    EmptyDomain { site: String, field: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopDomain {
    pub name: String,
    pub trip_count: u64,
    /// Subset of {0, 1}.
    pub pipeline: Vec<u8>,
    /// Ascending; always contains 0.
    pub unroll: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayDomain {
    pub name: String,
    /// Partition type codes, subset of {0, 1, 2}.
    pub types: Vec<u8>,
    /// 1-based dimension indices.
    pub dims: Vec<usize>,
    /// Ascending; always contains 0. Every nonzero value divides every
    /// dimension in `dims`.
    pub factors: Vec<u64>,
}

/// Per-site legal value domains, in design declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub loops: Vec<LoopDomain>,
    pub arrays: Vec<ArrayDomain>,
}

/// Which directive field a sampling coordinate controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Pipeline,
    Unroll,
    Type,
    Dim,
    Factor,
}

impl Field {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pipeline" => Self::Pipeline,
            "unroll" => Self::Unroll,
            "type" => Self::Type,
            "dim" => Self::Dim,
            "factor" => Self::Factor,
            _ => return None,
        })
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Pipeline => "pipeline",
            Self::Unroll => "unroll",
            Self::Type => "type",
            Self::Dim => "dim",
            Self::Factor => "factor",
        };
        f.write_str(s)
    }
}

/// One coordinate of the flattened space: a site field and its ordered domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    pub site: String,
    pub field: Field,
    pub values: Vec<u64>,
}

/// All divisors of `n` in ascending order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut i = 1;
    while i * i <= n {
        if n.is_multiple_of(i) {
            small.push(i);
            if i != n / i {
                large.push(n / i);
            }
        }
        i += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Value in `domain` closest to `v`; ties go to the smaller value.
pub(crate) fn nearest(domain: &[u64], v: u64) -> u64 {
    let mut best = domain[0];
    for &d in domain {
        let (dd, db) = (d.abs_diff(v), best.abs_diff(v));
        if dd < db || (dd == db && d < best) {
            best = d;
        }
    }
    best
}

/// Unpruned space: every divisor of each trip count / common divisor of each
/// array's dimension sizes, all partition types, all dimensions.
pub fn build_space(design: &HlsDesign) -> DesignSpace {
    let loops = design
        .loop_nodes()
        .iter()
        .map(|n| {
            let mut unroll = vec![0];
            unroll.extend(divisors(n.info.trip_count));
            LoopDomain { name: n.info.name.clone(), trip_count: n.info.trip_count, pipeline: vec![0, 1], unroll }
        })
        .collect();
    let arrays = design
        .arrays
        .iter()
        .map(|a| {
            let g = a.dims.iter().copied().fold(0, gcd);
            let mut factors = vec![0];
            factors.extend(divisors(g));
            ArrayDomain {
                name: a.name.clone(),
                types: PartitionType::ALL.iter().map(|t| t.code()).collect(),
                dims: (1..=a.dims.len()).collect(),
                factors,
            }
        })
        .collect();
    DesignSpace { loops, arrays }
}

impl DesignSpace {
    pub fn build(design: &HlsDesign) -> Self {
        build_space(design)
    }

    pub fn loop_domain(&self, name: &str) -> Option<&LoopDomain> {
        self.loops.iter().find(|l| l.name == name)
    }

    pub fn array_domain(&self, name: &str) -> Option<&ArrayDomain> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Product of all domain sizes.
    pub fn cardinality(&self) -> BigUint {
        let mut c = BigUint::from(1u32);
        for l in &self.loops {
            c *= l.pipeline.len() as u64;
            c *= l.unroll.len() as u64;
        }
        for a in &self.arrays {
            c *= a.types.len() as u64;
            c *= a.dims.len() as u64;
            c *= a.factors.len() as u64;
        }
        c
    }

    /// True iff every configured value lies in its domain. Off partitions are
    /// always legal; a complete partition must carry factor 0.
    pub fn contains(&self, config: &DirectiveConfig) -> bool {
        for (name, _) in config.loop_entries() {
            if self.loop_domain(name).is_none() {
                return false;
            }
        }
        for (name, _) in config.array_entries() {
            if self.array_domain(name).is_none() {
                return false;
            }
        }
        for l in &self.loops {
            let d = config.loop_directive(&l.name);
            if !l.pipeline.contains(&u8::from(d.pipeline)) {
                return false;
            }
            if !l.unroll.contains(&d.unroll) {
                return false;
            }
        }
        for a in &self.arrays {
            let d = config.array_directive(&a.name);
            if !d.is_active() {
                continue;
            }
            if !a.types.contains(&d.kind.code()) || !a.dims.contains(&d.dim) {
                return false;
            }
            let factor_ok =
                if d.kind == PartitionType::Complete { d.factor == 0 } else { a.factors.contains(&d.factor) };
            if !factor_ok {
                return false;
            }
        }
        true
    }

    /// Moves every out-of-domain value to the nearest legal one (ties toward
    /// the smaller value), clears complete-partition factors and drops
    /// unknown sites. The result satisfies [`DesignSpace::contains`].
    pub fn repair(&self, config: &DirectiveConfig) -> DirectiveConfig {
        let mut out = DirectiveConfig::new();
        for l in &self.loops {
            let d = config.loop_directive(&l.name);
            let p = nearest(&l.pipeline.iter().map(|&v| v as u64).collect::<Vec<_>>(), d.pipeline as u64);
            let u = if l.unroll.contains(&d.unroll) { d.unroll } else { nearest(&l.unroll, d.unroll) };
            out.set_loop(&l.name, LoopDirective::new(p == 1, u));
        }
        for a in &self.arrays {
            let d = config.array_directive(&a.name);
            if !d.is_active() {
                continue;
            }
            let types: Vec<u64> = a.types.iter().map(|&t| t as u64).collect();
            let kind = PartitionType::from_code(nearest(&types, d.kind.code() as u64) as u8)
                .expect("type domain holds valid codes");
            let dims: Vec<u64> = a.dims.iter().map(|&x| x as u64).collect();
            let dim = nearest(&dims, d.dim as u64) as usize;
            let factor = if kind == PartitionType::Complete { 0 } else { nearest(&a.factors, d.factor) };
            out.set_array(&a.name, ArrayDirective::new(kind, dim, factor));
        }
        out
    }

    /// Flattened coordinate system: per loop (pipeline, unroll), then per
    /// array (type, dim, factor), in declaration order.
    pub fn dimensions(&self) -> Vec<Dimension> {
        let mut out = Vec::new();
        for l in &self.loops {
            out.push(Dimension {
                site: l.name.clone(),
                field: Field::Pipeline,
                values: l.pipeline.iter().map(|&v| v as u64).collect(),
            });
            out.push(Dimension { site: l.name.clone(), field: Field::Unroll, values: l.unroll.clone() });
        }
        for a in &self.arrays {
            out.push(Dimension {
                site: a.name.clone(),
                field: Field::Type,
                values: a.types.iter().map(|&v| v as u64).collect(),
            });
            out.push(Dimension {
                site: a.name.clone(),
                field: Field::Dim,
                values: a.dims.iter().map(|&v| v as u64).collect(),
            });
            out.push(Dimension { site: a.name.clone(), field: Field::Factor, values: a.factors.clone() });
        }
        out
    }

    /// Builds a config from one value per coordinate (same order as
    /// [`DesignSpace::dimensions`]), then repairs it.
    pub fn config_from_values(&self, values: &[u64]) -> DirectiveConfig {
        let mut cfg = DirectiveConfig::new();
        let mut it = values.iter().copied();
        for l in &self.loops {
            let p = it.next().unwrap_or(0);
            let u = it.next().unwrap_or(0);
            cfg.set_loop(&l.name, LoopDirective::new(p == 1, u));
        }
        for a in &self.arrays {
            let t = it.next().unwrap_or(2);
            let dim = it.next().unwrap_or(1);
            let f = it.next().unwrap_or(0);
            let kind = PartitionType::from_code(t as u8).unwrap_or(PartitionType::Cyclic);
            let f = if kind == PartitionType::Complete { 0 } else { f };
            cfg.set_array(&a.name, ArrayDirective::new(kind, dim as usize, f));
        }
        self.repair(&cfg)
    }

    /// Builds a config from one domain index per coordinate.
    pub fn config_from_indices(&self, dims: &[Dimension], idx: &[usize]) -> DirectiveConfig {
        let values: Vec<u64> = dims.iter().zip(idx).map(|(d, &i)| d.values[i.min(d.values.len() - 1)]).collect();
        self.config_from_values(&values)
    }

    /// Coordinate values of `config`, aligned with [`DesignSpace::dimensions`].
    pub fn coordinates(&self, config: &DirectiveConfig) -> Vec<u64> {
        let mut out = Vec::new();
        for l in &self.loops {
            let d = config.loop_directive(&l.name);
            out.push(d.pipeline as u64);
            out.push(d.unroll);
        }
        for a in &self.arrays {
            let d = config.array_directive(&a.name);
            out.push(d.kind.code() as u64);
            out.push(d.dim as u64);
            out.push(d.factor);
        }
        out
    }

    /// Number of coordinates on which two configs differ.
    pub fn hamming(&self, a: &DirectiveConfig, b: &DirectiveConfig) -> usize {
        self.coordinates(a).iter().zip(self.coordinates(b)).filter(|(x, y)| **x != *y).count()
    }

    /// Every distinct legal config, in odometer order over the coordinates.
    ///
    /// Coordinate tuples that fold to the same config (unroll 1 vs 0, off
    /// partitions, complete with a nonzero factor) are yielded once.
    pub fn enumerate(&self) -> Vec<DirectiveConfig> {
        let dims = self.dimensions();
        let mut idx = vec![0usize; dims.len()];
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        loop {
            let cfg = self.config_from_indices(&dims, &idx);
            if seen.insert(cfg.clone()) {
                out.push(cfg);
            }
            let mut k = dims.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < dims[k].values.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// JSON view with the cardinality as a decimal string.
    pub fn to_json(&self) -> serde_json::Value {
        let mut loops = serde_json::Map::new();
        for l in &self.loops {
            loops.insert(
                l.name.clone(),
                serde_json::json!({ "trip_count": l.trip_count, "pipeline": l.pipeline, "unroll": l.unroll }),
            );
        }
        let mut arrays = serde_json::Map::new();
        for a in &self.arrays {
            arrays.insert(a.name.clone(), serde_json::json!({ "type": a.types, "dim": a.dims, "factor": a.factors }));
        }
        serde_json::json!({
            "loop_domains": loops,
            "array_domains": arrays,
            "cardinality": self.cardinality().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn brute_divisors(n: u64) -> Vec<u64> {
        (1..=n).filter(|&d| n.is_multiple_of(d)).collect()
    }

    #[test]
    fn divisors_match_brute_force() {
        for n in 1..=300 {
            assert_eq!(divisors(n), brute_divisors(n), "n={n}");
        }
    }

    #[test]
    fn trip_1024_has_eleven_divisors() {
        let s = build_space(&fixtures::vector_mul());
        let u = &s.loops[0].unroll;
        assert_eq!(u.len(), 12);
        assert_eq!(u[0], 0);
        assert_eq!(&u[1..], brute_divisors(1024).as_slice());
        assert_eq!(s.arrays[0].factors, u.clone());
    }

    #[test]
    fn prime_trip_count() {
        let d = HlsDesign::from_json(r#"{"kernel":"p","loops":[{"name":"l","trip_count":7}],"arrays":[]}"#).unwrap();
        assert_eq!(build_space(&d).loops[0].unroll, vec![0, 1, 7]);
    }

    #[test]
    fn vector_mul_cardinality() {
        let s = build_space(&fixtures::vector_mul());
        // |pipeline| * |unroll| * (|type| * |dim| * |factor|)^3
        let expect = BigUint::from(2u32 * 12) * BigUint::from(3u32 * 12).pow(3);
        assert_eq!(s.cardinality(), expect);
    }

    #[test]
    fn tiny_space_is_96() {
        assert_eq!(build_space(&fixtures::tiny()).cardinality(), BigUint::from(96u32));
    }

    #[test]
    fn contains_checks_divisibility_and_complete() {
        let d = fixtures::vector_mul();
        let s = build_space(&d);
        let mut c = DirectiveConfig::new();
        c.set_unroll("mul", 3);
        assert!(!s.contains(&c));
        c.set_unroll("mul", 4);
        assert!(s.contains(&c));
        c.set_array("A", ArrayDirective { kind: PartitionType::Complete, dim: 1, factor: 4 });
        assert!(!s.contains(&c));
    }

    #[test]
    fn repair_nearest_tie_smaller() {
        let d = fixtures::vector_mul();
        let mut s = build_space(&d);
        s.loops[0].unroll = vec![0, 1, 2, 4];
        let mut c = DirectiveConfig::new();
        c.set_unroll("mul", 3);
        assert_eq!(s.repair(&c).loop_directive("mul").unroll, 2);
        c.set_array("A", ArrayDirective { kind: PartitionType::Complete, dim: 1, factor: 4 });
        let r = s.repair(&c);
        assert_eq!(r.array_directive("A"), ArrayDirective::complete(1));
        assert!(s.contains(&r));
        let ok = s.repair(&r);
        assert_eq!(ok, r);
    }

    #[test]
    fn enumerate_tiny_yields_distinct_legal() {
        let s = build_space(&fixtures::tiny());
        let all = s.enumerate();
        // 2 pipeline x {0,2,4} unroll  *  {off, complete, block x3, cyclic x3}
        assert_eq!(all.len(), 6 * 8);
        assert!(all.iter().all(|c| s.contains(c)));
    }
}
