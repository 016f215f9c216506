//! Initial-population generators.
//!
//! Every sampler works in the flattened coordinate system of
//! [`DesignSpace::dimensions`]. Continuous samplers draw a coordinate in
//! `[0, 1]` and map it onto the ordered domain by index rounding, so
//! non-uniform (divisor) domains keep the shape of the distribution on
//! indices.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::{Advisor, Objective};
use crate::design::{DirectiveConfig, HlsDesign};
use crate::space::{DesignSpace, Dimension};

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("sample count must be at least 1")]
    ZeroCount,
    #[error("beta shape must be positive, got {0}")]
    BadAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Random,
    Beta,
    Lhs,
    WarmStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub n: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed, alpha: 0.1 }
    }

    fn check(&self) -> Result<(), SamplingError> {
        if self.n == 0 {
            return Err(SamplingError::ZeroCount);
        }
        if !(self.alpha > 0.0) {
            return Err(SamplingError::BadAlpha(self.alpha));
        }
        Ok(())
    }
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self::new(SamplerKind::Lhs, 12, 0)
    }
}

/// Sampler output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub configs: Vec<DirectiveConfig>,
    /// Fewer than `n` distinct configs could be drawn.
    pub short: bool,
    /// The advisor failed and the set came from the fallback sampler.
    pub degraded: bool,
    /// Unit-cube coordinates of the first batch, before domain rounding
    /// (continuous samplers only).
    pub unit_coordinates: Vec<Vec<f64>>,
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maps `x` in `[0, 1]` onto an index of a domain of size `len`.
pub fn unit_to_index(x: f64, len: usize) -> usize {
    if len <= 1 {
        return 0;
    }
    let i = (x.clamp(0.0, 1.0) * (len - 1) as f64).round() as usize;
    i.min(len - 1)
}

fn from_unit(space: &DesignSpace, dims: &[Dimension], point: &[f64]) -> DirectiveConfig {
    let idx: Vec<usize> = dims.iter().zip(point).map(|(d, &x)| unit_to_index(x, d.values.len())).collect();
    space.config_from_indices(dims, &idx)
}

/// Adds configs produced by `draw` until `n` distinct ones are held or
/// `10 * n` draws have been made.
fn fill_unique(
    n: usize,
    out: &mut Vec<DirectiveConfig>,
    seen: &mut HashSet<DirectiveConfig>,
    mut draw: impl FnMut() -> Vec<DirectiveConfig>,
) {
    let mut attempts = 0;
    while out.len() < n && attempts < 10 * n {
        let batch = draw();
        if batch.is_empty() {
            break;
        }
        for c in batch {
            attempts += 1;
            if out.len() < n && seen.insert(c.clone()) {
                out.push(c);
            }
        }
    }
}

/// Uniform draw of each coordinate over its ordered domain.
pub fn random_sample(space: &DesignSpace, spec: &SamplerSpec) -> Result<SampleSet, SamplingError> {
    spec.check()?;
    let dims = space.dimensions();
    let mut rng = rng_for(spec.seed);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    fill_unique(spec.n, &mut out, &mut seen, || {
        let idx: Vec<usize> = dims.iter().map(|d| rng.random_range(0..d.values.len())).collect();
        vec![space.config_from_indices(&dims, &idx)]
    });
    Ok(SampleSet { short: out.len() < spec.n, configs: out, ..Default::default() })
}

/// `count` draws from the symmetric Beta(alpha, alpha) distribution.
pub fn beta_unit_draws(alpha: f64, count: usize, seed: u64) -> Result<Vec<f64>, SamplingError> {
    let dist = Beta::new(alpha, alpha).map_err(|_| SamplingError::BadAlpha(alpha))?;
    let mut rng = rng_for(seed);
    Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
}

/// Per-coordinate Beta(alpha, alpha) draws; alpha < 1 favours domain ends.
pub fn beta_sample(space: &DesignSpace, spec: &SamplerSpec) -> Result<SampleSet, SamplingError> {
    spec.check()?;
    let dist = Beta::new(spec.alpha, spec.alpha).map_err(|_| SamplingError::BadAlpha(spec.alpha))?;
    let dims = space.dimensions();
    let mut rng = rng_for(spec.seed);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut first = Vec::new();
    fill_unique(spec.n, &mut out, &mut seen, || {
        let point: Vec<f64> = dims.iter().map(|_| dist.sample(&mut rng)).collect();
        if first.len() < spec.n {
            first.push(point.clone());
        }
        vec![from_unit(space, &dims, &point)]
    });
    Ok(SampleSet { short: out.len() < spec.n, configs: out, unit_coordinates: first, ..Default::default() })
}

/// LHS coordinate for sample `i` on a dimension: `(perm_i - u_i) / n` with
/// `perm_i` in `1..=n` and `u_i` in `[0, 1)`.
pub fn lhs_coordinate(perm: usize, offset: f64, n: usize) -> f64 {
    (perm as f64 - offset) / n as f64
}

/// An `n x d` Latin hypercube in the unit cube: each dimension gets an
/// independent permutation of the `n` strata.
pub fn lhs_unit(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut perm: Vec<usize> = (1..=n).collect();
        perm.shuffle(rng);
        for (i, p) in perm.into_iter().enumerate() {
            let u: f64 = rng.random();
            pts[i][j] = lhs_coordinate(p, u, n);
        }
    }
    pts
}

/// Latin hypercube sampling. Further hypercubes are drawn when rounding
/// produces duplicates.
pub fn lhs_sample(space: &DesignSpace, spec: &SamplerSpec) -> Result<SampleSet, SamplingError> {
    spec.check()?;
    let dims = space.dimensions();
    let mut rng = rng_for(spec.seed);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut first: Option<Vec<Vec<f64>>> = None;
    fill_unique(spec.n, &mut out, &mut seen, || {
        let pts = lhs_unit(spec.n, dims.len(), &mut rng);
        let cfgs = pts.iter().map(|p| from_unit(space, &dims, p)).collect();
        if first.is_none() {
            first = Some(pts);
        }
        cfgs
    });
    Ok(SampleSet {
        short: out.len() < spec.n,
        configs: out,
        unit_coordinates: first.unwrap_or_default(),
        ..Default::default()
    })
}

/// How `n` warm-start requests split across objectives: `n / 3` each for
/// performance and resource, the remainder to balanced.
pub fn warm_start_split(n: usize) -> [(Objective, usize); 3] {
    let third = n / 3;
    [(Objective::Performance, third), (Objective::Resource, third), (Objective::Balanced, n - 2 * third)]
}

/// Advisor-seeded initial population. Advisor output is repaired into the
/// space and deduplicated; any shortfall is filled from [`lhs_sample`]. If
/// the advisor fails, the result is exactly `lhs_sample` with `degraded`
/// set.
pub fn warm_start(
    advisor: &dyn Advisor,
    space: &DesignSpace,
    design: &HlsDesign,
    spec: &SamplerSpec,
) -> Result<SampleSet, SamplingError> {
    spec.check()?;
    let lhs = || lhs_sample(space, &SamplerSpec { kind: SamplerKind::Lhs, ..spec.clone() });
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (objective, count) in warm_start_split(spec.n) {
        if count == 0 {
            continue;
        }
        match advisor.seed_directives(design, space, objective, count) {
            Ok(configs) => {
                for c in configs.into_iter().take(count) {
                    let r = space.repair(&c);
                    if space.contains(&r) && seen.insert(r.clone()) {
                        out.push(r);
                    }
                }
            }
            Err(e) => {
                log::warn!("advisor seed generation failed ({e}); falling back to LHS");
                let mut s = lhs()?;
                s.degraded = true;
                return Ok(s);
            }
        }
    }
    if out.len() < spec.n {
        for c in lhs()?.configs {
            if out.len() >= spec.n {
                break;
            }
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
    }
    Ok(SampleSet { short: out.len() < spec.n, configs: out, ..Default::default() })
}

/// Dispatches on `spec.kind`.
pub fn sample(
    space: &DesignSpace,
    design: &HlsDesign,
    spec: &SamplerSpec,
    advisor: Option<&dyn Advisor>,
) -> Result<SampleSet, SamplingError> {
    match spec.kind {
        SamplerKind::Random => random_sample(space, spec),
        SamplerKind::Beta => beta_sample(space, spec),
        SamplerKind::Lhs => lhs_sample(space, spec),
        SamplerKind::WarmStart => match advisor {
            Some(a) => warm_start(a, space, design, spec),
            None => warm_start(&crate::advisor::RuleAdvisor, space, design, spec),
        },
    }
}
