//! Adaptive multi-objective exploration and an NSGA-II baseline.
//!
//! [`explore`] starts from an advisor-seeded population and alternates
//! ranking, elite screening and two candidate generators: a convergent one
//! that attacks the bottleneck of each parent, and a divergent one that
//! proposes novel configurations under hardware-feasibility rules.

mod baseline;
mod operators;
mod trajectory;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::{Advisor, ReflectRequest};
use crate::design::{DirectiveConfig, HlsDesign};
use crate::pareto::{adrs, pareto_indices, rank_population, select_elites_indices, Objectives, RankedDesign};
use crate::qor::{BackendError, MockAnalysis, QoR, QorBackend};
use crate::sampling::{warm_start, SamplerKind, SamplerSpec, SamplingError};
use crate::space::DesignSpace;

pub use baseline::baseline_nsga2;
pub use operators::{
    convergent_rule, convergent_search, divergent_rule, divergent_search, estimated_ii, power_of_two_unrolls,
    Candidate, OperatorContext, OperatorParams,
};
pub use trajectory::{OperatorTag, Trajectory, TrajectoryEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub n0: usize,
    pub i_max: usize,
    pub pop_size: usize,
    pub rank2_quota: usize,
    pub convergent_fraction: f64,
    pub seed: u64,
    pub operators: OperatorParams,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            n0: 12,
            i_max: 3,
            pop_size: 12,
            rank2_quota: 3,
            convergent_fraction: 0.5,
            seed: 0,
            operators: OperatorParams::default(),
        }
    }
}

impl SearchParams {
    /// Upper bound on evaluations.
    pub fn budget(&self) -> usize {
        self.n0 + self.i_max * self.pop_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub n0: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { n0: 12, generations: 8, crossover_prob: 0.9, mutation_prob: 0.3 }
    }
}

impl BaselineParams {
    pub fn budget(&self) -> usize {
        self.n0 + self.generations * self.n0
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("cannot classify an invalid design")]
    InvalidQor,
    #[error("invalid search parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    /// The backend failed; `trajectory` holds every evaluation completed
    /// before the failure.
    #[error("backend failure after {} evaluations: {source}", trajectory.len())]
    Backend { source: BackendError, trajectory: Box<Trajectory> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bottleneck {
    ComputeBound,
    MemoryBound,
}

/// Compute- vs memory-bound classification of a valid design.
///
/// With an analysis, a design is memory-bound when some unit's initiation
/// interval exceeds 1, which under the analytical model only happens through
/// array-port contention. Without one, the heuristic is: more BRAM than DSP
/// pressure and more than `pipeline_depth` cycles per innermost iteration.
pub fn classify_bottleneck(
    design: &HlsDesign,
    qor: &QoR,
    analysis: Option<&MockAnalysis>,
    pipeline_depth: u64,
) -> Result<Bottleneck, SearchError> {
    if !qor.valid {
        return Err(SearchError::InvalidQor);
    }
    let memory = match analysis {
        Some(a) => a.units.iter().any(|u| u.ii > 1 && !u.port_limited.is_empty()),
        None => {
            let iterations = innermost_iterations(design).max(1);
            qor.bram > qor.dsp && qor.latency as f64 / iterations as f64 > pipeline_depth as f64
        }
    };
    Ok(if memory { Bottleneck::MemoryBound } else { Bottleneck::ComputeBound })
}

/// Total executions of innermost loop bodies.
fn innermost_iterations(design: &HlsDesign) -> u64 {
    fn walk(l: &crate::design::LoopInfo, outer: u64) -> u64 {
        let n = outer.saturating_mul(l.trip_count);
        if l.is_leaf() {
            n
        } else {
            l.children.iter().map(|c| walk(c, n)).sum()
        }
    }
    design.loops.iter().map(|l| walk(l, 1)).sum()
}

/// A parent handed to the candidate generators.
#[derive(Debug, Clone)]
pub struct Parent {
    /// Trajectory id.
    pub id: usize,
    pub config: DirectiveConfig,
    pub qor: QoR,
    pub bottleneck: Bottleneck,
    pub analysis: Option<MockAnalysis>,
}

/// Final front plus the full evaluation log.
#[derive(Debug, Clone)]
pub struct ExploreResult {
    /// Trajectory ids of the rank-1 front, sorted by latency.
    pub front: Vec<usize>,
    pub trajectory: Trajectory,
}

impl ExploreResult {
    fn from_trajectory(trajectory: Trajectory) -> Self {
        Self { front: trajectory.front_ids(), trajectory }
    }

    pub fn front_objectives(&self) -> Vec<Objectives> {
        self.front.iter().filter_map(|&id| self.trajectory.entries()[id].qor.objectives()).collect()
    }

    pub fn front_configs(&self) -> Vec<(DirectiveConfig, Objectives)> {
        self.front
            .iter()
            .filter_map(|&id| {
                let o = self.trajectory.entries()[id].qor.objectives()?;
                Some((self.trajectory.config(id).clone(), o))
            })
            .collect()
    }
}

/// Evaluates `batch` and appends results. Candidates already in the
/// trajectory are skipped. Returns the new ids.
pub(crate) fn evaluate_into(
    design: &HlsDesign,
    backend: &dyn QorBackend,
    trajectory: &mut Trajectory,
    batch: Vec<(DirectiveConfig, OperatorTag, Vec<usize>)>,
    iteration: usize,
) -> Result<Vec<usize>, SearchError> {
    let mut fresh = Vec::new();
    let mut hashes = HashSet::new();
    for item in batch {
        if !trajectory.contains(design, &item.0) && hashes.insert(item.0.clone()) {
            fresh.push(item);
        }
    }
    let configs: Vec<DirectiveConfig> = fresh.iter().map(|f| f.0.clone()).collect();
    let results = match backend.evaluate_batch(design, &configs) {
        Ok(r) => r,
        Err(source) => {
            return Err(SearchError::Backend { source, trajectory: Box::new(std::mem::take(trajectory)) });
        }
    };
    let mut ids = Vec::new();
    for ((config, tag, parents), qor) in fresh.into_iter().zip(results) {
        if let Some(id) = trajectory.push(design, config, qor, tag, iteration, parents) {
            ids.push(id);
        }
    }
    Ok(ids)
}

/// Ranks the valid members among `ids`.
pub(crate) fn rank_ids(trajectory: &Trajectory, ids: &[usize]) -> (Vec<usize>, Vec<RankedDesign>) {
    let mut kept = Vec::new();
    let mut members = Vec::new();
    for &id in ids {
        if let Some(o) = trajectory.entries()[id].qor.objectives() {
            kept.push(id);
            members.push((trajectory.config(id).clone(), o));
        }
    }
    (kept, rank_population(members))
}

/// Keeps the best `size` valid members of `ids` by (rank, crowding).
pub(crate) fn environmental_selection(trajectory: &Trajectory, ids: &[usize], size: usize) -> Vec<usize> {
    let (kept, ranked) = rank_ids(trajectory, ids);
    crate::pareto::crowded_order(&ranked).into_iter().take(size).map(|i| kept[i]).collect()
}

fn check_params(p: &SearchParams) -> Result<(), SearchError> {
    if p.n0 == 0 || p.pop_size == 0 {
        return Err(SearchError::Params("n0 and pop_size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p.convergent_fraction) {
        return Err(SearchError::Params("convergent_fraction must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Warm-started adaptive exploration.
///
/// Performs at most `params.budget()` evaluations. On a backend failure the
/// error carries the partial trajectory.
pub fn explore(
    design: &HlsDesign,
    space: &DesignSpace,
    backend: &dyn QorBackend,
    advisor: &dyn Advisor,
    params: &SearchParams,
) -> Result<ExploreResult, SearchError> {
    check_params(params)?;
    let mut traj = Trajectory::new();
    let spec = SamplerSpec::new(SamplerKind::WarmStart, params.n0, params.seed);
    let init = warm_start(advisor, space, design, &spec)?;
    if init.degraded {
        traj.note("advisor seed generation failed; initial population drawn by LHS");
    }
    let batch = init.configs.into_iter().map(|c| (c, OperatorTag::Warm, Vec::new())).collect();
    let mut population = evaluate_into(design, backend, &mut traj, batch, 0)?;
    population = environmental_selection(&traj, &population, params.pop_size.max(population.len()));

    let depth = params.operators.pipeline_depth;
    for iteration in 1..=params.i_max {
        let (ids, ranked) = rank_ids(&traj, &population);
        let elite_pos = select_elites_indices(&ranked, params.pop_size, params.rank2_quota);

        let mut parents = Vec::new();
        for &p in &elite_pos {
            let id = ids[p];
            let qor = traj.entries()[id].qor.clone();
            let analysis = backend.analyze(design, traj.config(id));
            let bottleneck = classify_bottleneck(design, &qor, analysis.as_ref(), depth)?;
            parents.push(Parent { id, config: traj.config(id).clone(), qor, bottleneck, analysis });
        }

        let notes: Vec<String> = parents.iter().map(|p| format!("{:?}", p.bottleneck)).collect();
        let digest = traj.digest(params.pop_size * 2);
        let req = ReflectRequest { design, population: &ranked, elites: &elite_pos, notes: &notes, digest: &digest };
        let parents = match advisor.reflect_trajectory(&req) {
            Ok(shortlist) => order_by_shortlist(parents, &elite_pos, shortlist.iter().map(|s| s.index)),
            Err(e) => {
                traj.note(format!("iteration {iteration}: reflection failed ({e}); using elite order"));
                parents
            }
        };

        let seen: HashSet<DirectiveConfig> = traj.configs().iter().cloned().collect();
        let ctx = OperatorContext { design, space, parents: &parents, seen: &seen, params: &params.operators };
        let n_conv = (params.pop_size as f64 * params.convergent_fraction).round() as usize;
        let (conv, err) = convergent_search(&ctx, advisor, n_conv);
        if let Some(e) = err {
            traj.note(format!("iteration {iteration}: convergent hints failed ({e}); rule-only"));
        }
        let mut seen2 = seen.clone();
        seen2.extend(conv.iter().map(|c| c.config.clone()));
        let ctx2 = OperatorContext { seen: &seen2, ..ctx };
        let n_div = params.pop_size - conv.len();
        let seed = params.seed.wrapping_add((iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (div, err) = divergent_search(&ctx2, advisor, n_div, seed);
        if let Some(e) = err {
            traj.note(format!("iteration {iteration}: divergent hints failed ({e}); rule-only"));
        }

        let batch = conv
            .into_iter()
            .chain(div)
            .take(params.pop_size)
            .map(|c| {
                let pids = c.parents.iter().map(|&i| parents[i].id).collect();
                (c.config, c.tag, pids)
            })
            .collect();
        let new_ids = evaluate_into(design, backend, &mut traj, batch, iteration)?;
        let mut pool = population.clone();
        pool.extend(new_ids);
        population = environmental_selection(&traj, &pool, params.pop_size);
    }
    Ok(ExploreResult::from_trajectory(traj))
}

/// Reorders `parents` (aligned with `elite_pos`) so that shortlisted elites
/// come first in shortlist order; indices outside the elite set are
/// ignored and unlisted elites keep their relative order at the end.
fn order_by_shortlist(
    parents: Vec<Parent>,
    elite_pos: &[usize],
    shortlist: impl Iterator<Item = usize>,
) -> Vec<Parent> {
    let mut order = Vec::new();
    for idx in shortlist {
        if let Some(k) = elite_pos.iter().position(|&e| e == idx) {
            if !order.contains(&k) {
                order.push(k);
            }
        }
    }
    for k in 0..parents.len() {
        if !order.contains(&k) {
            order.push(k);
        }
    }
    let mut slots: Vec<Option<Parent>> = parents.into_iter().map(Some).collect();
    order.into_iter().filter_map(|k| slots[k].take()).collect()
}

/// Intersection of an advisor shortlist with the elite indices, in
/// shortlist order.
pub fn intersect_shortlist(elites: &[usize], shortlist: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    for &i in shortlist {
        if elites.contains(&i) && !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// Smallest prefix of the trajectory whose valid front reaches ADRS <=
/// `target` against `reference`; `budget` when no prefix does.
pub fn evaluations_to_target(trajectory: &Trajectory, reference: &[Objectives], target: f64, budget: usize) -> usize {
    let mut valid = Vec::new();
    for (k, e) in trajectory.entries().iter().enumerate() {
        let Some(o) = e.qor.objectives() else { continue };
        valid.push(o);
        let front: Vec<Objectives> = pareto_indices(&valid).into_iter().map(|i| valid[i]).collect();
        if matches!(adrs(&front, reference), Ok(d) if d <= target) {
            return k + 1;
        }
    }
    budget
}
