use std::collections::HashSet;

use rand::Rng;

use super::{
    environmental_selection, evaluate_into, rank_ids, BaselineParams, ExploreResult, OperatorTag, SearchError,
    Trajectory,
};
use crate::design::{DirectiveConfig, HlsDesign};
use crate::pareto::{crowded_cmp, RankedDesign};
use crate::qor::QorBackend;
use crate::sampling::rng_for;
use crate::space::{DesignSpace, Dimension};

fn tournament(ranked: &[RankedDesign], rng: &mut impl Rng) -> usize {
    let a = rng.random_range(0..ranked.len());
    let b = rng.random_range(0..ranked.len());
    if crowded_cmp(&ranked[b], &ranked[a]).is_lt() {
        b
    } else {
        a
    }
}

fn mutate(coords: &mut [u64], dims: &[Dimension], prob: f64, rng: &mut impl Rng) -> bool {
    let mut changed = false;
    for (c, d) in coords.iter_mut().zip(dims) {
        if rng.random_bool(prob) {
            let v = d.values[rng.random_range(0..d.values.len())];
            changed |= v != *c;
            *c = v;
        }
    }
    changed
}

/// Plain NSGA-II: binary tournament on (rank, crowding), per-pair uniform
/// crossover, per-coordinate uniform mutation and (rank, crowding)
/// environmental selection. The population size is `params.n0`.
pub fn baseline_nsga2(
    design: &HlsDesign,
    space: &DesignSpace,
    backend: &dyn QorBackend,
    init: &[DirectiveConfig],
    params: &BaselineParams,
    seed: u64,
) -> Result<ExploreResult, SearchError> {
    if params.n0 == 0 {
        return Err(SearchError::Params("n0 must be positive".into()));
    }
    for p in [params.crossover_prob, params.mutation_prob] {
        if !(0.0..=1.0).contains(&p) {
            return Err(SearchError::Params(format!("probability {p} outside [0, 1]")));
        }
    }
    let mut rng = rng_for(seed);
    let dims = space.dimensions();
    let mut traj = Trajectory::new();
    let batch = init.iter().take(params.n0).map(|c| (space.repair(c), OperatorTag::Warm, Vec::new())).collect();
    let ids = evaluate_into(design, backend, &mut traj, batch, 0)?;
    let mut population = environmental_selection(&traj, &ids, params.n0);

    for generation in 1..=params.generations {
        let (pop_ids, ranked) = rank_ids(&traj, &population);
        if ranked.is_empty() {
            break;
        }
        let mut offspring: Vec<(DirectiveConfig, OperatorTag, Vec<usize>)> = Vec::new();
        let mut taken: HashSet<DirectiveConfig> = HashSet::new();
        let mut attempts = 0;
        while offspring.len() < params.n0 && attempts < 10 * params.n0 {
            attempts += 1;
            let (i, j) = (tournament(&ranked, &mut rng), tournament(&ranked, &mut rng));
            let mut a = space.coordinates(&ranked[i].config);
            let mut b = space.coordinates(&ranked[j].config);
            let crossed = rng.random_bool(params.crossover_prob);
            if crossed {
                for k in 0..a.len() {
                    if rng.random_bool(0.5) {
                        std::mem::swap(&mut a[k], &mut b[k]);
                    }
                }
            }
            let parents = vec![pop_ids[i], pop_ids[j]];
            for mut child in [a, b] {
                let mutated = mutate(&mut child, &dims, params.mutation_prob, &mut rng);
                let cfg = space.config_from_values(&child);
                let tag = if mutated { OperatorTag::Mutation } else { OperatorTag::Crossover };
                if offspring.len() < params.n0 && !traj.contains(design, &cfg) && taken.insert(cfg.clone()) {
                    offspring.push((cfg, tag, parents.clone()));
                }
            }
        }
        let new_ids = evaluate_into(design, backend, &mut traj, offspring, generation)?;
        let mut pool = population.clone();
        pool.extend(new_ids);
        population = environmental_selection(&traj, &pool, params.n0);
    }
    Ok(ExploreResult::from_trajectory(traj))
}
