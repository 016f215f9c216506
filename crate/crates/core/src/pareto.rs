//! Two-objective (latency, utilization) Pareto machinery and the ADRS metric.
//!
//! Both objectives are minimized.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DirectiveConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ParetoError {
    #[error("reference front is empty")]
    EmptyReference,
    #[error("reference point {index} has non-positive objective ({latency}, {util})")]
    NonPositiveReference { index: usize, latency: f64, util: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub latency: f64,
    pub util: f64,
}

impl Objectives {
    pub fn new(latency: f64, util: f64) -> Self {
        Self { latency, util }
    }

    fn get(&self, k: usize) -> f64 {
        if k == 0 {
            self.latency
        } else {
            self.util
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilWeights {
    pub w_lut: f64,
    pub w_ff: f64,
    pub w_dsp: f64,
    pub w_bram: f64,
}

impl Default for UtilWeights {
    fn default() -> Self {
        Self { w_lut: 0.3, w_ff: 0.25, w_dsp: 0.3, w_bram: 0.05 }
    }
}

/// Weighted utilization scalar. The default weights sum to 0.9 and are not
/// renormalized.
pub fn utilization(lut: f64, ff: f64, dsp: f64, bram: f64, w: &UtilWeights) -> f64 {
    w.w_lut * lut + w.w_ff * ff + w.w_dsp * dsp + w.w_bram * bram
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a.latency <= b.latency && a.util <= b.util && (a.latency < b.latency || a.util < b.util)
}

/// Fast non-dominated sort. Returns fronts of indices, front 1 first; each
/// front lists indices in ascending order.
pub fn non_dominated_sort(pop: &[Objectives]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&pop[i], &pop[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&pop[j], &pop[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance within one front. Objectives are min-max normalized
/// over the front; an interior point scores the sum over objectives of the
/// gap between its sorted neighbours. Boundary points (and every point of a
/// front with at most two members) get `f64::INFINITY`. An objective with
/// zero range contributes nothing.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0; n];
    for k in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order
            .sort_by(|&a, &b| front[a].get(k).partial_cmp(&front[b].get(k)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        let lo = front[order[0]].get(k);
        let hi = front[order[n - 1]].get(k);
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (front[order[w + 1]].get(k) - front[order[w - 1]].get(k)) / range;
            }
        }
    }
    dist
}

/// A labelled member of a population.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDesign {
    pub config: DirectiveConfig,
    pub objectives: Objectives,
    /// 1 = non-dominated.
    pub rank: usize,
    pub crowding: f64,
}

/// Ranks and crowding distances for every member, in input order.
pub fn label(pop: &[Objectives]) -> Vec<(usize, f64)> {
    let mut out = vec![(0, 0.0); pop.len()];
    for (r, front) in non_dominated_sort(pop).iter().enumerate() {
        let objs: Vec<Objectives> = front.iter().map(|&i| pop[i]).collect();
        for (&i, c) in front.iter().zip(crowding_distance(&objs)) {
            out[i] = (r + 1, c);
        }
    }
    out
}

/// Labels a population of evaluated configs.
pub fn rank_population(members: Vec<(DirectiveConfig, Objectives)>) -> Vec<RankedDesign> {
    let objs: Vec<Objectives> = members.iter().map(|m| m.1).collect();
    let labels = label(&objs);
    members
        .into_iter()
        .zip(labels)
        .map(|((config, objectives), (rank, crowding))| RankedDesign { config, objectives, rank, crowding })
        .collect()
}

/// Indices sorted by (rank ascending, crowding descending, index ascending).
pub fn crowded_order(pop: &[RankedDesign]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| crowded_cmp(&pop[a], &pop[b]).then(a.cmp(&b)));
    idx
}

/// Crowded-comparison: lower rank first, then larger crowding distance.
pub fn crowded_cmp(a: &RankedDesign, b: &RankedDesign) -> Ordering {
    a.rank.cmp(&b.rank).then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
}

/// Elite screening with a reserved rank-2 quota.
///
/// Up to `rank2_quota` slots are kept for rank-2 members (as many as rank 2
/// holds); rank 1 fills the rest of `k` by descending crowding, then the
/// reserved rank-2 picks follow, then any remaining slots are filled in
/// crowded order. Returns indices into `pop` in selection order.
pub fn select_elites_indices(pop: &[RankedDesign], k: usize, rank2_quota: usize) -> Vec<usize> {
    if k >= pop.len() {
        return crowded_order(pop);
    }
    let order = crowded_order(pop);
    let rank1: Vec<usize> = order.iter().copied().filter(|&i| pop[i].rank == 1).collect();
    let rank2: Vec<usize> = order.iter().copied().filter(|&i| pop[i].rank == 2).collect();
    let reserved = rank2_quota.min(rank2.len()).min(k);
    let take1 = (k - reserved).min(rank1.len());
    let mut chosen: Vec<usize> = rank1[..take1].to_vec();
    let take2 = reserved.min(k - chosen.len());
    chosen.extend_from_slice(&rank2[..take2]);
    for i in order {
        if chosen.len() >= k {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen
}

pub fn select_elites(pop: &[RankedDesign], k: usize, rank2_quota: usize) -> Vec<RankedDesign> {
    select_elites_indices(pop, k, rank2_quota).into_iter().map(|i| pop[i].clone()).collect()
}

/// Non-dominated subset of `evals`, sorted by latency (then util), with
/// duplicate objective vectors collapsed onto their first occurrence.
pub fn pareto_front(evals: &[(DirectiveConfig, Objectives)]) -> Vec<(DirectiveConfig, Objectives)> {
    let objs: Vec<Objectives> = evals.iter().map(|e| e.1).collect();
    pareto_indices(&objs).into_iter().map(|i| evals[i].clone()).collect()
}

/// Index form of [`pareto_front`].
pub fn pareto_indices(objs: &[Objectives]) -> Vec<usize> {
    let Some(first) = non_dominated_sort(objs).into_iter().next() else {
        return Vec::new();
    };
    let mut kept: Vec<usize> = Vec::new();
    for i in first {
        if !kept.iter().any(|&j| objs[j] == objs[i]) {
            kept.push(i);
        }
    }
    kept.sort_by(|&a, &b| {
        objs[a]
            .latency
            .partial_cmp(&objs[b].latency)
            .unwrap_or(Ordering::Equal)
            .then(objs[a].util.partial_cmp(&objs[b].util).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    kept
}

/// Relative degradation of `explored` against reference point `reference`.
pub fn adrs_distance(reference: &Objectives, explored: &Objectives) -> f64 {
    let dl = (explored.latency - reference.latency) / reference.latency;
    let du = (explored.util - reference.util) / reference.util;
    0.0f64.max(dl).max(du)
}

/// Average distance from the reference set: mean over reference points of
/// the smallest relative degradation to any explored point. An empty
/// explored front scores `f64::INFINITY`.
pub fn adrs(explored: &[Objectives], reference: &[Objectives]) -> Result<f64, ParetoError> {
    if reference.is_empty() {
        return Err(ParetoError::EmptyReference);
    }
    for (index, r) in reference.iter().enumerate() {
        if !(r.latency > 0.0 && r.util > 0.0) {
            return Err(ParetoError::NonPositiveReference { index, latency: r.latency, util: r.util });
        }
    }
    if explored.is_empty() {
        return Ok(f64::INFINITY);
    }
    let total: f64 =
        reference.iter().map(|r| explored.iter().map(|e| adrs_distance(r, e)).fold(f64::INFINITY, f64::min)).sum();
    Ok(total / reference.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(l: f64, u: f64) -> Objectives {
        Objectives::new(l, u)
    }

    #[test]
    fn utilization_examples() {
        let w = UtilWeights::default();
        assert!((utilization(0.1, 0.2, 0.0, 0.4, &w) - 0.10).abs() < 1e-12);
        assert_eq!(utilization(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        assert!((utilization(1.0, 1.0, 1.0, 1.0, &w) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn domination_cases() {
        assert!(dominates(&o(100.0, 0.5), &o(110.0, 0.6)));
        assert!(!dominates(&o(100.0, 0.5), &o(100.0, 0.5)));
        assert!(!dominates(&o(100.0, 0.6), &o(110.0, 0.5)));
        assert!(!dominates(&o(110.0, 0.5), &o(100.0, 0.6)));
    }

    #[test]
    fn sort_small() {
        let fronts = non_dominated_sort(&[o(1.0, 2.0), o(2.0, 1.0), o(3.0, 3.0)]);
        assert_eq!(fronts, vec![vec![0, 1], vec![2]]);
        let same = non_dominated_sort(&[o(1.0, 1.0); 4]);
        assert_eq!(same, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn crowding_three_points() {
        let d = crowding_distance(&[o(0.0, 1.0), o(0.5, 0.5), o(1.0, 0.0)]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
        assert!(crowding_distance(&[o(0.0, 1.0), o(1.0, 0.0)]).iter().all(|x| x.is_infinite()));
    }

    #[test]
    fn crowding_zero_range_dimension() {
        let d = crowding_distance(&[o(5.0, 0.0), o(5.0, 0.25), o(5.0, 1.0), o(5.0, 0.5)]);
        // latency contributes nothing; util gaps (0.5-0)/1 and (1-0.25)/1
        assert!((d[1] - 0.5).abs() < 1e-12);
        assert!((d[3] - 0.75).abs() < 1e-12);
    }

    fn ranked(objs: &[(f64, f64)]) -> Vec<RankedDesign> {
        let members = objs
            .iter()
            .enumerate()
            .map(|(i, &(l, u))| {
                let mut c = DirectiveConfig::new();
                c.set_unroll(&format!("l{i}"), 2);
                (c, o(l, u))
            })
            .collect();
        rank_population(members)
    }

    #[test]
    fn elites_with_rank2_quota() {
        // rank 1: ten points on a line; rank 2: the same shifted up
        let mut pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 10.0 - i as f64)).collect();
        pts.extend((0..10).map(|i| (i as f64 + 0.5, 11.0 - i as f64)));
        let pop = ranked(&pts);
        let e = select_elites(&pop, 8, 3);
        assert_eq!(e.len(), 8);
        assert_eq!(e.iter().filter(|d| d.rank == 1).count(), 5);
        assert_eq!(e.iter().filter(|d| d.rank == 2).count(), 3);
        // boundaries of rank 1 come first
        assert!(e[0].crowding.is_infinite() && e[1].crowding.is_infinite());
        let pure = select_elites(&pop, 8, 0);
        assert!(pure.iter().all(|d| d.rank == 1));
    }

    #[test]
    fn elites_degenerate() {
        let pop = ranked(&[(1.0, 1.0)]);
        assert_eq!(select_elites(&pop, 4, 3).len(), 1);
    }

    #[test]
    fn front_examples() {
        let evals: Vec<_> =
            [(1.0, 2.0), (2.0, 1.0), (2.0, 2.0)].iter().map(|&(l, u)| (DirectiveConfig::new(), o(l, u))).collect();
        let f = pareto_front(&evals);
        assert_eq!(f.iter().map(|e| e.1).collect::<Vec<_>>(), vec![o(1.0, 2.0), o(2.0, 1.0)]);
        assert!(pareto_front(&[]).is_empty());
    }

    #[test]
    fn adrs_examples() {
        let r = [o(100.0, 0.5)];
        assert_eq!(adrs(&r, &r).unwrap(), 0.0);
        assert!((adrs(&[o(110.0, 0.6)], &r).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(adrs(&[o(90.0, 0.4)], &r).unwrap(), 0.0);
        assert!(adrs(&[], &r).unwrap().is_infinite());
        assert_eq!(adrs(&r, &[]), Err(ParetoError::EmptyReference));
        assert!(matches!(adrs(&r, &[o(0.0, 1.0)]), Err(ParetoError::NonPositiveReference { .. })));
    }
}
