use std::collections::{BTreeMap, HashSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Bottleneck, OperatorTag, Parent};
use crate::advisor::{Advisor, AdvisorError};
use crate::design::{ArrayDirective, DirectiveConfig, HlsDesign, LoopInfo, PartitionType};
use crate::qor::collect_accesses;
use crate::sampling::rng_for;
use crate::space::DesignSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorParams {
    pub ports_per_partition: u64,
    pub pipeline_depth: u64,
    /// Divergent candidates whose estimated II exceeds this are rejected.
    pub max_estimated_ii: u64,
    /// Outer loops above this trip count are never unrolled by the
    /// divergent rule.
    pub large_trip_threshold: u64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self { ports_per_partition: 2, pipeline_depth: 4, max_estimated_ii: 4, large_trip_threshold: 64 }
    }
}

/// Inputs shared by both operators.
#[derive(Clone, Copy)]
pub struct OperatorContext<'a> {
    pub design: &'a HlsDesign,
    pub space: &'a DesignSpace,
    pub parents: &'a [Parent],
    /// Configs already evaluated (or already proposed this round).
    pub seen: &'a HashSet<DirectiveConfig>,
    pub params: &'a OperatorParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub config: DirectiveConfig,
    /// Indices into the parent slice.
    pub parents: Vec<usize>,
    pub tag: OperatorTag,
}

/// Power-of-two unroll factors (including 1) present in `domain`.
pub fn power_of_two_unrolls(domain: &[u64]) -> Vec<u64> {
    domain.iter().copied().filter(|v| *v >= 1 && v.is_power_of_two()).collect()
}

/// Coarse II lower bound `ceil(unroll / (factor * ports))`.
pub fn estimated_ii(unroll: u64, factor: u64, ports: u64) -> u64 {
    unroll.max(1).div_ceil(factor.max(1) * ports.max(1))
}

fn parent_loop<'a>(design: &'a HlsDesign, name: &str) -> Option<&'a LoopInfo> {
    let path = design.loop_path(name)?;
    (path.len() >= 2).then(|| path[path.len() - 2])
}

/// Smallest factor in `factors` that is at least `need`; the largest one
/// when none is.
fn factor_at_least(factors: &[u64], need: u64) -> u64 {
    factors.iter().copied().filter(|&f| f >= need).min().or_else(|| factors.iter().copied().max()).unwrap_or(0)
}

fn cyclic_or_block(types: &[u8]) -> Option<PartitionType> {
    [PartitionType::Cyclic, PartitionType::Block].into_iter().find(|t| types.contains(&t.code()))
}

/// Next unroll value of `loop_name` above its current replication.
fn next_unroll(space: &DesignSpace, config: &DirectiveConfig, loop_name: &str) -> Option<u64> {
    let cur = config.loop_directive(loop_name).replication();
    space.loop_domain(loop_name)?.unroll.iter().copied().filter(|&v| v > cur).min()
}

fn compute_child(ctx: &OperatorContext, parent: &Parent) -> Option<DirectiveConfig> {
    let order: Vec<String> = match &parent.analysis {
        Some(a) => {
            let mut units: Vec<_> = a.units.iter().collect();
            units.sort_by(|x, y| y.contribution.cmp(&x.contribution).then(x.loop_name.cmp(&y.loop_name)));
            units.into_iter().map(|u| u.loop_name.clone()).collect()
        }
        None => {
            let mut nodes = ctx.design.loop_nodes();
            nodes.sort_by(|a, b| b.depth.cmp(&a.depth).then(b.info.trip_count.cmp(&a.info.trip_count)));
            nodes.into_iter().map(|n| n.info.name.clone()).collect()
        }
    };
    for name in order {
        if let Some(u) = next_unroll(ctx.space, &parent.config, &name) {
            let mut child = parent.config.clone();
            child.set_unroll(&name, u);
            return Some(child);
        }
    }
    None
}

fn memory_child(ctx: &OperatorContext, parent: &Parent) -> Option<DirectiveConfig> {
    let design = ctx.design;
    let target = match &parent.analysis {
        Some(a) => a
            .units
            .iter()
            .filter(|u| u.ii > 1)
            .max_by(|x, y| x.contribution.cmp(&y.contribution).then(y.loop_name.cmp(&x.loop_name)))?
            .loop_name
            .clone(),
        None => {
            let mut nodes = design.loop_nodes();
            nodes.retain(|n| n.info.is_leaf());
            nodes.sort_by_key(|n| std::cmp::Reverse(n.info.trip_count));
            nodes.first()?.info.name.clone()
        }
    };
    let mut child = parent.config.clone();
    let can_pipeline = |name: &str| ctx.space.loop_domain(name).is_some_and(|d| d.pipeline.contains(&1));

    // Pipeline the unit, or move an existing pipeline one loop outward.
    let mut unit = target.clone();
    if !child.loop_directive(&target).pipeline {
        if can_pipeline(&target) {
            child.set_pipeline(&target, true);
        }
    } else if let Some(p) = parent_loop(design, &target) {
        if can_pipeline(&p.name) {
            child.set_pipeline(&target, false);
            child.set_pipeline(&p.name, true);
            unit = p.name.clone();
        }
    }

    let info = design.find_loop(&unit)?;
    let d = child.loop_directive(&unit);
    let mut acc = BTreeMap::new();
    if d.pipeline {
        collect_accesses(info, d.replication(), &mut acc);
    } else {
        for (a, dim) in &info.accessed_arrays {
            *acc.entry((a.clone(), *dim)).or_default() += d.replication();
        }
    }
    for ((array, dim), need) in acc {
        let Some(dom) = ctx.space.array_domain(&array) else { continue };
        let have = crate::qor::effective_factor(design, &child, &array, dim);
        if have >= need || !dom.dims.contains(&dim) {
            continue;
        }
        let cur = child.array_directive(&array);
        let kind = if cur.is_active() && cur.kind != PartitionType::Complete && dom.types.contains(&cur.kind.code()) {
            cur.kind
        } else {
            match cyclic_or_block(&dom.types) {
                Some(k) => k,
                None => continue,
            }
        };
        let f = factor_at_least(&dom.factors, need);
        if f > have {
            child.set_array(&array, ArrayDirective::new(kind, dim, f));
        }
    }
    Some(child)
}

/// Deterministic convergent children, one per parent in order, skipping
/// anything equal to its parent or already seen.
pub fn convergent_rule(ctx: &OperatorContext, count: usize) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    for (i, p) in ctx.parents.iter().enumerate() {
        if out.len() >= count {
            break;
        }
        let child = match p.bottleneck {
            Bottleneck::ComputeBound => compute_child(ctx, p),
            Bottleneck::MemoryBound => memory_child(ctx, p),
        };
        let Some(child) = child.map(|c| ctx.space.repair(&c)) else { continue };
        if child != p.config && !ctx.seen.contains(&child) && !out.iter().any(|c| c.config == child) {
            out.push(Candidate { config: child, parents: vec![i], tag: OperatorTag::Convergent });
        }
    }
    out
}

fn nearest_parent(ctx: &OperatorContext, config: &DirectiveConfig) -> Vec<usize> {
    (0..ctx.parents.len()).min_by_key(|&i| ctx.space.hamming(&ctx.parents[i].config, config)).into_iter().collect()
}

fn novel(ctx: &OperatorContext, config: &DirectiveConfig, taken: &[Candidate]) -> bool {
    ctx.space.contains(config)
        && !ctx.seen.contains(config)
        && !taken.iter().any(|c| &c.config == config)
        && ctx.parents.iter().all(|p| ctx.space.hamming(&p.config, config) >= 2)
}

/// Accessed arrays of the innermost loops, with the accessed dimension and
/// the unroll factor of the accessing loop.
fn leaf_accesses(design: &HlsDesign, config: &DirectiveConfig) -> BTreeMap<String, (usize, u64)> {
    let mut out: BTreeMap<String, (usize, u64)> = BTreeMap::new();
    for n in design.loop_nodes() {
        if !n.info.is_leaf() {
            continue;
        }
        let u = config.loop_directive(&n.info.name).replication();
        for (a, dim) in &n.info.accessed_arrays {
            let e = out.entry(a.clone()).or_insert((*dim, 0));
            if u > e.1 {
                *e = (*dim, u);
            }
        }
    }
    out
}

fn divergent_candidate(ctx: &OperatorContext, base: &DirectiveConfig, rng: &mut impl Rng) -> Option<DirectiveConfig> {
    let design = ctx.design;
    let mut child = base.clone();
    for n in design.loop_nodes() {
        let Some(dom) = ctx.space.loop_domain(&n.info.name) else { continue };
        let pows = power_of_two_unrolls(&dom.unroll);
        if n.info.is_leaf() {
            let u = pows.choose(rng).copied().unwrap_or(0);
            child.set_unroll(&n.info.name, u);
            child.set_pipeline(&n.info.name, dom.pipeline.contains(&1));
        } else {
            child.set_pipeline(&n.info.name, !dom.pipeline.contains(&0));
            let u = if n.info.trip_count <= ctx.params.large_trip_threshold {
                pows.choose(rng).copied().unwrap_or(0)
            } else {
                0
            };
            child.set_unroll(&n.info.name, u);
        }
    }
    let accesses = leaf_accesses(design, &child);
    for (array, &(dim, u)) in &accesses {
        let Some(dom) = ctx.space.array_domain(array) else { continue };
        let kinds: Vec<PartitionType> = [PartitionType::Cyclic, PartitionType::Block]
            .into_iter()
            .filter(|t| dom.types.contains(&t.code()))
            .collect();
        let Some(&kind) = kinds.choose(rng) else { continue };
        if !dom.dims.contains(&dim) {
            continue;
        }
        child.set_array(array, ArrayDirective::new(kind, dim, factor_at_least(&dom.factors, u)));
    }
    let child = ctx.space.repair(&child);
    for (array, &(dim, u)) in &accesses {
        let f = crate::qor::effective_factor(design, &child, array, dim);
        if estimated_ii(u, f, ctx.params.ports_per_partition) > ctx.params.max_estimated_ii {
            return None;
        }
    }
    Some(child)
}

/// Seeded divergent candidates. Each must differ from every parent in at
/// least two coordinates and from everything already seen; the shortfall
/// is filled with random novel points.
pub fn divergent_rule(ctx: &OperatorContext, count: usize, seed: u64) -> Vec<Candidate> {
    let mut rng = rng_for(seed);
    let mut out: Vec<Candidate> = Vec::new();
    let attempts = 20 * count.max(1);
    let empty = DirectiveConfig::new();
    for k in 0..attempts {
        if out.len() >= count {
            break;
        }
        let (base, pid) = if ctx.parents.is_empty() {
            (&empty, Vec::new())
        } else {
            let i = k % ctx.parents.len();
            (&ctx.parents[i].config, vec![i])
        };
        if let Some(c) = divergent_candidate(ctx, base, &mut rng) {
            if novel(ctx, &c, &out) {
                out.push(Candidate { config: c, parents: pid, tag: OperatorTag::Divergent });
            }
        }
    }
    let dims = ctx.space.dimensions();
    for _ in 0..attempts {
        if out.len() >= count {
            break;
        }
        let idx: Vec<usize> = dims.iter().map(|d| rng.random_range(0..d.values.len())).collect();
        let c = ctx.space.config_from_indices(&dims, &idx);
        if novel(ctx, &c, &out) {
            let parents = nearest_parent(ctx, &c);
            out.push(Candidate { config: c, parents, tag: OperatorTag::Divergent });
        }
    }
    out
}

/// Merges advisor proposals (first) with rule output, keeping `count`.
fn merge(
    ctx: &OperatorContext,
    hints: Vec<DirectiveConfig>,
    rule: Vec<Candidate>,
    count: usize,
    tag: OperatorTag,
    strict: bool,
) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    for h in hints {
        let c = ctx.space.repair(&h);
        let ok = if strict {
            novel(ctx, &c, &out)
        } else {
            ctx.space.contains(&c) && !ctx.seen.contains(&c) && !out.iter().any(|x| x.config == c)
        };
        if ok && out.len() < count {
            let parents = nearest_parent(ctx, &c);
            out.push(Candidate { config: c, parents, tag });
        }
    }
    for r in rule {
        if out.len() >= count {
            break;
        }
        if let Some(existing) = out.iter_mut().find(|x| x.config == r.config) {
            existing.parents = r.parents;
        } else {
            out.push(r);
        }
    }
    out
}

/// Convergent operator: advisor hints merged with [`convergent_rule`]. An
/// advisor failure is returned alongside the rule-only result.
pub fn convergent_search(
    ctx: &OperatorContext,
    advisor: &dyn Advisor,
    count: usize,
) -> (Vec<Candidate>, Option<AdvisorError>) {
    let rule = convergent_rule(ctx, count);
    match advisor.convergent_hints(ctx, count) {
        Ok(h) => (merge(ctx, h, rule, count, OperatorTag::Convergent, false), None),
        Err(e) => (rule, Some(e)),
    }
}

/// Divergent operator: advisor hints merged with [`divergent_rule`].
pub fn divergent_search(
    ctx: &OperatorContext,
    advisor: &dyn Advisor,
    count: usize,
    seed: u64,
) -> (Vec<Candidate>, Option<AdvisorError>) {
    let rule = divergent_rule(ctx, count, seed);
    match advisor.divergent_hints(ctx, count, seed) {
        Ok(h) => (merge(ctx, h, rule, count, OperatorTag::Divergent, true), None),
        Err(e) => (rule, Some(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::qor::{MockBackend, QorBackend};
    use crate::search::classify_bottleneck;
    use crate::space::{prune, PruneRuleSet};

    fn parent(d: &HlsDesign, c: DirectiveConfig) -> Parent {
        let b = MockBackend::default();
        let qor = b.evaluate(d, &c).unwrap();
        let analysis = b.analyze(d, &c);
        let bottleneck = classify_bottleneck(d, &qor, analysis.as_ref(), 4).unwrap();
        Parent { id: 0, config: c, qor, bottleneck, analysis }
    }

    fn vm() -> (HlsDesign, DesignSpace) {
        let d = fixtures::vector_mul();
        let s = prune(&DesignSpace::build(&d), &d, &PruneRuleSet::default()).unwrap();
        (d, s)
    }

    #[test]
    fn compute_bound_raises_unroll() {
        let (d, s) = vm();
        let mut c = DirectiveConfig::new();
        c.set_unroll("mul", 2);
        let parents = [parent(&d, c)];
        let seen = HashSet::new();
        let p = OperatorParams::default();
        let ctx = OperatorContext { design: &d, space: &s, parents: &parents, seen: &seen, params: &p };
        let out = convergent_rule(&ctx, 1);
        assert_eq!(out[0].config.loop_directive("mul").unroll, 4);
        assert_eq!(s.hamming(&out[0].config, &parents[0].config), 1);
    }

    #[test]
    fn max_unroll_has_no_child() {
        let (d, s) = vm();
        let mut c = DirectiveConfig::new();
        c.set_unroll("mul", *s.loop_domain("mul").unwrap().unroll.last().unwrap());
        for a in ["A", "B", "C"] {
            c.set_array(a, ArrayDirective::new(PartitionType::Cyclic, 1, 64));
        }
        let parents = [parent(&d, c)];
        assert_eq!(parents[0].bottleneck, Bottleneck::ComputeBound);
        let seen = HashSet::new();
        let p = OperatorParams::default();
        let ctx = OperatorContext { design: &d, space: &s, parents: &parents, seen: &seen, params: &p };
        assert!(convergent_rule(&ctx, 1).is_empty());
    }

    #[test]
    fn memory_bound_matches_partition() {
        let (d, s) = vm();
        let mut c = DirectiveConfig::new();
        c.set_pipeline("mul", true);
        c.set_unroll("mul", 4);
        for a in ["A", "B", "C"] {
            c.set_array(a, ArrayDirective::new(PartitionType::Cyclic, 1, 1));
        }
        let parents = [parent(&d, c)];
        assert_eq!(parents[0].bottleneck, Bottleneck::MemoryBound);
        let seen = HashSet::new();
        let p = OperatorParams::default();
        let ctx = OperatorContext { design: &d, space: &s, parents: &parents, seen: &seen, params: &p };
        let child = &convergent_rule(&ctx, 1)[0].config;
        for a in ["A", "B", "C"] {
            assert_eq!(child.array_directive(a).factor, 4);
        }
        assert_eq!(child.loop_directive("mul"), parents[0].config.loop_directive("mul"));
    }

    #[test]
    fn divergent_rules_hold() {
        let (d, mut s) = vm();
        let parents = [parent(&d, DirectiveConfig::new())];
        let seen: HashSet<_> = [DirectiveConfig::new()].into_iter().collect();
        let p = OperatorParams::default();
        s.loops[0].unroll = vec![0, 1, 2, 3, 4, 6, 12];
        let ctx = OperatorContext { design: &d, space: &s, parents: &parents, seen: &seen, params: &p };
        let out = divergent_rule(&ctx, 3, 5);
        assert!(!out.is_empty());
        for c in &out {
            let l = c.config.loop_directive("mul");
            assert!(l.pipeline);
            assert!([0, 2, 4].contains(&l.unroll), "unroll {}", l.unroll);
            assert!(s.hamming(&c.config, &parents[0].config) >= 2);
        }
    }

    #[test]
    fn ii_estimate() {
        assert_eq!(estimated_ii(4, 1, 2), 2);
        assert_eq!(estimated_ii(4, 4, 2), 1);
        assert_eq!(estimated_ii(0, 0, 2), 1);
        assert_eq!(power_of_two_unrolls(&[0, 1, 2, 3, 4, 6, 12]), vec![1, 2, 4]);
    }
}
