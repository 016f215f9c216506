use std::collections::BTreeMap;

use super::{Advisor, AdvisorError, Objective, ParentNote, ReflectRequest, Role};
use crate::design::{ArrayDirective, DirectiveConfig, HlsDesign, PartitionType};
use crate::search::{convergent_rule, divergent_rule, power_of_two_unrolls, OperatorContext};
use crate::space::{DesignSpace, RuleDescriptor};

/// Deterministic advisor built from fixed hardware heuristics. It cannot
/// read source code, so feature extraction is unsupported.
#[derive(Debug, Clone, Default)]
pub struct RuleAdvisor;

/// Seed ladders: ordered, distinct configs per objective.
pub struct SeedLadder;

impl SeedLadder {
    /// Innermost loops unrolled by `pick(k, pows)` and pipelined when
    /// `pipeline`; accessed arrays cyclically partitioned to match.
    fn shaped(
        design: &HlsDesign,
        space: &DesignSpace,
        pipeline: bool,
        pick: &dyn Fn(&[u64]) -> u64,
    ) -> DirectiveConfig {
        let mut cfg = DirectiveConfig::new();
        let mut access: BTreeMap<String, (usize, u64)> = BTreeMap::new();
        for n in design.loop_nodes() {
            if !n.info.is_leaf() {
                continue;
            }
            let Some(dom) = space.loop_domain(&n.info.name) else { continue };
            let pows = power_of_two_unrolls(&dom.unroll);
            let u = if pows.is_empty() { 0 } else { pick(&pows) };
            cfg.set_unroll(&n.info.name, u);
            cfg.set_pipeline(&n.info.name, pipeline && dom.pipeline.contains(&1));
            let rep = u.max(1);
            for (a, dim) in &n.info.accessed_arrays {
                let e = access.entry(a.clone()).or_insert((*dim, 0));
                if rep > e.1 {
                    *e = (*dim, rep);
                }
            }
        }
        for (a, (dim, u)) in access {
            if u <= 1 {
                continue;
            }
            let Some(dom) = space.array_domain(&a) else { continue };
            if let Some(f) = dom.factors.iter().copied().filter(|&f| f >= u).min() {
                cfg.set_array(&a, ArrayDirective::new(PartitionType::Cyclic, dim, f));
            }
        }
        space.repair(&cfg)
    }

    fn longest_pows(design: &HlsDesign, space: &DesignSpace) -> usize {
        design
            .loop_nodes()
            .iter()
            .filter(|n| n.info.is_leaf())
            .filter_map(|n| space.loop_domain(&n.info.name))
            .map(|d| power_of_two_unrolls(&d.unroll).len())
            .max()
            .unwrap_or(0)
    }

    /// Distinct configs for `objective`, most characteristic first.
    pub fn ladder(design: &HlsDesign, space: &DesignSpace, objective: Objective) -> Vec<DirectiveConfig> {
        let steps = Self::longest_pows(design, space);
        let mut raw = Vec::new();
        match objective {
            Objective::Performance => {
                for k in 0..steps {
                    raw.push(Self::shaped(design, space, true, &|p| p[p.len().saturating_sub(1 + k)]));
                }
            }
            Objective::Resource => {
                raw.push(space.repair(&DirectiveConfig::new()));
                for k in 0..steps {
                    raw.push(Self::shaped(design, space, true, &|p| p[k.min(p.len() - 1)]));
                }
            }
            Objective::Balanced => {
                let mid = |p: &[u64]| (p.len() - 1) / 2;
                for k in 0..2 * steps {
                    let off = (k as isize + 1) / 2 * if k % 2 == 1 { -1 } else { 1 };
                    raw.push(Self::shaped(design, space, true, &|p| {
                        let i = (mid(p) as isize + off).clamp(0, p.len() as isize - 1);
                        p[i as usize]
                    }));
                }
            }
        }
        let mut out: Vec<DirectiveConfig> = Vec::new();
        for c in raw {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}

impl Advisor for RuleAdvisor {
    fn name(&self) -> &str {
        "rule"
    }

    fn extract_features(&self, _source: &str) -> Result<HlsDesign, AdvisorError> {
        Err(AdvisorError::Unsupported(Role::ExtractFeatures))
    }

    fn prune_rules(&self, _design: &HlsDesign, _space: &DesignSpace) -> Result<Vec<RuleDescriptor>, AdvisorError> {
        Ok(Vec::new())
    }

    fn seed_directives(
        &self,
        design: &HlsDesign,
        space: &DesignSpace,
        objective: Objective,
        count: usize,
    ) -> Result<Vec<DirectiveConfig>, AdvisorError> {
        if count == 0 {
            return Err(AdvisorError::BadRequest { role: Role::SeedDirectives, reason: "count must be >= 1".into() });
        }
        Ok(SeedLadder::ladder(design, space, objective).into_iter().take(count).collect())
    }

    fn reflect_trajectory(&self, req: &ReflectRequest) -> Result<Vec<ParentNote>, AdvisorError> {
        Ok(req
            .elites
            .iter()
            .enumerate()
            .map(|(k, &index)| ParentNote { index, note: req.notes.get(k).cloned().unwrap_or_default() })
            .collect())
    }

    fn convergent_hints(&self, ctx: &OperatorContext, count: usize) -> Result<Vec<DirectiveConfig>, AdvisorError> {
        Ok(convergent_rule(ctx, count).into_iter().map(|c| c.config).collect())
    }

    fn divergent_hints(
        &self,
        ctx: &OperatorContext,
        count: usize,
        seed: u64,
    ) -> Result<Vec<DirectiveConfig>, AdvisorError> {
        Ok(divergent_rule(ctx, count, seed).into_iter().map(|c| c.config).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::space::{prune, PruneRuleSet};

    fn vm() -> (HlsDesign, DesignSpace) {
        let d = fixtures::vector_mul();
        let s = prune(&DesignSpace::build(&d), &d, &PruneRuleSet::default()).unwrap();
        (d, s)
    }

    #[test]
    fn performance_seed() {
        let (d, s) = vm();
        let c = &RuleAdvisor.seed_directives(&d, &s, Objective::Performance, 1).unwrap()[0];
        let l = c.loop_directive("mul");
        assert!(l.pipeline);
        assert_eq!(l.unroll, 64);
        for a in ["A", "B", "C"] {
            assert_eq!(c.array_directive(a), ArrayDirective::new(PartitionType::Cyclic, 1, 64));
        }
    }

    #[test]
    fn resource_seed_is_all_off() {
        let (d, s) = vm();
        let c = &RuleAdvisor.seed_directives(&d, &s, Objective::Resource, 1).unwrap()[0];
        assert!(c.is_empty());
    }

    #[test]
    fn ladders_distinct_and_legal() {
        let (d, s) = vm();
        for o in [Objective::Performance, Objective::Resource, Objective::Balanced] {
            let l = SeedLadder::ladder(&d, &s, o);
            assert!(l.len() >= 4);
            assert!(l.iter().all(|c| s.contains(c)));
        }
        let b = SeedLadder::ladder(&d, &s, Objective::Balanced);
        assert_eq!(b[0].loop_directive("mul").unroll, 8);
    }

    #[test]
    fn extraction_unsupported() {
        assert_eq!(RuleAdvisor.extract_features("void f(){}"), Err(AdvisorError::Unsupported(Role::ExtractFeatures)));
    }
}
