use serde::{Deserialize, Serialize};

use super::{DesignSpace, Field, SpaceError};
use crate::design::{HlsDesign, LoopInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleAction {
    /// Drop the listed values.
    Remove,
    /// Keep only the listed values.
    Restrict,
}

/// A user (or advisor) supplied domain edit. Edits only ever shrink a
/// domain; the default value 0 of `unroll`/`factor` is never removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDescriptor {
    pub site: String,
    pub field: String,
    pub action: RuleAction,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneRuleSet {
    pub large_trip_threshold: u64,
    pub max_unroll_cap: u64,
    /// A loop with this many loop levels at or below it may not be pipelined.
    pub outer_pipeline_disable_depth: usize,
    pub custom_rules: Vec<RuleDescriptor>,
}

impl Default for PruneRuleSet {
    fn default() -> Self {
        Self { large_trip_threshold: 64, max_unroll_cap: 64, outer_pipeline_disable_depth: 3, custom_rules: Vec::new() }
    }
}

/// The structural pruning rules, applied in this order by [`prune`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinRule {
    /// Outer loops of deep nests, or whose inner iterations would all be
    /// unrolled past the trip threshold, lose pipelining.
    OuterPipeline,
    /// Outermost loop of a multi-level nest loses unrolling.
    OutermostUnroll,
    /// A loop with several sibling sub-loops loses unrolling.
    SiblingUnroll,
    /// Children of an imperfect loop lose unrolling.
    ImperfectParentUnroll,
    /// Large-trip loops keep only unroll values up to the cap.
    UnrollCap,
}

impl BuiltinRule {
    pub const ALL: [BuiltinRule; 5] =
        [Self::OuterPipeline, Self::OutermostUnroll, Self::SiblingUnroll, Self::ImperfectParentUnroll, Self::UnrollCap];

    pub fn apply(self, space: &mut DesignSpace, design: &HlsDesign, rules: &PruneRuleSet) {
        let nodes = design.loop_nodes();
        for node in &nodes {
            let l = node.info;
            let Some(dom) = space.loops.iter_mut().find(|d| d.name == l.name) else {
                continue;
            };
            match self {
                Self::OuterPipeline => {
                    if !l.is_leaf()
                        && (l.height() >= rules.outer_pipeline_disable_depth
                            || inner_iterations(l) > rules.large_trip_threshold)
                    {
                        dom.pipeline.retain(|&p| p == 0);
                    }
                }
                Self::OutermostUnroll => {
                    if node.parent.is_none() && l.height() >= 2 {
                        dom.unroll.retain(|&u| u == 0);
                    }
                }
                Self::SiblingUnroll => {
                    if l.children.len() >= 2 {
                        dom.unroll.retain(|&u| u == 0);
                    }
                }
                Self::ImperfectParentUnroll => {
                    if let Some(p) = node.parent {
                        if !nodes[p].info.is_perfect {
                            dom.unroll.retain(|&u| u == 0);
                        }
                    }
                }
                Self::UnrollCap => {
                    if l.trip_count > rules.large_trip_threshold {
                        dom.unroll.retain(|&u| u <= rules.max_unroll_cap);
                    }
                }
            }
        }
    }
}

/// Total iterations of the loops strictly below `l`, i.e. the body copies
/// created when `l` is pipelined and everything inside is fully unrolled.
pub(crate) fn inner_iterations(l: &LoopInfo) -> u64 {
    l.children
        .iter()
        .map(|c| c.trip_count.saturating_mul(if c.is_leaf() { 1 } else { inner_iterations(c) }))
        .fold(0u64, u64::saturating_add)
}

/// Applies all built-in rules, then the custom rules in order.
pub fn prune(space: &DesignSpace, design: &HlsDesign, rules: &PruneRuleSet) -> Result<DesignSpace, SpaceError> {
    prune_with(space, design, rules, &BuiltinRule::ALL)
}

/// Like [`prune`] with an explicit subset of built-in rules.
pub fn prune_with(
    space: &DesignSpace,
    design: &HlsDesign,
    rules: &PruneRuleSet,
    builtin: &[BuiltinRule],
) -> Result<DesignSpace, SpaceError> {
    let mut out = space.clone();
    for r in BuiltinRule::ALL {
        if builtin.contains(&r) {
            r.apply(&mut out, design, rules);
        }
    }
    for rule in &rules.custom_rules {
        apply_custom(&mut out, rule)?;
    }
    Ok(out)
}

fn edit<T: PartialEq + Copy>(
    domain: &mut Vec<T>,
    rule: &RuleDescriptor,
    values: &[T],
    keep: Option<T>,
) -> Result<(), SpaceError> {
    let before = domain.clone();
    match rule.action {
        RuleAction::Remove => domain.retain(|v| Some(*v) == keep || !values.contains(v)),
        RuleAction::Restrict => domain.retain(|v| Some(*v) == keep || values.contains(v)),
    }
    if domain.is_empty() {
        *domain = before;
        return Err(SpaceError::EmptyDomain { site: rule.site.clone(), field: rule.field.clone() });
    }
    Ok(())
}

fn apply_custom(space: &mut DesignSpace, rule: &RuleDescriptor) -> Result<(), SpaceError> {
    let field = Field::parse(&rule.field);
    if let Some(l) = space.loops.iter_mut().find(|l| l.name == rule.site) {
        return match field {
            Some(Field::Pipeline) => {
                let vals: Vec<u8> = rule.values.iter().filter(|&&v| v <= 1).map(|&v| v as u8).collect();
                edit(&mut l.pipeline, rule, &vals, None)
            }
            Some(Field::Unroll) => edit(&mut l.unroll, rule, &rule.values, Some(0)),
            _ => Err(SpaceError::BadField { site: rule.site.clone(), kind: "loop", field: rule.field.clone() }),
        };
    }
    if let Some(a) = space.arrays.iter_mut().find(|a| a.name == rule.site) {
        return match field {
            Some(Field::Type) => {
                let vals: Vec<u8> = rule.values.iter().filter(|&&v| v <= 2).map(|&v| v as u8).collect();
                edit(&mut a.types, rule, &vals, None)
            }
            Some(Field::Dim) => {
                let vals: Vec<usize> = rule.values.iter().map(|&v| v as usize).collect();
                edit(&mut a.dims, rule, &vals, None)
            }
            Some(Field::Factor) => edit(&mut a.factors, rule, &rule.values, Some(0)),
            _ => Err(SpaceError::BadField { site: rule.site.clone(), kind: "array", field: rule.field.clone() }),
        };
    }
    Err(SpaceError::UnknownSite(rule.site.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::space::build_space;

    #[test]
    fn gemm_outermost_loses_unroll_and_pipeline() {
        let d = fixtures::gemm();
        let s = prune(&build_space(&d), &d, &PruneRuleSet::default()).unwrap();
        let i = s.loop_domain("i").unwrap();
        assert_eq!(i.unroll, vec![0]);
        assert_eq!(i.pipeline, vec![0]);
        // j: 64 inner iterations, not above the threshold
        assert_eq!(s.loop_domain("j").unwrap().pipeline, vec![0, 1]);
        assert_eq!(s.loop_domain("k").unwrap().unroll.len(), 8);
    }

    #[test]
    fn flat_loop_only_capped() {
        let d = fixtures::vector_mul();
        let full = build_space(&d);
        let s = prune(&full, &d, &PruneRuleSet::default()).unwrap();
        assert_eq!(s.loops[0].unroll, vec![0, 1, 2, 4, 8, 16, 32, 64]);
        assert_eq!(s.loops[0].pipeline, full.loops[0].pipeline);
        assert_eq!(s.arrays, full.arrays);
    }

    #[test]
    fn sibling_subloops_block_outer_unroll() {
        let d = fixtures::row_norm();
        let full = build_space(&d);
        let s = prune_with(&full, &d, &PruneRuleSet::default(), &[BuiltinRule::SiblingUnroll]).unwrap();
        assert_eq!(s.loop_domain("row").unwrap().unroll, vec![0]);
        assert_eq!(s.loop_domain("col").unwrap().unroll, full.loop_domain("col").unwrap().unroll);
    }

    #[test]
    fn custom_rules() {
        let d = fixtures::vector_mul();
        let full = build_space(&d);
        let rules = PruneRuleSet {
            custom_rules: vec![
                RuleDescriptor {
                    site: "mul".into(),
                    field: "unroll".into(),
                    action: RuleAction::Restrict,
                    values: vec![2, 4],
                },
                RuleDescriptor { site: "A".into(), field: "type".into(), action: RuleAction::Remove, values: vec![0] },
            ],
            ..Default::default()
        };
        let s = prune(&full, &d, &rules).unwrap();
        assert_eq!(s.loops[0].unroll, vec![0, 2, 4]);
        assert_eq!(s.arrays[0].types, vec![1, 2]);
    }

    #[test]
    fn custom_rule_errors() {
        let d = fixtures::vector_mul();
        let full = build_space(&d);
        let mk = |site: &str, field: &str, action, values: Vec<u64>| PruneRuleSet {
            custom_rules: vec![RuleDescriptor { site: site.into(), field: field.into(), action, values }],
            ..Default::default()
        };
        assert_eq!(
            prune(&full, &d, &mk("nope", "unroll", RuleAction::Remove, vec![2])).unwrap_err(),
            SpaceError::UnknownSite("nope".into())
        );
        assert!(matches!(
            prune(&full, &d, &mk("mul", "factor", RuleAction::Remove, vec![2])),
            Err(SpaceError::BadField { .. })
        ));
        assert!(matches!(
            prune(&full, &d, &mk("mul", "pipeline", RuleAction::Restrict, vec![])),
            Err(SpaceError::EmptyDomain { .. })
        ));
    }

    #[test]
    fn inner_iterations_sums_siblings() {
        let d = fixtures::row_norm();
        // col*acc + norm = 32*128 + 32
        assert_eq!(inner_iterations(&d.loops[0]), 32 * 128 + 32);
        assert_eq!(inner_iterations(&d.loops[0].children[0]), 128);
    }
}
