use hlsdse_core::advisor::RuleAdvisor;
use hlsdse_core::design::{ArrayInfo, DirectiveConfig, HlsDesign, LoopInfo};
use hlsdse_core::fixtures;
use hlsdse_core::pareto::{adrs, crowding_distance, Objectives};
use hlsdse_core::qor::MockBackend;
use hlsdse_core::sampling::{lhs_unit, sample, SamplerKind, SamplerSpec};
use hlsdse_core::search::{explore, SearchParams};
use hlsdse_core::space::{prune, DesignSpace, PruneRuleSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIPS: [u64; 9] = [1, 2, 4, 7, 8, 16, 32, 64, 128];
const SIZES: [u64; 6] = [4, 8, 12, 32, 64, 128];

/// A random but valid loop forest with a few arrays.
fn random_design(seed: u64) -> HlsDesign {
    fn nest(rng: &mut ChaCha8Rng, depth: usize, next: &mut usize, arrays: &[ArrayInfo]) -> LoopInfo {
        let name = format!("L{next}");
        *next += 1;
        let kids = if depth >= 3 { 0 } else { rng.random_range(0..=2) };
        let children: Vec<LoopInfo> = (0..kids).map(|_| nest(rng, depth + 1, next, arrays)).collect();
        let accessed_arrays = if children.is_empty() {
            let a = &arrays[rng.random_range(0..arrays.len())];
            vec![(a.name.clone(), rng.random_range(1..=a.dims.len()))]
        } else {
            Vec::new()
        };
        LoopInfo {
            name,
            trip_count: TRIPS[rng.random_range(0..TRIPS.len())],
            is_perfect: children.len() <= 1 && rng.random_bool(0.7),
            accessed_arrays,
            children,
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrays: Vec<ArrayInfo> = (0..rng.random_range(1..=3))
        .map(|k| ArrayInfo {
            name: format!("A{k}"),
            dims: (0..rng.random_range(1..=2)).map(|_| SIZES[rng.random_range(0..SIZES.len())]).collect(),
        })
        .collect();
    let mut next = 0;
    let loops = (0..rng.random_range(1..=2)).map(|_| nest(&mut rng, 1, &mut next, &arrays)).collect();
    let d = HlsDesign { kernel_name: format!("k{seed}"), loops, arrays, source_path: None };
    d.validate().expect("generator builds valid designs");
    d
}

fn random_values(space: &DesignSpace, rng: &mut ChaCha8Rng) -> Vec<u64> {
    space.dimensions().iter().map(|_| rng.random_range(0..200)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn design_json_round_trip(seed in any::<u64>()) {
        let d = random_design(seed);
        prop_assert_eq!(HlsDesign::from_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn repair_lands_in_space_and_is_idempotent(seed in any::<u64>()) {
        let d = random_design(seed);
        let s = prune(&DesignSpace::build(&d), &d, &PruneRuleSet::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let cfg = s.config_from_values(&random_values(&s, &mut rng));
        let fixed = s.repair(&cfg);
        prop_assert!(s.contains(&fixed));
        prop_assert_eq!(s.repair(&fixed), fixed.clone());
        for (name, l) in fixed.loop_entries() {
            let trip = d.find_loop(name).unwrap().trip_count;
            prop_assert!(l.unroll == 0 || trip.is_multiple_of(l.unroll));
        }
        for (name, a) in fixed.array_entries() {
            let dims = &d.array(name).unwrap().dims;
            prop_assert!(a.factor == 0 || dims.iter().all(|x| x % a.factor == 0));
        }
    }

    #[test]
    fn pruning_only_shrinks(seed in any::<u64>(), threshold in 1u64..200, cap in 1u64..200) {
        let d = random_design(seed);
        let full = DesignSpace::build(&d);
        let rules = PruneRuleSet { large_trip_threshold: threshold, max_unroll_cap: cap, ..Default::default() };
        let p = prune(&full, &d, &rules).unwrap();
        prop_assert!(p.cardinality() <= full.cardinality());
        for (a, b) in full.loops.iter().zip(&p.loops) {
            prop_assert!(b.pipeline.iter().all(|v| a.pipeline.contains(v)));
            prop_assert!(b.unroll.iter().all(|v| a.unroll.contains(v)));
            prop_assert!(!b.pipeline.is_empty() && b.unroll.contains(&0));
        }
        prop_assert_eq!(&full.arrays, &p.arrays);
    }

    #[test]
    fn lhs_hits_every_stratum(n in 2usize..80, d in 1usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = lhs_unit(n, d, &mut rng);
        prop_assert_eq!(pts.len(), n);
        for j in 0..d {
            let mut strata: Vec<usize> = pts.iter().map(|p| ((p[j] * n as f64).ceil() as usize).clamp(1, n) - 1).collect();
            strata.sort_unstable();
            prop_assert_eq!(strata, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn adrs_never_grows_when_points_are_added(
        r in prop::collection::vec((1.0f64..1e5, 0.01f64..1.0), 1..12),
        e in prop::collection::vec((1.0f64..1e5, 0.01f64..1.0), 1..12),
        x in prop::collection::vec((1.0f64..1e5, 0.01f64..1.0), 1..12),
    ) {
        let to = |v: &[(f64, f64)]| v.iter().map(|&(l, u)| Objectives::new(l, u)).collect::<Vec<_>>();
        let (r, e) = (to(&r), to(&e));
        let mut aug = e.clone();
        aug.extend(to(&x));
        prop_assert!(adrs(&aug, &r).unwrap() <= adrs(&e, &r).unwrap());
        prop_assert_eq!(adrs(&r, &r).unwrap(), 0.0);
    }

    #[test]
    fn crowding_ignores_affine_rescaling(
        pts in prop::collection::vec((0.0f64..1e4, 0.0f64..1.0), 1..30),
        scale in (0.1f64..100.0, 0.1f64..100.0),
        shift in (-1e3f64..1e3, -10.0f64..10.0),
    ) {
        let a: Vec<Objectives> = pts.iter().map(|&(l, u)| Objectives::new(l, u)).collect();
        let b: Vec<Objectives> =
            pts.iter().map(|&(l, u)| Objectives::new(l * scale.0 + shift.0, u * scale.1 + shift.1)).collect();
        let (da, db) = (crowding_distance(&a), crowding_distance(&b));
        for (x, y) in da.iter().zip(&db) {
            prop_assert!((x.is_infinite() && y.is_infinite()) || (x - y).abs() < 1e-6, "{} vs {}", x, y);
        }
    }

    #[test]
    fn samplers_are_deterministic(seed in any::<u64>(), kind in 0usize..4) {
        let d = fixtures::gemm();
        let s = prune(&DesignSpace::build(&d), &d, &PruneRuleSet::default()).unwrap();
        let kind = [SamplerKind::Random, SamplerKind::Beta, SamplerKind::Lhs, SamplerKind::WarmStart][kind];
        let spec = SamplerSpec::new(kind, 12, seed);
        let a = sample(&s, &d, &spec, Some(&RuleAdvisor)).unwrap();
        let b = sample(&s, &d, &spec, Some(&RuleAdvisor)).unwrap();
        prop_assert_eq!(&a.configs, &b.configs);
        prop_assert!(a.configs.iter().all(|c| s.contains(c)));
    }
}

#[test]
fn explore_is_deterministic() {
    let d = fixtures::mac2d();
    let s = prune(&DesignSpace::build(&d), &d, &PruneRuleSet::default()).unwrap();
    for seed in [0, 3, 99] {
        let params = SearchParams { seed, ..Default::default() };
        let a = explore(&d, &s, &MockBackend::default(), &RuleAdvisor, &params).unwrap();
        let b = explore(&d, &s, &MockBackend::default(), &RuleAdvisor, &params).unwrap();
        assert_eq!(a.front, b.front);
        assert_eq!(a.trajectory.configs(), b.trajectory.configs());
        let unique: std::collections::HashSet<&DirectiveConfig> = a.trajectory.configs().iter().collect();
        assert_eq!(unique.len(), a.trajectory.len());
    }
}
