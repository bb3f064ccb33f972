mod common;

use common::*;
use currents_core::chain::SegmentTuple;
use currents_core::energy::{EnergyConfig, EnergyContext, EnergyWeights};
use currents_core::optimizer::{descend, region_flatnorm_penalty, region_regularity_cost, DescentParams};
use currents_core::scenes::{generate, SceneSpec};
use proptest::prelude::*;

fn tuple() -> impl Strategy<Value = SegmentTuple> {
    (0.0f64..1.0, 0.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, a, b)| SegmentTuple { x, y, a, b })
}

fn noisy_scene(seed: u64) -> currents_core::field::ScalarField {
    let spec = SceneSpec {
        n: 2,
        res: 32,
        edge_px: 1.0,
        impulse: 0.02,
        seed,
        oracle: false,
        ..SceneSpec::new("disc_pack")
    };
    generate(&spec).unwrap().image
}

fn small_run(seed: u64) -> DescentParams {
    DescentParams {
        max_iters: 2,
        region_size: 6,
        seed,
        ..DescentParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn penalty_never_exceeds_cost(ts in prop::collection::vec(tuple(), 0..20)) {
        let (p, c) = (region_flatnorm_penalty(&ts), region_regularity_cost(&ts));
        prop_assert!(p <= c + 1e-12 * (1.0 + c));
    }

    #[test]
    fn penalty_equals_cost_for_parallel_tuples(
        dir in (-1.0f64..1.0, -1.0f64..1.0).prop_filter("nonzero", |d| d.0.hypot(d.1) > 1e-3),
        ks in prop::collection::vec(0.01f64..3.0, 1..10),
    ) {
        let ts: Vec<_> = ks.iter().map(|k| SegmentTuple { x: *k, y: 0.0, a: k * dir.0, b: k * dir.1 }).collect();
        let (p, c) = (region_flatnorm_penalty(&ts), region_regularity_cost(&ts));
        prop_assert!((p - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn penalty_is_strictly_below_cost_otherwise(
        a in tuple().prop_filter("nonzero", |t| t.mass() > 1e-2),
        b in tuple().prop_filter("nonzero", |t| t.mass() > 1e-2),
    ) {
        let cos = (a.a * b.a + a.b * b.b) / (a.mass() * b.mass());
        prop_assume!(cos < 1.0 - 1e-6);
        let ts = [a, b];
        prop_assert!(region_flatnorm_penalty(&ts) < region_regularity_cost(&ts));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn descent_is_deterministic_for_a_seed(scene_seed in 0u64..100, seed in 0u64..100) {
        let g = noisy_scene(scene_seed);
        let w = EnergyWeights::from_array([1.0, 1.0, 1.0, 1.0, 1e-3, 1.0, 1.0]);
        let c = EnergyConfig::default();
        let a = descend(&g, &g, &w, &c, &small_run(seed)).unwrap();
        let b = descend(&g, &g, &w, &c, &small_run(seed)).unwrap();
        prop_assert_eq!(a.field.values(), b.field.values());
        prop_assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn accepted_energies_strictly_decrease(scene_seed in 0u64..100, seed in 0u64..100) {
        let g = noisy_scene(scene_seed);
        let w = EnergyWeights::from_array([1.0, 1.0, 1.0, 1.0, 1e-3, 1.0, 1.0]);
        let c = EnergyConfig::default();
        let out = descend(&g, &g, &w, &c, &small_run(seed)).unwrap();
        prop_assert!(out.trace.is_strictly_decreasing(), "{:?}", out.trace.accepted_energies());
        let ctx = EnergyContext::with_extracted_jumps(g.clone(), w, c).unwrap();
        let exact = ctx.total(&out.field, &out.jumps).unwrap();
        prop_assert!((exact - out.energy.total).abs() <= 1e-9 * (1.0 + exact));
        prop_assert!(out.energy.total <= out.trace.initial);
    }
}

/// Halving the disc size and the flat-norm scale together leaves the
/// keep-or-remove decision unchanged.
#[test]
fn scale_dial_tracks_feature_size() {
    for sigma in [0.03, 0.07] {
        let small = disc_removal_fraction(4, 128, sigma);
        let large = disc_removal_fraction(2, 128, 2.0 * sigma);
        assert_eq!(small > 0.5, large > 0.5, "sigma {sigma}: removed {small} vs {large}");
    }
}
