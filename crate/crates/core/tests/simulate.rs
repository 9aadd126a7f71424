use std::path::PathBuf;

use cmclab::diagnostics::common_jump_scan;
use cmclab::simulate::{build_weighted_ensemble, effective_sample_size};
use cmclab::Scenario;
use proptest::prelude::*;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"));
    Scenario::load(path).unwrap()
}

#[test]
fn weights_average_to_one() {
    for name in ["three_state", "unreachable", "markov_factor"] {
        let s = build_weighted_ensemble(&scenario(name), 20_000, 7).unwrap().weight_stats();
        assert!((s.mean - 1.0).abs() <= 4.0 * s.se, "{name}: mean {} se {}", s.mean, s.se);
    }
}

#[test]
fn effective_sample_size_is_usable() {
    for name in ["two_state", "three_state", "unreachable", "markov_factor", "reference_intensity", "constant_symmetric"] {
        let e = build_weighted_ensemble(&scenario(name), 5_000, 3).unwrap();
        let ratio = e.ess() / e.len() as f64;
        assert!(ratio > 0.1, "{name}: ESS/n = {ratio}");
    }
}

#[test]
fn reference_model_has_unit_weights() {
    let e = build_weighted_ensemble(&scenario("reference_intensity"), 2_000, 5).unwrap();
    assert!(e.paths.iter().all(|p| p.weight == 1.0 && p.node_weights.iter().all(|&w| w == 1.0)));
}

#[test]
fn zero_intensity_keeps_only_paths_without_jumps() {
    let e = build_weighted_ensemble(&scenario("zero_intensity"), 2_000, 5).unwrap();
    for p in &e.paths {
        assert_eq!(p.weight > 0.0, p.chain.jumps().is_empty());
    }
}

#[test]
fn regime_factor_never_jumps_with_the_chain() {
    let e = build_weighted_ensemble(&scenario("markov_factor"), 5_000, 13).unwrap();
    assert!(e.paths.iter().any(|p| !p.factor.jump_times().is_empty()));
    assert_eq!(common_jump_scan(&e), 0);
}

#[test]
fn ensemble_does_not_depend_on_worker_count() {
    let sc = scenario("three_state");
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| build_weighted_ensemble(&sc, 3_000, 21).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn seeds_give_different_ensembles() {
    let sc = scenario("two_state");
    let a = build_weighted_ensemble(&sc, 200, 1).unwrap();
    let b = build_weighted_ensemble(&sc, 200, 2).unwrap();
    assert_ne!(a.weights(), b.weights());
}

#[test]
fn ess_bounds() {
    assert_eq!(effective_sample_size(&[1.0; 10]), 10.0);
    assert_eq!(effective_sample_size(&[0.0, 0.0, 4.0]), 1.0);
    assert_eq!(effective_sample_size(&[]), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weights_are_finite_and_nonnegative(seed in any::<u64>(), which in 0usize..4) {
        let name = ["two_state", "three_state", "unreachable", "markov_factor"][which];
        let e = build_weighted_ensemble(&scenario(name), 50, seed).unwrap();
        for p in &e.paths {
            prop_assert!(p.weight.is_finite() && p.weight >= 0.0);
            prop_assert_eq!(p.node_weights.len(), e.grid.steps() + 1);
            prop_assert_eq!(p.node_weights[0], 1.0);
            prop_assert_eq!(*p.node_weights.last().unwrap(), p.weight);
        }
    }
}
