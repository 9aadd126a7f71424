use std::path::PathBuf;

use cmclab::cli::DiagnoseConfig;
use cmclab::diagnostics::{
    cmc_conditional_test, equivalence_check, log_log_slope, residual_k, residual_l, residual_m, residual_n, FactorBucket,
    NodePair, TestFunctionDictionary,
};
use cmclab::simulate::build_weighted_ensemble;
use cmclab::Scenario;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"));
    Scenario::load(path).unwrap()
}

#[test]
fn zero_intensity_residuals_are_exactly_zero() {
    let sc = scenario("zero_intensity");
    let e = build_weighted_ensemble(&sc, 2_000, 4).unwrap();
    let cfg = DiagnoseConfig::for_scenario(&sc);
    for r in [
        residual_k(&e, &sc.intensity, 0, 1, &cfg.dictionary, &cfg.pairs).unwrap(),
        residual_m(&e, &sc.intensity, &cfg.dictionary, &cfg.pairs).unwrap(),
    ] {
        assert!(r.records.iter().all(|rec| rec.mean == 0.0 && rec.z == 0.0), "{}", r.process);
        assert!(r.pass);
    }
}

#[test]
fn reference_model_passes_every_family() {
    let sc = scenario("reference_intensity");
    let e = build_weighted_ensemble(&sc, 20_000, 8).unwrap();
    let cfg = DiagnoseConfig::for_scenario(&sc);
    let k = e.grid.steps();
    assert!(residual_m(&e, &sc.intensity, &cfg.dictionary, &cfg.pairs).unwrap().pass);
    assert!(residual_l(&e, &sc.intensity, &cfg.dictionary, &cfg.pairs).unwrap().pass);
    assert!(residual_n(&e, &sc.intensity, k, &cfg.dictionary, &cfg.pairs).unwrap().pass);
    for (x, y) in [(0, 1), (1, 0)] {
        assert!(residual_k(&e, &sc.intensity, x, y, &cfg.dictionary, &cfg.pairs).unwrap().pass);
    }
}

#[test]
fn misspecified_rates_are_rejected() {
    let sc = scenario("two_state");
    let e = build_weighted_ensemble(&sc, 20_000, 8).unwrap();
    let cfg = DiagnoseConfig::for_scenario(&sc);
    let wrong = sc.intensity.clone().scaled(2.0);
    let r = residual_m(&e, &wrong, &cfg.dictionary, &cfg.pairs).unwrap();
    assert!(!r.pass && r.max_abs_z > 10.0);
    assert!(r.bonferroni_p < 1e-10);
}

#[test]
fn doubled_rates_are_not_equivalent() {
    let sc = scenario("two_state");
    let e = build_weighted_ensemble(&sc, 2_000, 8).unwrap();
    let cfg = DiagnoseConfig::for_scenario(&sc);
    let r = equivalence_check(&sc.intensity, &sc.intensity.clone().scaled(2.0), &e, &cfg.dictionary, &cfg.pairs).unwrap();
    assert!(!r.equivalent);
    assert!(r.max_abs_integral > 0.1);
    assert!(r.residual_m.is_none());
}

#[test]
fn bad_node_pairs_are_rejected() {
    let sc = scenario("two_state");
    let e = build_weighted_ensemble(&sc, 100, 8).unwrap();
    let dict = TestFunctionDictionary::states_only(2);
    assert!(residual_m(&e, &sc.intensity, &dict, &[NodePair::new(3, 2)]).is_err());
    assert!(residual_m(&e, &sc.intensity, &dict, &[NodePair::new(0, 99)]).is_err());
    assert!(residual_k(&e, &sc.intensity, 1, 1, &dict, &[NodePair::new(0, 1)]).is_err());
}

#[test]
fn cmc_discrepancy_shrinks_at_root_n() {
    let sc = scenario("two_state");
    let k = sc.grid().steps();
    let sizes = [1_000.0, 10_000.0, 100_000.0];
    let rms: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let e = build_weighted_ensemble(&sc, n as usize, 31).unwrap();
            let r = cmc_conditional_test(&e, &sc.intensity, k / 2, k, None, &[0, 1], FactorBucket::SignAndMove { component: 0 })
                .unwrap();
            let diffs: Vec<f64> = r.cells.iter().filter(|c| c.z.is_some()).map(|c| c.diff * c.diff).collect();
            (diffs.iter().sum::<f64>() / diffs.len() as f64).sqrt()
        })
        .collect();
    let slope = log_log_slope(&sizes, &rms);
    assert!((slope + 0.5).abs() <= 0.2, "rms {rms:?}, slope {slope}");
}
