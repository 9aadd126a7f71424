//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so that the summary is always printed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cmclab::cli::{diagnose, parse_suite, DiagnoseConfig};
use cmclab::diagnostics::{cmc_conditional_test, equivalence_check, FactorBucket, Z_THRESHOLD};
use cmclab::kolmogorov::{magnus2_adaptive, peano_baker_from, TransitionField, MAGNUS_BLOCK_TOL, MAGNUS_GUARD, PEANO_BAKER_MAX_ORDER, PEANO_BAKER_TOL};
use cmclab::linalg::{from_rows, Matrix};
use cmclab::oracle::{convergence_study, verify_all, DiscreteScenario, ORACLE_TOL};
use cmclab::process::{FactorPath, IntensitySpec, RateMatrix, TimeGrid};
use cmclab::simulate::{build_direct_ensemble, build_weighted_ensemble, sample_factor};
use cmclab::Scenario;

/// Base seed for every Monte Carlo criterion, fixed before any run.
const SEED: u64 = 2026;
const N: usize = 100_000;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> Scenario {
    Scenario::load(root().join("scenarios").join(format!("{name}.json"))).expect("shipped scenario")
}

fn discrete(name: &str) -> DiscreteScenario {
    DiscreteScenario::load(root().join("scenarios/discrete").join(name)).expect("shipped discrete scenario")
}

const SHIPPED: [&str; 7] = [
    "two_state",
    "three_state",
    "unreachable",
    "markov_factor",
    "reference_intensity",
    "constant_symmetric",
    "zero_intensity",
];

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

/// 1. Weight normalization on a bounded-intensity scenario.
fn weight_normalization() -> Outcome {
    let e = build_weighted_ensemble(&scenario("two_state"), N, SEED).unwrap();
    let s = e.weight_stats();
    let gap = (s.mean - 1.0).abs();
    Outcome {
        pass: gap <= 3.0 * s.se,
        detail: format!("mean {:.5}, |mean-1| = {:.2e}, 3 SE = {:.2e}", s.mean, gap, 3.0 * s.se),
    }
}

/// 2. Weighted and direct samplers agree on the terminal marginal, d = 3.
fn two_samplers() -> Outcome {
    let sc = scenario("three_state");
    let horizon = sc.horizon;
    let weighted = build_weighted_ensemble(&sc, N, SEED).unwrap();
    let direct = build_direct_ensemble(&sc, N, SEED + 1).unwrap();
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for y in 0..sc.states {
        let wv: Vec<f64> = weighted
            .paths
            .iter()
            .map(|p| if p.chain.state_at(horizon) == y { p.weight } else { 0.0 })
            .collect();
        let (mw, vw) = mean_var(&wv);
        let dv: Vec<f64> = direct.paths.iter().map(|(_, c)| f64::from(u8::from(c.state_at(horizon) == y))).collect();
        let (md, vd) = mean_var(&dv);
        let se = (vw / N as f64 + vd / N as f64).sqrt();
        let z = (mw - md) / se;
        worst = worst.max(z.abs());
        parts.push(format!("x{}: {mw:.4} vs {md:.4}", y + 1));
    }
    Outcome { pass: worst < 3.0, detail: format!("{}; max |diff|/SE = {worst:.2}", parts.join(", ")) }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// 3. Closed-form two-state transition probability by all three routes.
fn closed_form() -> Outcome {
    let g = from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]);
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let model = IntensitySpec::Constant { rates: RateMatrix::new(g.clone()).unwrap() };
    let factor = FactorPath::constant(&[0.0], 5);
    let field = TransitionField::build(&model, &factor, &grid).unwrap();
    let want = (1.0 + (-2.0_f64).exp()) / 2.0;
    let p = field.p(0, 4).unwrap()[(0, 0)];
    let pieces = vec![g; 4];
    let pb = peano_baker_from(&pieces, grid.dt(), PEANO_BAKER_TOL, PEANO_BAKER_MAX_ORDER).unwrap().matrix[(0, 0)];
    let mg = magnus2_adaptive(&pieces, grid.dt(), MAGNUS_GUARD, MAGNUS_BLOCK_TOL).matrix[(0, 0)];
    let (e1, e2, e3) = ((p - want).abs(), (pb - want).abs(), (mg - want).abs());
    Outcome {
        pass: e1 < 1e-9 && e2 < 1e-6 && e3 < 1e-6,
        detail: format!("p11 = {p:.9} (exact {want:.9}); errors exp {e1:.1e}, Peano-Baker {e2:.1e}, Magnus-2 {e3:.1e}"),
    }
}

/// 4. Inverse identity and stochasticity on every shipped scenario.
fn inverse_and_stochastic() -> Outcome {
    let (mut inv, mut rows) = (0.0_f64, 0.0_f64);
    for name in SHIPPED {
        let sc = scenario(name);
        let grid = sc.grid();
        for draw in 0..10 {
            let f = sample_factor(&sc.factor, &grid, SEED + draw).unwrap();
            let i = TransitionField::build(&sc.intensity, &f, &grid).unwrap().invariants();
            inv = inv.max(i.inverse_error);
            rows = rows.max(i.row_sum_error);
        }
    }
    Outcome {
        pass: inv < 1e-9 && rows < 1e-9,
        detail: format!("{} scenarios x 10 factor draws: max |ZY - I| = {inv:.1e}, max |row sum - 1| = {rows:.1e}", SHIPPED.len()),
    }
}

/// 5. All four residual families pass under the model and fail under 2 Lambda.
fn martingale_suite() -> Outcome {
    let sc = scenario("two_state");
    let e = build_weighted_ensemble(&sc, N, SEED).unwrap();
    let cfg = DiagnoseConfig::for_scenario(&sc);
    let suite = parse_suite("m,k,l,n").unwrap();
    let family = |r: &cmclab::cli::DiagnoseReports| {
        let k = r.k.iter().map(|x| x.max_abs_z).fold(0.0, f64::max);
        [r.m.as_ref().unwrap().max_abs_z, k, r.l.as_ref().unwrap().max_abs_z, r.n.as_ref().unwrap().max_abs_z]
    };
    let good = family(&diagnose(&sc, &e, &suite, 1.0, &cfg).unwrap());
    let bad = family(&diagnose(&sc, &e, &suite, 2.0, &cfg).unwrap());
    let fmt = |z: [f64; 4]| format!("M {:.2}, K {:.2}, L {:.2}, N {:.2}", z[0], z[1], z[2], z[3]);
    Outcome {
        pass: good.iter().all(|&z| z < Z_THRESHOLD) && bad.iter().all(|&z| z > 10.0),
        detail: format!("max |z| under model: {}; under 2x: {}", fmt(good), fmt(bad)),
    }
}

/// 6. Conditional Markov property on the factor-dependent scenario.
fn cmc_property() -> Outcome {
    let sc = scenario("three_state");
    let e = build_weighted_ensemble(&sc, N, SEED).unwrap();
    let k = sc.grid().steps();
    let targets: Vec<usize> = (0..sc.states).collect();
    let buckets = FactorBucket::SignAndMove { component: 0 };
    let plain = cmc_conditional_test(&e, &sc.intensity, k / 2, k, None, &targets, buckets).unwrap();
    let past = cmc_conditional_test(&e, &sc.intensity, k / 2, k, Some(k / 4), &targets, buckets).unwrap();
    let scored = |r: &cmclab::diagnostics::CmcReport| r.cells.iter().filter(|c| c.z.is_some()).count();
    Outcome {
        pass: plain.pass && past.pass,
        detail: format!(
            "max |z| {:.2} ({} cells), with extra past {:.2} ({} cells)",
            plain.max_abs_z,
            scored(&plain),
            past.max_abs_z,
            scored(&past)
        ),
    }
}

/// 7. Exact oracle on the shipped discrete scenarios and planted violations.
fn exact_oracle() -> Outcome {
    let mut worst = 0.0_f64;
    for name in ["cumulative_bits.json", "last_bit.json"] {
        let r = verify_all(&discrete(name)).unwrap();
        worst = worst.max(r.max_discrepancy());
        if !r.pass {
            return Outcome { pass: false, detail: format!("{name} failed: {:?}", r.checks) };
        }
    }
    let memory = verify_all(&discrete("planted/chain_memory.json")).unwrap();
    let future = verify_all(&discrete("planted/future_bit_initial_law.json")).unwrap();
    let ci = future.check("conditional_independence").unwrap().discrepancy;
    let mem = memory.max_discrepancy();
    Outcome {
        pass: worst < ORACLE_TOL && mem > 1e-3 && ci > 1e-3,
        detail: format!("shipped max discrepancy {worst:.1e}; planted chain memory {mem:.3}, future-bit initial law (conditional independence) {ci:.3}"),
    }
}

/// 8. Discrete marginal converges to the matrix exponential at first order.
fn discrete_to_continuous() -> Outcome {
    let rates = from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]);
    let study = convergence_study(&rates, 0.2, &[2, 4, 8], 0, 0).unwrap();
    let errs: Vec<String> = study.points.iter().map(|p| format!("{:.3e}", p.error)).collect();
    Outcome {
        pass: (study.slope - 1.0).abs() <= 0.3,
        detail: format!("errors at dt = 0.1, 0.05, 0.025: {}; slope {:.3}", errs.join(", "), study.slope),
    }
}

/// 9. A row change on an unreachable state is invisible along the chain.
fn equivalence() -> Outcome {
    let sc = scenario("unreachable");
    let e = build_weighted_ensemble(&sc, 10_000, SEED).unwrap();
    let alt = match &sc.intensity {
        IntensitySpec::Threshold { component, threshold, below, above } => {
            let swap_row = |m: &RateMatrix| {
                let mut m: Matrix = m.matrix().clone();
                m[(2, 0)] = 3.0;
                m[(2, 1)] = 0.25;
                m[(2, 2)] = -3.25;
                RateMatrix::new(m).unwrap()
            };
            IntensitySpec::Threshold { component: *component, threshold: *threshold, below: swap_row(below), above: swap_row(above) }
        }
        other => panic!("unexpected intensity {other:?}"),
    };
    let cfg = DiagnoseConfig::for_scenario(&sc);
    let r = equivalence_check(&sc.intensity, &alt, &e, &cfg.dictionary, &cfg.pairs).unwrap();
    let m = r.residual_m.as_ref();
    Outcome {
        pass: r.max_abs_integral == 0.0 && r.max_abs_integral_all_paths > 0.0 && m.is_some_and(|m| m.pass),
        detail: format!(
            "integral over {} positive-weight paths = {:.1e} (all Q-paths {:.2}); residual M under the alternative max |z| {:.2}",
            r.positive_weight_paths,
            r.max_abs_integral,
            r.max_abs_integral_all_paths,
            m.map_or(f64::NAN, |m| m.max_abs_z)
        ),
    }
}

fn cmclab(args: &[&str], threads: &str) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_cmclab"))
        .args(args)
        .env("CMC_THREADS", threads)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("run cmclab");
    status.code().unwrap_or(-1)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().is_some_and(|n| n != "run_info.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

/// 10. Every CLI command is byte-for-byte reproducible, across worker counts.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let s = |p: &str| root().join(p).to_string_lossy().into_owned();
    let two = s("scenarios/two_state.json");
    let oracle = s("scenarios/discrete/cumulative_bits.json");
    let mut compared = 0;
    for run in 0..2 {
        let threads = if run == 0 { "1" } else { "3" };
        let out = |name: &str| tmp.path().join(format!("{name}{run}")).to_string_lossy().into_owned();
        let ens = out("ens");
        let codes = [
            cmclab(&["simulate", "--scenario", &two, "--n", "5000", "--seed", "9", "--out", &ens], threads),
            cmclab(&["field", "--scenario", &two, "--seed", "9", "--s", "0.2", "--t", "1", "--out", &out("field")], threads),
            cmclab(&["diagnose", "--scenario", &two, "--ensemble", &ens, "--suite", "all", "--out", &out("diag")], threads),
            cmclab(&["diagnose", "--scenario", &two, "--n", "2000", "--seed", "9", "--suite", "m,cmc", "--out", &out("diag_sim")], threads),
            cmclab(&["oracle", "--scenario", &oracle, "--out", &out("oracle")], threads),
        ];
        if codes.iter().any(|&c| c != 0) {
            return Outcome { pass: false, detail: format!("unexpected exit codes {codes:?}") };
        }
    }
    for name in ["ens", "field", "diag", "diag_sim", "oracle"] {
        let a = snapshot(&tmp.path().join(format!("{name}0")));
        let b = snapshot(&tmp.path().join(format!("{name}1")));
        if a != b || a.is_empty() {
            return Outcome { pass: false, detail: format!("outputs of {name} differ between runs") };
        }
        compared += a.len();
    }
    Outcome { pass: true, detail: format!("5 commands x 2 runs (1 and 3 workers): {compared} files byte-identical") }
}

fn main() {
    let criteria: [(&str, Check, u64); 10] = [
        ("1 weight normalization", weight_normalization, 30),
        ("2 two-sampler agreement", two_samplers, 60),
        ("3 closed-form transition probabilities", closed_form, 1),
        ("4 inverse identity and stochasticity", inverse_and_stochastic, 5),
        ("5 martingale suite", martingale_suite, 120),
        ("6 conditional Markov property", cmc_property, 60),
        ("7 exact oracle", exact_oracle, 10),
        ("8 discrete-to-continuous convergence", discrete_to_continuous, 10),
        ("9 equivalence relative to the chain", equivalence, 20),
        ("10 determinism", determinism, 60),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(budget);
        let pass = outcome.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "[{}] {name}: {} ({:.2}s / {budget}s budget{})",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
