//! Batch commands behind the `cmclab` binary.
//!
//! Exit codes: 0 all checks passed, 1 some check failed, 2 invalid input
//! (schema violation, hash mismatch, size guard, non-node time), 3 I/O.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diagnostics::{
    cmc_conditional_test, residual_k, residual_l, residual_m, residual_n, CmcReport, FactorBucket,
    MartingaleTestReport, NodePair, TestFunctionDictionary,
};
use crate::error::{Error, Result};
use crate::export::{ensemble_csvs, read_ensemble, read_manifest, OutputSet, RunInfo, RunManifest, Versions};
use crate::kolmogorov::{kolmogorov_residual, route_agreement, TransitionField, MAGNUS_GUARD};
use crate::linalg::to_rows;
use crate::oracle::{verify_all, DiscreteScenario};
use crate::process::FactorPath;
use crate::scenario::Scenario;
use crate::simulate::{build_weighted_ensemble, sample_factor, FactorDriver, WeightedEnsemble};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CMC_THREADS";

/// Tolerance for the field invariants reported by `field`.
const FIELD_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "cmclab", version, about = "Conditional Markov chain simulation and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a weighted ensemble and write it as CSV plus a manifest.
    Simulate(SimulateArgs),
    /// Transition matrix P(s,t) on one factor path by three routes.
    Field(FieldArgs),
    /// Martingale and conditional-Markov tests on an ensemble.
    Diagnose(DiagnoseArgs),
    /// Exact checks on a discrete scenario.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Seed of the factor path (ignored with --factor).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file with a fixed factor path instead of a sampled one.
    #[arg(long)]
    pub factor: Option<PathBuf>,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Directory written by `simulate`; when absent an ensemble is simulated.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of m,k,l,n,cmc, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Score against the scenario's intensity with off-diagonals scaled.
    #[arg(long)]
    pub override_intensity_scale: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of one command: pass flag and the JSON report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub report: serde_json::Value,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 3,
        Error::Json(e) if e.is_io() => 3,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 3,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate(a) => run_simulate(&a),
        Command::Field(a) => run_field(&a),
        Command::Diagnose(a) => run_diagnose(&a),
        Command::Oracle(a) => run_oracle(&a),
    }
}

struct Clock {
    started: SystemTime,
    timer: Instant,
}

impl Clock {
    fn start() -> Self {
        Self { started: SystemTime::now(), timer: Instant::now() }
    }

    fn info(&self) -> RunInfo {
        RunInfo {
            started_unix_ms: self.started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
            elapsed_ms: self.timer.elapsed().as_millis(),
            threads: rayon::current_num_threads(),
        }
    }
}

fn manifest(command: &str, scenario: &str, hash: String, seed: Option<u64>, n: Option<usize>, summary: serde_json::Value) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        scenario: scenario.to_string(),
        scenario_hash: hash,
        seed,
        n,
        versions: Versions::default(),
        outputs: Vec::new(),
        summary,
    }
}

fn weight_summary(e: &WeightedEnsemble) -> serde_json::Value {
    let s = e.weight_stats();
    json!({
        "weight_mean": s.mean,
        "weight_variance": s.variance,
        "weight_se": s.se,
        "ess": s.ess,
        "zero_weights": s.zero_weights,
        "mean_within_3se": (s.mean - 1.0).abs() <= 3.0 * s.se,
    })
}

pub fn run_simulate(a: &SimulateArgs) -> Result<Outcome> {
    let clock = Clock::start();
    let sc = Scenario::load(&a.scenario)?;
    let e = build_weighted_ensemble(&sc, a.n, a.seed)?;
    let files = ensemble_csvs(&e)?;
    let summary = weight_summary(&e);
    let m = files.commit(&a.out, manifest("simulate", &sc.name, sc.hash(), Some(a.seed), Some(a.n), summary), &clock.info())?;
    Ok(Outcome { pass: true, report: serde_json::to_value(m)? })
}

/// Factor path file accepted by `field --factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorFile {
    /// One row per grid node.
    pub values: Vec<Vec<f64>>,
    #[serde(default)]
    pub jump_times: Vec<f64>,
}

impl FactorFile {
    pub fn into_path(self, dim: usize) -> Result<FactorPath> {
        if self.values.iter().any(|r| r.len() != dim) {
            return Err(Error::Scenario(format!("factor rows must have {dim} entries")));
        }
        FactorPath::new(dim, self.values.into_iter().flatten().collect(), self.jump_times)
    }
}

pub fn run_field(a: &FieldArgs) -> Result<Outcome> {
    let clock = Clock::start();
    let sc = Scenario::load(&a.scenario)?;
    let grid = sc.grid();
    let (si, ti) = (grid.node_index(a.s)?, grid.node_index(a.t)?);
    if si > ti {
        return Err(Error::Scenario(format!("need s <= t, got s = {}, t = {}", a.s, a.t)));
    }
    let factor = match &a.factor {
        Some(p) => {
            let file: FactorFile = serde_json::from_str(&std::fs::read_to_string(p)?)
                .map_err(|e| Error::Scenario(format!("factor file: {e}")))?;
            let f = file.into_path(sc.factor.dim())?;
            if f.nodes() != grid.steps() + 1 {
                return Err(Error::Scenario(format!("factor file has {} nodes, grid has {}", f.nodes(), grid.steps() + 1)));
            }
            f
        }
        None => sample_factor(&sc.factor, &grid, a.seed)?,
    };
    let field = TransitionField::build(&sc.intensity, &factor, &grid)?;
    let routes = route_agreement(&sc.intensity, &factor, &grid, a.s, a.t, MAGNUS_GUARD)?;
    let inv = field.invariants();
    let ck = field.chapman_kolmogorov_error();
    let residual = kolmogorov_residual(&field, &sc.intensity, &factor)?;
    let pass = routes.pass && inv.inverse_error < FIELD_TOL && inv.row_sum_error < FIELD_TOL && ck < FIELD_TOL;
    let report = json!({
        "scenario": sc.name,
        "scenario_hash": sc.hash(),
        "factor": match &a.factor { Some(p) => json!({"file": p.display().to_string()}), None => json!({"seed": a.seed}) },
        "s": grid.node(si),
        "t": grid.node(ti),
        "p": to_rows(&field.p(si, ti)?),
        "routes": routes,
        "invariants": inv,
        "chapman_kolmogorov_error": ck,
        "kolmogorov_residual": residual,
        "pass": pass,
    });
    if let Some(out) = &a.out {
        let mut files = OutputSet::default();
        files.add_json("field.json", &report)?;
        let seed = a.factor.is_none().then_some(a.seed);
        files.commit(out, manifest("field", &sc.name, sc.hash(), seed, None, json!({"pass": pass})), &clock.info())?;
    }
    Ok(Outcome { pass, report })
}

/// Test families selectable with `--suite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteItem {
    M,
    K,
    L,
    N,
    Cmc,
}

pub fn parse_suite(s: &str) -> Result<Vec<SuiteItem>> {
    let mut items = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.to_ascii_lowercase().as_str() {
            "all" => items.extend([SuiteItem::M, SuiteItem::K, SuiteItem::L, SuiteItem::N, SuiteItem::Cmc]),
            "m" => items.push(SuiteItem::M),
            "k" => items.push(SuiteItem::K),
            "l" => items.push(SuiteItem::L),
            "n" => items.push(SuiteItem::N),
            "cmc" => items.push(SuiteItem::Cmc),
            other => return Err(Error::Scenario(format!("unknown suite item {other:?}"))),
        }
    }
    items.sort();
    items.dedup();
    if items.is_empty() {
        return Err(Error::Scenario("empty suite selector".into()));
    }
    Ok(items)
}

/// Default dictionary, node pairs and CMC layout for a scenario.
#[derive(Debug, Clone)]
pub struct DiagnoseConfig {
    pub dictionary: TestFunctionDictionary,
    pub pairs: Vec<NodePair>,
    pub cmc_t: usize,
    pub cmc_t1: usize,
    pub cmc_past: usize,
    pub buckets: FactorBucket,
}

/// Increments tested per residual process.
const DEFAULT_PARTS: usize = 4;

impl DiagnoseConfig {
    pub fn for_scenario(sc: &Scenario) -> Self {
        let grid = sc.grid();
        let k = grid.steps();
        let (threshold, buckets) = match &sc.factor {
            FactorDriver::Brownian { initial_mean, .. } => (*initial_mean, FactorBucket::SignAndMove { component: 0 }),
            FactorDriver::MarkovChain { .. } => (0.5, FactorBucket::All),
            FactorDriver::Constant { value } => (value[0], FactorBucket::All),
        };
        Self {
            dictionary: TestFunctionDictionary::standard(sc.states, 0, threshold),
            pairs: NodePair::consecutive(&grid, DEFAULT_PARTS.min(k)),
            cmc_t: k / 2,
            cmc_t1: k,
            cmc_past: k / 4,
            buckets,
        }
    }
}

/// Reports of one diagnose run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DiagnoseReports {
    pub m: Option<MartingaleTestReport>,
    pub k: Vec<MartingaleTestReport>,
    pub l: Option<MartingaleTestReport>,
    pub n: Option<MartingaleTestReport>,
    pub cmc: Vec<CmcReport>,
}

impl DiagnoseReports {
    pub fn martingale(&self) -> impl Iterator<Item = &MartingaleTestReport> {
        self.m.iter().chain(&self.k).chain(&self.l).chain(&self.n)
    }

    pub fn pass(&self) -> bool {
        self.martingale().all(|r| r.pass) && self.cmc.iter().all(|r| r.pass)
    }
}

/// Runs the selected tests of `suite` on `e`, scoring against `scale * Lambda`.
pub fn diagnose(sc: &Scenario, e: &WeightedEnsemble, suite: &[SuiteItem], scale: f64, cfg: &DiagnoseConfig) -> Result<DiagnoseReports> {
    let model = sc.with_intensity_scale(scale).intensity;
    let d = sc.states;
    let mut out = DiagnoseReports::default();
    for item in suite {
        match item {
            SuiteItem::M => out.m = Some(residual_m(e, &model, &cfg.dictionary, &cfg.pairs)?),
            SuiteItem::K => {
                for x in 0..d {
                    for y in (0..d).filter(|&y| y != x) {
                        out.k.push(residual_k(e, &model, x, y, &cfg.dictionary, &cfg.pairs)?);
                    }
                }
            }
            SuiteItem::L => out.l = Some(residual_l(e, &model, &cfg.dictionary, &cfg.pairs)?),
            SuiteItem::N => out.n = Some(residual_n(e, &model, e.grid.steps(), &cfg.dictionary, &cfg.pairs)?),
            SuiteItem::Cmc => {
                let targets: Vec<usize> = (0..d).collect();
                for past in [None, Some(cfg.cmc_past).filter(|&p| p < cfg.cmc_t)] {
                    out.cmc.push(cmc_conditional_test(e, &model, cfg.cmc_t, cfg.cmc_t1, past, &targets, cfg.buckets)?);
                }
                out.cmc.dedup_by(|a, b| a.past == b.past);
            }
        }
    }
    Ok(out)
}

fn z_table(reports: &DiagnoseReports) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["process", "component", "s", "t", "function", "mean", "se", "z"])?;
    for r in reports.martingale() {
        for rec in &r.records {
            w.write_record([
                r.process.clone(),
                rec.component.clone(),
                rec.s.to_string(),
                rec.t.to_string(),
                rec.function.clone(),
                rec.mean.to_string(),
                rec.se.to_string(),
                rec.z.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn cmc_table(reports: &DiagnoseReports) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "t1", "past", "state", "past_state", "bucket", "target", "paths", "empirical", "field", "diff", "se", "z", "status"])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &reports.cmc {
        for c in &r.cells {
            w.write_record([
                r.t.to_string(),
                r.t1.to_string(),
                opt(r.past.map(|p| p.to_string())),
                c.state.to_string(),
                opt(c.past_state.map(|p| p.to_string())),
                c.bucket.clone(),
                c.target.to_string(),
                c.paths.to_string(),
                c.empirical.to_string(),
                c.field.to_string(),
                c.diff.to_string(),
                c.se.to_string(),
                opt(c.z.map(|z| z.to_string())),
                c.status.clone(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn run_diagnose(a: &DiagnoseArgs) -> Result<Outcome> {
    let clock = Clock::start();
    let suite = parse_suite(&a.suite)?;
    let scale = a.override_intensity_scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Scenario(format!("intensity scale must be finite and >= 0, got {scale}")));
    }
    let sc = Scenario::load(&a.scenario)?;
    let (e, source) = match &a.ensemble {
        Some(dir) => {
            // Identify the input by content, not location, so reports stay byte-stable.
            let e = read_ensemble(dir, &sc)?;
            let files = read_manifest(dir)?.outputs;
            (e, json!({"files": files}))
        }
        None => (build_weighted_ensemble(&sc, a.n, a.seed)?, json!({"simulated": true})),
    };
    let cfg = DiagnoseConfig::for_scenario(&sc);
    let reports = diagnose(&sc, &e, &suite, scale, &cfg)?;
    let pass = reports.pass();
    let report = json!({
        "scenario": sc.name,
        "scenario_hash": sc.hash(),
        "ensemble": {"source": source, "n": e.len(), "seed": e.seed, "weights": e.weight_stats()},
        "intensity_scale": scale,
        "suite": suite,
        "dictionary": cfg.dictionary.labels(),
        "pairs": cfg.pairs,
        "reports": reports,
        "pass": pass,
    });
    if let Some(out) = &a.out {
        let mut files = OutputSet::default();
        files.add_json("report.json", &report)?;
        files.add("z_scores.csv", z_table(&reports)?);
        files.add("cmc_cells.csv", cmc_table(&reports)?);
        let summary = json!({
            "pass": pass,
            "intensity_scale": scale,
            "max_abs_z": reports.martingale().map(|r| r.max_abs_z).chain(reports.cmc.iter().map(|r| r.max_abs_z)).fold(0.0, f64::max),
        });
        files.commit(out, manifest("diagnose", &sc.name, sc.hash(), Some(e.seed), Some(e.len()), summary), &clock.info())?;
    }
    Ok(Outcome { pass, report })
}

pub fn run_oracle(a: &OracleArgs) -> Result<Outcome> {
    let clock = Clock::start();
    let text = std::fs::read_to_string(&a.scenario)?;
    let sc = DiscreteScenario::from_json(&text)?;
    let report = verify_all(&sc)?;
    let pass = report.pass;
    let value = serde_json::to_value(&report)?;
    if let Some(out) = &a.out {
        let mut files = OutputSet::default();
        files.add_json("oracle.json", &value)?;
        let hash = crate::export::sha256_hex(&serde_json::to_vec(&sc)?);
        files.commit(out, manifest("oracle", &sc.name, hash, None, None, json!({"pass": pass, "max_discrepancy": report.max_discrepancy()})), &clock.info())?;
    }
    Ok(Outcome { pass, report: value })
}

/// Applies `CMC_THREADS` to the global worker pool.
pub fn configure_threads(value: Option<&str>) -> Result<()> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Scenario(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Scenario(format!("cannot configure worker pool: {e}")))
}

/// Prints the report when no output directory was given.
pub fn print_report(outcome: &Outcome, out: Option<&Path>) -> Result<()> {
    if out.is_none() {
        println!("{}", serde_json::to_string_pretty(&outcome.report)?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_selector() {
        assert_eq!(parse_suite("all").unwrap().len(), 5);
        assert_eq!(parse_suite("cmc, m,m").unwrap(), vec![SuiteItem::M, SuiteItem::Cmc]);
        assert!(parse_suite("").is_err());
        assert!(parse_suite(" , ").is_err());
        assert!(parse_suite("q").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NotANode(0.3)), 2);
        assert_eq!(exit_code(&Error::TooLarge("K".into())), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("disk"))), 3);
    }

    #[test]
    fn thread_variable_is_validated() {
        assert!(configure_threads(None).is_ok());
        assert!(configure_threads(Some("zero")).is_err());
        assert!(configure_threads(Some("0")).is_err());
    }
}
