//! File output: atomic writes, ensemble CSVs and run manifests.
//!
//! Ensemble directory layout (states are 1-based in every file):
//!
//! - `events.csv`: `path,kind,time,from,to`; `kind` is `initial` (time 0,
//!   empty `from`), `jump`, or `factor_jump` (empty `from`/`to`).
//! - `factor.csv`: `path,node,time,f0,..,f{m-1}`.
//! - `weights.csv`: `path,weight`.
//! - `manifest.json`: [`RunManifest`], written last.
//! - `run_info.json`: wall-clock and thread count; not covered by the
//!   determinism guarantee.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::process::{ChainPath, FactorPath, Jump};
use crate::scenario::Scenario;
use crate::simulate::{radon_nikodym_weight, WeightedEnsemble, WeightedPath};

pub const EVENTS_FILE: &str = "events.csv";
pub const FACTOR_FILE: &str = "factor.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUN_INFO_FILE: &str = "run_info.json";

/// Version tag of the file formats above.
pub const FORMAT_VERSION: u32 = 1;

/// Relative tolerance when a reloaded weight is recomputed.
const WEIGHT_RELOAD_TOL: f64 = 1e-12;

/// Writes to a temporary sibling and renames it into place, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Scenario(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub cmclab: String,
    pub format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self { cmclab: env!("CARGO_PKG_VERSION").to_string(), format: FORMAT_VERSION }
    }
}

/// Reproducibility record of one command. Identical inputs give an
/// identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub versions: Versions,
    pub outputs: Vec<OutputFile>,
    /// Command-specific headline numbers (weight statistics, pass flags).
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
    pub threads: usize,
}

/// Output files assembled in memory and written together.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    fn entries(&self) -> Vec<OutputFile> {
        self.files
            .iter()
            .map(|(file, b)| OutputFile { file: file.clone(), sha256: sha256_hex(b), bytes: b.len() as u64 })
            .collect()
    }

    /// Writes every file, then the manifest (listing their hashes), then the
    /// run-info sidecar.
    pub fn commit(self, dir: &Path, mut manifest: RunManifest, info: &RunInfo) -> Result<RunManifest> {
        std::fs::create_dir_all(dir)?;
        manifest.outputs = self.entries();
        for (name, bytes) in &self.files {
            write_atomic(&dir.join(name), bytes)?;
        }
        let mut m = serde_json::to_vec_pretty(&manifest)?;
        m.push(b'\n');
        write_atomic(&dir.join(MANIFEST_FILE), &m)?;
        write_atomic(&dir.join(RUN_INFO_FILE), &serde_json::to_vec_pretty(info)?)?;
        Ok(manifest)
    }
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `events.csv`, `factor.csv` and `weights.csv` for an ensemble.
pub fn ensemble_csvs(e: &WeightedEnsemble) -> Result<OutputSet> {
    let mut out = OutputSet::default();
    let head = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let events = e.paths.iter().enumerate().flat_map(|(i, p)| {
        let mut rows = vec![vec![i.to_string(), "initial".into(), "0".into(), String::new(), (p.chain.initial() + 1).to_string()]];
        let mut chain = p.chain.jumps().iter().peekable();
        let mut factor = p.factor.jump_times().iter().peekable();
        // merge by time; chain first on ties so that coincidences stay visible
        loop {
            let next_chain = chain.peek().map(|j| j.time);
            let next_factor = factor.peek().copied().copied();
            match (next_chain, next_factor) {
                (Some(a), Some(b)) if b < a => {
                    factor.next();
                    rows.push(vec![i.to_string(), "factor_jump".into(), b.to_string(), String::new(), String::new()]);
                }
                (Some(_), _) => {
                    let j = chain.next().expect("peeked");
                    rows.push(vec![i.to_string(), "jump".into(), j.time.to_string(), (j.from + 1).to_string(), (j.to + 1).to_string()]);
                }
                (None, Some(b)) => {
                    factor.next();
                    rows.push(vec![i.to_string(), "factor_jump".into(), b.to_string(), String::new(), String::new()]);
                }
                (None, None) => break,
            }
        }
        rows
    });
    out.add(EVENTS_FILE, csv_bytes(&head(&["path", "kind", "time", "from", "to"]), events)?);

    let m = e.paths.first().map_or(0, |p| p.factor.dim());
    let mut fh = head(&["path", "node", "time"]);
    fh.extend((0..m).map(|c| format!("f{c}")));
    let grid = e.grid;
    let factor = e.paths.iter().enumerate().flat_map(|(i, p)| {
        (0..p.factor.nodes()).map(move |k| {
            let mut r = vec![i.to_string(), k.to_string(), grid.node(k).to_string()];
            r.extend(p.factor.at(k).iter().map(f64::to_string));
            r
        })
    });
    out.add(FACTOR_FILE, csv_bytes(&fh, factor)?);

    let weights = e.paths.iter().enumerate().map(|(i, p)| vec![i.to_string(), p.weight.to_string()]);
    out.add(WEIGHTS_FILE, csv_bytes(&head(&["path", "weight"]), weights)?);
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    serde_json::from_str(&text).map_err(|e| Error::Scenario(format!("{MANIFEST_FILE}: {e}")))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, file: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Scenario(format!("{file}: bad value in column {i} of {rec:?}")))
}

/// Reloads an ensemble written by `simulate`, after checking that the
/// manifest and every listed file match `scenario`. Weights are recomputed
/// from the paths and compared with the stored ones.
pub fn read_ensemble(dir: &Path, scenario: &Scenario) -> Result<WeightedEnsemble> {
    let manifest = read_manifest(dir)?;
    if manifest.scenario_hash != scenario.hash() {
        return Err(Error::Mismatch(format!(
            "ensemble was built from scenario {} but {} was given",
            manifest.scenario_hash,
            scenario.hash()
        )));
    }
    for f in &manifest.outputs {
        let bytes = std::fs::read(dir.join(&f.file))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(Error::Mismatch(format!("{} does not match its manifest hash", f.file)));
        }
    }
    let n = manifest.n.ok_or_else(|| Error::Mismatch("manifest has no path count".into()))?;
    let seed = manifest.seed.unwrap_or_default();
    let grid = scenario.grid();
    let d = scenario.states;
    let m = scenario.factor.dim();

    let mut values = vec![Vec::with_capacity((grid.steps() + 1) * m); n];
    let mut r = csv::Reader::from_path(dir.join(FACTOR_FILE))?;
    for rec in r.records() {
        let rec = rec?;
        let i: usize = field(&rec, 0, FACTOR_FILE)?;
        let row = values.get_mut(i).ok_or_else(|| Error::Mismatch(format!("path {i} beyond n = {n}")))?;
        for c in 0..m {
            row.push(field(&rec, 3 + c, FACTOR_FILE)?);
        }
    }

    let mut initial = vec![None; n];
    let mut jumps: Vec<Vec<Jump>> = vec![Vec::new(); n];
    let mut factor_jumps: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut r = csv::Reader::from_path(dir.join(EVENTS_FILE))?;
    for rec in r.records() {
        let rec = rec?;
        let i: usize = field(&rec, 0, EVENTS_FILE)?;
        if i >= n {
            return Err(Error::Mismatch(format!("path {i} beyond n = {n}")));
        }
        let time: f64 = field(&rec, 2, EVENTS_FILE)?;
        let state = |col: usize| -> Result<usize> {
            let s: usize = field(&rec, col, EVENTS_FILE)?;
            if s == 0 || s > d {
                return Err(Error::StateOutOfRange { state: s, states: d });
            }
            Ok(s - 1)
        };
        match rec.get(1) {
            Some("initial") => initial[i] = Some(state(4)?),
            Some("jump") => jumps[i].push(Jump { time, from: state(3)?, to: state(4)? }),
            Some("factor_jump") => factor_jumps[i].push(time),
            other => return Err(Error::Scenario(format!("{EVENTS_FILE}: unknown event kind {other:?}"))),
        }
    }

    let mut stored = vec![f64::NAN; n];
    let mut r = csv::Reader::from_path(dir.join(WEIGHTS_FILE))?;
    for rec in r.records() {
        let rec = rec?;
        let i: usize = field(&rec, 0, WEIGHTS_FILE)?;
        *stored.get_mut(i).ok_or_else(|| Error::Mismatch(format!("path {i} beyond n = {n}")))? =
            field(&rec, 1, WEIGHTS_FILE)?;
    }

    let mut paths = Vec::with_capacity(n);
    for (i, ((vals, x0), (js, fj))) in values.into_iter().zip(initial).zip(jumps.into_iter().zip(factor_jumps)).enumerate() {
        let x0 = x0.ok_or_else(|| Error::Mismatch(format!("path {i} has no initial state")))?;
        if vals.len() != (grid.steps() + 1) * m {
            return Err(Error::Mismatch(format!("path {i} has an incomplete factor record")));
        }
        let factor = FactorPath::new(m, vals, fj)?;
        let chain = ChainPath::new(x0, js)?;
        let w = radon_nikodym_weight(&chain, &factor, &scenario.intensity, &scenario.reference_rates, &grid)?;
        if !((w.terminal - stored[i]).abs() <= WEIGHT_RELOAD_TOL * w.terminal.abs().max(1.0)) {
            return Err(Error::Mismatch(format!("path {i}: stored weight {} but recomputed {}", stored[i], w.terminal)));
        }
        paths.push(WeightedPath { factor, chain, weight: w.terminal, node_weights: w.nodes });
    }
    Ok(WeightedEnsemble { scenario_hash: scenario.hash(), seed, states: d, grid, paths })
}
