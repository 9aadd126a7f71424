use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use super::dictionary::TestFunctionDictionary;
use super::martingale::NodePair;
use crate::error::Result;
use crate::simulate::{WeightedEnsemble, WeightedPath};

/// Rejection threshold on `|z|`: about 1% family-wise error for up to 200
/// simultaneous tests.
pub const Z_THRESHOLD: f64 = 3.9;

const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRecord {
    pub component: String,
    pub s: f64,
    pub t: f64,
    pub function: String,
    pub mean: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTestReport {
    pub process: String,
    pub n_paths: usize,
    pub ess: f64,
    pub n_tests: usize,
    pub threshold: f64,
    pub max_abs_z: f64,
    /// `min(1, n_tests * P(|N(0,1)| >= max_abs_z))`.
    pub bonferroni_p: f64,
    pub pass: bool,
    pub dictionary: Vec<String>,
    pub records: Vec<TestRecord>,
}

pub(crate) fn z_score(mean: f64, se: f64) -> f64 {
    if se > 0.0 {
        mean / se
    } else if mean == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(mean)
    }
}

pub(crate) fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Weighted orthogonality of process increments to the dictionary.
///
/// `values(path)` returns the process at every grid node, `[node][component]`.
/// Sums are accumulated over fixed-size chunks of paths and combined in
/// path order, so the report does not depend on the worker count.
pub(crate) fn orthogonality_report<F>(
    process: &str,
    ensemble: &WeightedEnsemble,
    dict: &TestFunctionDictionary,
    pairs: &[NodePair],
    components: &[String],
    values: F,
) -> Result<MartingaleTestReport>
where
    F: Fn(&WeightedPath) -> Result<Vec<Vec<f64>>> + Sync,
{
    let grid = ensemble.grid;
    let nc = components.len();
    let nf = dict.len();
    let n_tests = nc * pairs.len() * nf;
    let index = |c: usize, p: usize, f: usize| (c * pairs.len() + p) * nf + f;

    let partials: Vec<Result<(Vec<f64>, Vec<f64>)>> = ensemble
        .paths
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sum = vec![0.0; n_tests];
            let mut sumsq = vec![0.0; n_tests];
            for path in chunk {
                if path.weight == 0.0 {
                    continue;
                }
                let v = values(path)?;
                for (p, pair) in pairs.iter().enumerate() {
                    let phis: Vec<f64> = dict
                        .functions
                        .iter()
                        .map(|phi| phi.eval(&path.factor, &path.chain, &grid, pair.s))
                        .collect();
                    for c in 0..nc {
                        let inc = v[pair.t][c] - v[pair.s][c];
                        for (f, phi) in phis.iter().enumerate() {
                            let g = path.weight * phi * inc;
                            sum[index(c, p, f)] += g;
                            sumsq[index(c, p, f)] += g * g;
                        }
                    }
                }
            }
            Ok((sum, sumsq))
        })
        .collect();

    let mut sum = vec![0.0; n_tests];
    let mut sumsq = vec![0.0; n_tests];
    for part in partials {
        let (s, q) = part?;
        for i in 0..n_tests {
            sum[i] += s[i];
            sumsq[i] += q[i];
        }
    }

    let n = ensemble.len() as f64;
    let labels = dict.labels();
    let mut records = Vec::with_capacity(n_tests);
    for (c, comp) in components.iter().enumerate() {
        for (p, pair) in pairs.iter().enumerate() {
            for (f, label) in labels.iter().enumerate() {
                let i = index(c, p, f);
                let mean = sum[i] / n;
                let var = if n > 1.0 { ((sumsq[i] - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
                let se = (var / n).sqrt();
                records.push(TestRecord {
                    component: comp.clone(),
                    s: grid.node(pair.s),
                    t: grid.node(pair.t),
                    function: label.clone(),
                    mean,
                    se,
                    z: z_score(mean, se),
                });
            }
        }
    }
    let max_abs_z = records.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(MartingaleTestReport {
        process: process.to_string(),
        n_paths: ensemble.len(),
        ess: ensemble.ess(),
        n_tests,
        threshold: Z_THRESHOLD,
        max_abs_z,
        bonferroni_p: (n_tests as f64 * two_sided_p(max_abs_z)).min(1.0),
        pass: max_abs_z < Z_THRESHOLD,
        dictionary: labels,
        records,
    })
}
