use rayon::prelude::*;
use serde::Serialize;

use super::atoms::{compensated_sum, enumerate_atoms, AtomTable, Measure};
use super::scenario::DiscreteScenario;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Gate for every exact identity.
pub const ORACLE_TOL: f64 = 1e-12;
/// Gate for table normalization.
pub const SUM_TOL: f64 = 1e-14;
/// Above this many epochs, finite-dimensional laws are checked on epoch
/// sets of size at most [`MAX_EPOCH_SET`] only.
const ALL_EPOCH_SETS_UP_TO: usize = 6;
const MAX_EPOCH_SET: usize = 3;

fn require_p(table: &AtomTable) -> Result<()> {
    if table.measure() != Measure::P {
        return Err(Error::Mismatch("check needs the P-table".into()));
    }
    Ok(())
}

/// `p~(j, k) = prod_{m=j+1..k} (I + Lambda_m Delta)` for every `j <= k`, per bit sequence.
fn transition_products(sc: &DiscreteScenario, bits: u16) -> Vec<Vec<Matrix>> {
    let d = sc.states;
    (0..=sc.steps)
        .map(|j| {
            let mut acc = Matrix::identity(d, d);
            let mut row = vec![acc.clone()];
            for m in j + 1..=sc.steps {
                acc = &acc * sc.one_step(m, bits);
                row.push(acc.clone());
            }
            row
        })
        .collect()
}

fn pt(products: &[Vec<Matrix>], j: usize, k: usize) -> &Matrix {
    &products[j][k - j]
}

/// Largest gap between `P(future | bits <= k, x_0..x_k)` and
/// `P(future | bits <= k, x_k)` over all `k`, futures and positive cells.
pub fn verify_cmc(table: &AtomTable) -> Result<f64> {
    require_p(table)?;
    let (kk, d, n) = (table.steps(), table.states(), table.trajectories());
    let worst = (0..kk)
        .into_par_iter()
        .map(|k| {
            let fsize = d.pow((kk - k) as u32);
            let prefixes = n / fsize;
            let lows = 1usize << k;
            let mut by_past = vec![0.0; lows * n];
            let mut by_state = vec![0.0; lows * d * fsize];
            for b in 0..table.bit_sequences() {
                let low = b & (lows - 1);
                for (traj, p) in table.block(b as u16).iter().enumerate() {
                    let (prefix, f) = (traj / fsize, traj % fsize);
                    by_past[low * n + traj] += p;
                    by_state[(low * d + prefix % d) * fsize + f] += p;
                }
            }
            let mut worst = 0.0_f64;
            for low in 0..lows {
                for prefix in 0..prefixes {
                    let a = &by_past[low * n + prefix * fsize..low * n + (prefix + 1) * fsize];
                    let ma: f64 = a.iter().sum();
                    if ma <= 0.0 {
                        continue;
                    }
                    let s0 = (low * d + prefix % d) * fsize;
                    let bs = &by_state[s0..s0 + fsize];
                    let mb: f64 = bs.iter().sum();
                    for (pa, pb) in a.iter().zip(bs) {
                        worst = worst.max((pa / ma - pb / mb).abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DsmcDiscrepancy {
    /// `P(X_k = y | all bits, x_0..x_j)` against `p~_{x_j y}(j, k)`.
    pub transition: f64,
    /// `p~` against the enumerated quotient `P(X_j = x, X_k = y | bits) / P(X_j = x | bits)`.
    pub quotient: f64,
    /// Rows where the quotient falls back to the identity (zero-mass `X_j = x`).
    pub identity_rows: usize,
}

pub fn verify_dsmc_and_tp(table: &AtomTable, sc: &DiscreteScenario) -> Result<DsmcDiscrepancy> {
    require_p(table)?;
    let (kk, d, n) = (table.steps(), table.states(), table.trajectories());
    let per_bits: Vec<DsmcDiscrepancy> = (0..table.bit_sequences())
        .into_par_iter()
        .map(|b| {
            let bits = b as u16;
            let block = table.block(bits);
            let prods = transition_products(sc, bits);
            let mass: f64 = block.iter().sum();
            let mut out = DsmcDiscrepancy { transition: 0.0, quotient: 0.0, identity_rows: 0 };
            for j in 0..kk {
                let fsize = d.pow((kk - j) as u32);
                for prefix in 0..n / fsize {
                    let run = &block[prefix * fsize..(prefix + 1) * fsize];
                    let m: f64 = run.iter().sum();
                    if m <= 0.0 {
                        continue;
                    }
                    let x = prefix % d;
                    for k in j + 1..=kk {
                        let mut marg = vec![0.0; d];
                        for (f, p) in run.iter().enumerate() {
                            marg[table.state_of(prefix * fsize + f, k)] += p;
                        }
                        for (y, v) in marg.iter().enumerate() {
                            out.transition = out.transition.max((v / m - pt(&prods, j, k)[(x, y)]).abs());
                        }
                    }
                }
                // quotient against the enumerated two-time law given the bits
                for k in j + 1..=kk {
                    let mut joint = Matrix::zeros(d, d);
                    for (traj, p) in block.iter().enumerate() {
                        joint[(table.state_of(traj, j), table.state_of(traj, k))] += p / mass;
                    }
                    for x in 0..d {
                        let row: f64 = joint.row(x).sum();
                        if row <= 0.0 {
                            out.identity_rows += 1;
                            continue;
                        }
                        for y in 0..d {
                            let q = joint[(x, y)] / row;
                            out.quotient = out.quotient.max((q - pt(&prods, j, k)[(x, y)]).abs());
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(per_bits.into_iter().fold(
        DsmcDiscrepancy { transition: 0.0, quotient: 0.0, identity_rows: 0 },
        |a, b| DsmcDiscrepancy {
            transition: a.transition.max(b.transition),
            quotient: a.quotient.max(b.quotient),
            identity_rows: a.identity_rows + b.identity_rows,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidisDiscrepancy {
    /// Joint law of `(X_{k_1}..X_{k_n})` given all bits against the product formula.
    pub product_formula: f64,
    /// Same law given all bits against the law given bits `<= k_n`.
    pub conditional_independence: f64,
    pub epoch_sets: usize,
}

fn epoch_sets(epochs: usize) -> Vec<Vec<usize>> {
    (1u32..1 << epochs)
        .filter(|m| epochs <= ALL_EPOCH_SETS_UP_TO || m.count_ones() as usize <= MAX_EPOCH_SET)
        .map(|m| (0..epochs).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

pub fn verify_c_fidis_and_immersion(table: &AtomTable, sc: &DiscreteScenario) -> Result<FidisDiscrepancy> {
    require_p(table)?;
    let (kk, d, n) = (table.steps(), table.states(), table.trajectories());
    let nb = table.bit_sequences();
    let prods: Vec<Vec<Vec<Matrix>>> = (0..nb).map(|b| transition_products(sc, b as u16)).collect();
    let sets = epoch_sets(kk + 1);
    let paths: Vec<[u8; 9]> = (0..n).map(|t| table.decode(t)).collect();
    let results: Vec<(f64, f64)> = sets
        .par_iter()
        .map(|eps| {
            let outcomes = d.pow(eps.len() as u32);
            let code = |path: &[u8; 9]| eps.iter().fold(0, |c, &k| c * d + path[k] as usize);
            let decode = |mut c: usize| {
                let mut ys = vec![0; eps.len()];
                for y in ys.iter_mut().rev() {
                    *y = c % d;
                    c /= d;
                }
                ys
            };
            let mut cond = vec![0.0; nb * outcomes];
            for b in 0..nb {
                let block = table.block(b as u16);
                let mass: f64 = block.iter().sum();
                for (traj, p) in block.iter().enumerate() {
                    cond[b * outcomes + code(&paths[traj])] += p / mass;
                }
            }
            let mut product = 0.0_f64;
            for b in 0..nb {
                let mu = sc.initial_probs(b as u16);
                for o in 0..outcomes {
                    let ys = decode(o);
                    let mut tail = 1.0;
                    for w in eps.windows(2).zip(ys.windows(2)) {
                        tail *= pt(&prods[b], w.0[0], w.0[1])[(w.1[0], w.1[1])];
                    }
                    let head: f64 = (0..d).map(|x0| mu[x0] * pt(&prods[b], 0, eps[0])[(x0, ys[0])]).sum();
                    product = product.max((cond[b * outcomes + o] - head * tail).abs());
                }
            }
            // law given bits <= k_n: bits beyond k_n are fair and independent
            let last = *eps.last().expect("non-empty epoch set");
            let lows = 1usize << last;
            let mut given_past = vec![0.0; lows * outcomes];
            let share = (lows as f64) / nb as f64;
            for b in 0..nb {
                for o in 0..outcomes {
                    given_past[(b & (lows - 1)) * outcomes + o] += cond[b * outcomes + o] * share;
                }
            }
            let mut independence = 0.0_f64;
            for b in 0..nb {
                for o in 0..outcomes {
                    let gap = cond[b * outcomes + o] - given_past[(b & (lows - 1)) * outcomes + o];
                    independence = independence.max(gap.abs());
                }
            }
            (product, independence)
        })
        .collect();
    Ok(FidisDiscrepancy {
        product_formula: results.iter().map(|r| r.0).fold(0.0, f64::max),
        conditional_independence: results.iter().map(|r| r.1).fold(0.0, f64::max),
        epoch_sets: sets.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GirsanovDiscrepancy {
    /// `max |Q(w) w(w) - P(w)|` over every atom.
    pub atoms: f64,
    /// `|sum w Q - 1|`.
    pub normalization: f64,
    /// Largest gap between the bit-sequence laws under `P` and `Q`.
    pub bit_marginal: f64,
}

/// Discrete likelihood ratio of one atom: initial-law ratio times, per step,
/// `lambda/a` on a jump and `(1 + lambda^{xx} Delta)/(1 + a^{xx} Delta)` on a stay.
pub fn discrete_weight(sc: &DiscreteScenario, bits: u16, path: &[u8]) -> f64 {
    let d = sc.states;
    let a = sc.reference_rates.matrix();
    let x0 = path[0] as usize;
    let mut w = sc.initial_probs(bits)[x0] * d as f64;
    for k in 1..=sc.steps {
        let (x, y) = (path[k - 1] as usize, path[k] as usize);
        let lambda = sc.rate(k, bits, x0, x, y);
        w *= if x == y {
            (1.0 + lambda * sc.step_size) / (1.0 + a[(x, x)] * sc.step_size)
        } else {
            lambda / a[(x, y)]
        };
    }
    w
}

pub fn verify_discrete_girsanov(sc: &DiscreteScenario) -> Result<GirsanovDiscrepancy> {
    let p = enumerate_atoms(sc, Measure::P)?;
    let q = enumerate_atoms(sc, Measure::Q)?;
    let n = q.trajectories();
    let mut atoms = 0.0_f64;
    let mut weighted = Vec::with_capacity(q.probs().len());
    for (i, (pq, pp)) in q.probs().iter().zip(p.probs()).enumerate() {
        if *pq == 0.0 {
            if *pp > 0.0 {
                return Err(Error::AbsoluteContinuity);
            }
            continue;
        }
        let w = discrete_weight(sc, (i / n) as u16, &q.decode(i % n));
        atoms = atoms.max((pq * w - pp).abs());
        weighted.push(pq * w);
    }
    let mut bit_marginal = 0.0_f64;
    for b in 0..p.bit_sequences() {
        let gap = compensated_sum(p.block(b as u16).iter().copied())
            - compensated_sum(q.block(b as u16).iter().copied());
        bit_marginal = bit_marginal.max(gap.abs());
    }
    for i in 1..=sc.steps {
        let zero = |t: &AtomTable| {
            compensated_sum((0..t.bit_sequences()).filter(|b| b >> (i - 1) & 1 == 0).flat_map(|b| t.block(b as u16).iter().copied()))
        };
        bit_marginal = bit_marginal.max((zero(&p) - 0.5).abs()).max((zero(&q) - 0.5).abs());
    }
    Ok(GirsanovDiscrepancy {
        atoms,
        normalization: (compensated_sum(weighted) - 1.0).abs(),
        bit_marginal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub scenario: String,
    pub steps: usize,
    pub states: usize,
    pub atoms_p: usize,
    pub atoms_q: usize,
    pub epoch_sets: usize,
    pub identity_rows: usize,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl OracleReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == name)
    }

    /// Largest discrepancy over the exact identities (normalization excluded).
    pub fn max_discrepancy(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.tolerance == ORACLE_TOL)
            .map(|c| c.discrepancy)
            .fold(0.0, f64::max)
    }
}

/// Every exact check on one discrete scenario.
pub fn verify_all(sc: &DiscreteScenario) -> Result<OracleReport> {
    let p = enumerate_atoms(sc, Measure::P)?;
    let q = enumerate_atoms(sc, Measure::Q)?;
    let dsmc = verify_dsmc_and_tp(&p, sc)?;
    let fidis = verify_c_fidis_and_immersion(&p, sc)?;
    let girsanov = verify_discrete_girsanov(sc)?;
    let entry = |check: &str, discrepancy: f64, tolerance: f64| CheckResult {
        check: check.to_string(),
        discrepancy,
        tolerance,
        pass: discrepancy < tolerance,
    };
    let checks = vec![
        entry("probability_sum_p", (p.total() - 1.0).abs(), SUM_TOL),
        entry("probability_sum_q", (q.total() - 1.0).abs(), SUM_TOL),
        entry("cmc", verify_cmc(&p)?, ORACLE_TOL),
        entry("dsmc_transition", dsmc.transition, ORACLE_TOL),
        entry("transition_quotient", dsmc.quotient, ORACLE_TOL),
        entry("c_fidis", fidis.product_formula, ORACLE_TOL),
        entry("conditional_independence", fidis.conditional_independence, ORACLE_TOL),
        entry("girsanov_atoms", girsanov.atoms, ORACLE_TOL),
        entry("girsanov_normalization", girsanov.normalization, SUM_TOL),
        entry("bit_marginal", girsanov.bit_marginal, ORACLE_TOL),
    ];
    Ok(OracleReport {
        scenario: sc.name.clone(),
        steps: sc.steps,
        states: sc.states,
        atoms_p: p.len(),
        atoms_q: q.len(),
        epoch_sets: fidis.epoch_sets,
        identity_rows: dsmc.identity_rows,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}
