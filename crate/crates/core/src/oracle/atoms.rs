use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::DiscreteScenario;
use crate::error::Result;

/// Which law an [`AtomTable`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Chain driven by `I + A Delta`, independent of the bits, uniform start.
    Q,
    /// Chain driven by `I + Lambda_k Delta` given the bits.
    P,
}

/// One outcome: a bit sequence and a chain trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// Bit `eps_i` is stored at position `i - 1`.
    pub bits: u16,
    pub path: [u8; 9],
    pub prob: f64,
}

impl Atom {
    pub fn bit(&self, i: usize) -> bool {
        (self.bits >> (i - 1)) & 1 == 1
    }

    pub fn state(&self, k: usize) -> usize {
        self.path[k] as usize
    }
}

/// Exhaustive probability table over bits and trajectories.
///
/// Stored densely: one block of `d^(K+1)` trajectories per bit sequence,
/// with `x_0` as the most significant base-`d` digit so that every prefix
/// `x_0..x_k` owns a contiguous run of `d^(K-k)` entries. Trajectories with
/// probability zero are kept as zeros and skipped by [`atoms`](Self::atoms).
#[derive(Debug, Clone)]
pub struct AtomTable {
    measure: Measure,
    steps: usize,
    states: usize,
    probs: Vec<f64>,
}

impl AtomTable {
    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Trajectories per bit sequence, `d^(K+1)`.
    pub fn trajectories(&self) -> usize {
        self.probs.len() >> self.steps
    }

    pub fn bit_sequences(&self) -> usize {
        1 << self.steps
    }

    /// Probabilities of every trajectory under one bit sequence.
    pub fn block(&self, bits: u16) -> &[f64] {
        let n = self.trajectories();
        &self.probs[bits as usize * n..(bits as usize + 1) * n]
    }

    /// Number of atoms with positive probability.
    pub fn len(&self) -> usize {
        self.probs.iter().filter(|p| **p > 0.0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// State `x_k` of the trajectory with index `traj`.
    pub fn state_of(&self, traj: usize, k: usize) -> usize {
        (traj / self.states.pow((self.steps - k) as u32)) % self.states
    }

    pub fn decode(&self, traj: usize) -> [u8; 9] {
        let mut path = [0u8; 9];
        for (k, x) in path.iter_mut().enumerate().take(self.steps + 1) {
            *x = self.state_of(traj, k) as u8;
        }
        path
    }

    /// Atoms including zero-probability ones, in storage order.
    pub fn all_atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        let n = self.trajectories();
        self.probs.iter().enumerate().map(move |(i, &prob)| Atom {
            bits: (i / n) as u16,
            path: self.decode(i % n),
            prob,
        })
    }

    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        self.all_atoms().filter(|a| a.prob > 0.0)
    }

    /// Total probability, compensated summation.
    pub fn total(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    pub(crate) fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Neumaier summation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Builds the exhaustive table by depth-first search over trajectories,
/// pruning branches whose probability is already zero.
pub fn enumerate_atoms(sc: &DiscreteScenario, measure: Measure) -> Result<AtomTable> {
    sc.validate()?;
    let (k_max, d) = (sc.steps, sc.states);
    let n = d.pow((k_max + 1) as u32);
    let bit_prob = 0.5_f64.powi(k_max as i32);
    let reference = sc.reference_step();
    let mut probs = vec![0.0; n << k_max];
    probs.par_chunks_mut(n).enumerate().for_each(|(b, block)| {
        let bits = b as u16;
        let step = |k: usize, x0: usize, from: usize, to: usize| match measure {
            Measure::P => sc.step_prob(k, bits, x0, from, to),
            Measure::Q => reference[(from, to)],
        };
        // (level, state at level, x0, prefix index, probability)
        let mut stack: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
        for x0 in 0..d {
            let p0 = match measure {
                Measure::P => sc.initial_probs(bits)[x0],
                Measure::Q => 1.0 / d as f64,
            } * bit_prob;
            if p0 > 0.0 {
                stack.push((0, x0, x0, x0, p0));
            }
        }
        while let Some((level, x, x0, prefix, p)) = stack.pop() {
            if level == k_max {
                block[prefix] = p;
                continue;
            }
            for y in 0..d {
                let q = p * step(level + 1, x0, x, y);
                if q > 0.0 {
                    stack.push((level + 1, y, x0, prefix * d + y, q));
                }
            }
        }
    });
    Ok(AtomTable { measure, steps: k_max, states: d, probs })
}

/// One cell of a conditional-probability partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conditional {
    pub mass: f64,
    /// `None` when the cell has probability zero.
    pub prob: Option<f64>,
}

/// `P(event | cell)` for every cell of `partition`, by summation.
pub fn conditional_probability<K: Ord>(
    table: &AtomTable,
    event: impl Fn(&Atom) -> bool,
    partition: impl Fn(&Atom) -> K,
) -> BTreeMap<K, Conditional> {
    let mut sums: BTreeMap<K, (f64, f64)> = BTreeMap::new();
    for atom in table.all_atoms() {
        let e = sums.entry(partition(&atom)).or_insert((0.0, 0.0));
        e.0 += atom.prob;
        if event(&atom) {
            e.1 += atom.prob;
        }
    }
    sums.into_iter()
        .map(|(k, (mass, hit))| (k, Conditional { mass, prob: (mass > 0.0).then(|| hit / mass) }))
        .collect()
}
