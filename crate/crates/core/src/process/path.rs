use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

/// A càdlàg chain trajectory: initial state plus ordered jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    initial: usize,
    jumps: Vec<Jump>,
}

impl ChainPath {
    /// Checks that jump times are strictly increasing and positive, that no
    /// jump is a self-transition, and that consecutive records chain.
    pub fn new(initial: usize, jumps: Vec<Jump>) -> Result<Self> {
        let mut state = initial;
        let mut last = 0.0;
        for j in &jumps {
            if j.from == j.to {
                return Err(Error::SameState(j.from));
            }
            if j.from != state {
                return Err(Error::Scenario(format!(
                    "jump at {} leaves state {} but chain is in {state}",
                    j.time, j.from
                )));
            }
            if !(j.time > last) {
                return Err(Error::Scenario(format!("jump times must increase (got {} after {last})", j.time)));
            }
            state = j.to;
            last = j.time;
        }
        Ok(Self { initial, jumps })
    }

    pub(crate) fn from_parts_unchecked(initial: usize, jumps: Vec<Jump>) -> Self {
        Self { initial, jumps }
    }

    pub fn constant(initial: usize) -> Self {
        Self { initial, jumps: Vec::new() }
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// State at `t`; at a jump time this is the post-jump state.
    pub fn state_at(&self, t: f64) -> usize {
        let n = self.jumps.partition_point(|j| j.time <= t);
        if n == 0 {
            self.initial
        } else {
            self.jumps[n - 1].to
        }
    }

    /// Indicator vector `H_t`.
    pub fn indicators(&self, t: f64, d: usize) -> Vec<u8> {
        let mut h = vec![0; d];
        h[self.state_at(t)] = 1;
        h
    }

    /// `H^{xy}_t`: number of `x -> y` jumps at times `<= t`.
    pub fn transition_count(&self, x: usize, y: usize, t: f64) -> Result<usize> {
        if x == y {
            return Err(Error::SameState(x));
        }
        Ok(self
            .jumps
            .iter()
            .take_while(|j| j.time <= t)
            .filter(|j| j.from == x && j.to == y)
            .count())
    }

    /// Piecewise-constant segments `(start, end, state)` covering `[a, b)`.
    pub fn segments(&self, a: f64, b: f64) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::new();
        let mut start = a;
        let mut state = self.state_at(a);
        for j in self.jumps.iter().filter(|j| j.time > a && j.time < b) {
            out.push((start, j.time, state));
            start = j.time;
            state = j.to;
        }
        out.push((start, b, state));
        out
    }
}
