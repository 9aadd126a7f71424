use crate::error::{Error, Result};

/// Values of an `m`-dimensional driving factor at every grid node, plus the
/// factor's own jump times (empty for continuous drivers).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPath {
    dim: usize,
    values: Vec<f64>,
    jump_times: Vec<f64>,
}

impl FactorPath {
    /// `values` is node-major: node `k` occupies `values[k*dim..(k+1)*dim]`.
    pub fn new(dim: usize, values: Vec<f64>, jump_times: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::Scenario(format!(
                "factor values of length {} do not split into dimension {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values, jump_times })
    }

    pub fn constant(dim_values: &[f64], nodes: usize) -> Self {
        let values = (0..nodes).flat_map(|_| dim_values.iter().copied()).collect();
        Self { dim: dim_values.len(), values, jump_times: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_times_mut(&mut self) -> &mut Vec<f64> {
        &mut self.jump_times
    }

    /// The information available at node `k`: values at nodes `0..=k` and
    /// jump times up to `time`.
    pub fn history(&self, k: usize, time: f64) -> FactorHistory<'_> {
        let end = (k + 1).min(self.nodes());
        let jumps = self.jump_times.partition_point(|&u| u <= time);
        FactorHistory {
            dim: self.dim,
            values: &self.values[..end * self.dim],
            jump_times: &self.jump_times[..jumps],
            time,
        }
    }
}

/// A factor path truncated at some node. Evaluators see only this view, so
/// any attempt to read a later node fails with [`Error::Adaptedness`].
#[derive(Debug, Clone, Copy)]
pub struct FactorHistory<'a> {
    dim: usize,
    values: &'a [f64],
    jump_times: &'a [f64],
    time: f64,
}

impl<'a> FactorHistory<'a> {
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Index of the last visible node.
    pub fn last_node(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn latest(&self) -> &'a [f64] {
        &self.values[self.values.len() - self.dim..]
    }

    pub fn node(&self, k: usize) -> Result<&'a [f64]> {
        if k > self.last_node() {
            return Err(Error::Adaptedness { requested: k, available: self.last_node() });
        }
        Ok(&self.values[k * self.dim..(k + 1) * self.dim])
    }

    pub fn jump_times(&self) -> &'a [f64] {
        self.jump_times
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_truncates_values_and_jumps() {
        let f = FactorPath::new(1, vec![0.0, 1.0, 2.0, 3.0], vec![0.1, 0.5, 0.9]).unwrap();
        let h = f.history(1, 0.5);
        assert_eq!(h.latest(), &[1.0]);
        assert_eq!(h.node(0).unwrap(), &[0.0]);
        assert!(matches!(h.node(2), Err(Error::Adaptedness { requested: 2, available: 1 })));
        assert_eq!(h.jump_times(), &[0.1, 0.5]);
    }

    #[test]
    fn constant_path_repeats_value() {
        let f = FactorPath::constant(&[1.0, -2.0], 3);
        assert_eq!(f.nodes(), 3);
        assert_eq!(f.at(2), &[1.0, -2.0]);
    }

    #[test]
    fn rejects_ragged_values() {
        assert!(FactorPath::new(2, vec![0.0; 5], vec![]).is_err());
    }
}
