use crate::error::{Error, Result};

/// Finite state space `{0, .., d-1}` with `d >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    d: usize,
}

impl StateSpace {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Scenario(format!("state count must be >= 2, got {d}")));
        }
        Ok(Self { d })
    }

    pub fn size(&self) -> usize {
        self.d
    }

    pub fn check(&self, x: usize) -> Result<()> {
        if x < self.d {
            Ok(())
        } else {
            Err(Error::StateOutOfRange { state: x, states: self.d })
        }
    }
}

/// Uniform grid `t_k = k * T / K`, `k = 0..=K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

// Relative slack used when snapping a time onto a node.
const NODE_SNAP: f64 = 1e-9;

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Scenario(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::Scenario("grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.steps as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.node(k))
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && (-NODE_SNAP * self.horizon..=self.horizon * (1.0 + NODE_SNAP)).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, horizon: self.horizon })
        }
    }

    /// Index of the last node `<= t` (times within a relative 1e-9 of a node
    /// snap onto it).
    pub fn node_at_or_before(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        let x = t / self.dt();
        let r = x.round();
        let k = if (x - r).abs() <= NODE_SNAP * self.steps as f64 { r } else { x.floor() };
        Ok((k.max(0.0) as usize).min(self.steps))
    }

    /// Exact node index for `t`, or [`Error::NotANode`].
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let k = self.node_at_or_before(t)?;
        if (self.node(k) - t).abs() <= NODE_SNAP * self.horizon {
            Ok(k)
        } else {
            Err(Error::NotANode(t))
        }
    }

    /// Index `k` of the interval `(t_k, t_{k+1}]` containing a jump at `u > 0`.
    pub fn jump_interval(&self, u: f64) -> usize {
        let x = u / self.dt();
        let k = x.ceil() as usize;
        k.saturating_sub(1).min(self.steps - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_increasing_and_end_at_horizon() {
        let g = TimeGrid::new(1.3, 7).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes[0], 0.0);
        assert_eq!(*nodes.last().unwrap(), 1.3);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn node_lookup() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(g.node_at_or_before(0.35).unwrap(), 3);
        assert_eq!(g.node_at_or_before(0.3).unwrap(), 3);
        assert_eq!(g.node_at_or_before(1.0).unwrap(), 10);
        assert_eq!(g.node_index(0.7).unwrap(), 7);
        assert!(matches!(g.node_index(0.75), Err(Error::NotANode(_))));
        assert!(g.node_at_or_before(1.5).is_err());
        assert!(g.node_at_or_before(-0.1).is_err());
    }

    #[test]
    fn jump_intervals_are_left_open() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.jump_interval(0.1), 0);
        assert_eq!(g.jump_interval(0.25), 0);
        assert_eq!(g.jump_interval(0.2500001), 1);
        assert_eq!(g.jump_interval(1.0), 3);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(StateSpace::new(1).is_err());
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }
}
