use serde::{Deserialize, Serialize};

use crate::process::{ChainPath, FactorPath, TimeGrid};

/// A bounded functional of the factor and chain histories up to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant,
    /// `H^x_s`.
    State { state: usize },
    /// `1{f_s[component] > threshold}`.
    FactorAbove { component: usize, threshold: f64 },
    Product { factors: Vec<TestFunction> },
}

impl TestFunction {
    /// Value at node `k`. Only the factor history up to `k` and the chain
    /// state at `t_k` are consulted.
    pub fn eval(&self, factor: &FactorPath, chain: &ChainPath, grid: &TimeGrid, k: usize) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::State { state } => f64::from(u8::from(chain.state_at(grid.node(k)) == *state)),
            Self::FactorAbove { component, threshold } => {
                let h = factor.history(k, grid.node(k));
                f64::from(u8::from(h.latest()[*component] > *threshold))
            }
            Self::Product { factors } => factors.iter().map(|f| f.eval(factor, chain, grid, k)).product(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Constant => "1".into(),
            Self::State { state } => format!("H{}", state + 1),
            Self::FactorAbove { component, threshold } => format!("1{{f{component}>{threshold}}}"),
            Self::Product { factors } => factors.iter().map(Self::label).collect::<Vec<_>>().join("*"),
        }
    }
}

/// Finite list of test functions; part of every report so that a failure
/// can be traced to the function that exposed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionDictionary {
    pub functions: Vec<TestFunction>,
}

impl TestFunctionDictionary {
    pub fn new(functions: Vec<TestFunction>) -> Self {
        Self { functions }
    }

    /// Constant, every state indicator, one factor threshold indicator, and
    /// the products of the state indicators with it.
    pub fn standard(states: usize, component: usize, threshold: f64) -> Self {
        let above = TestFunction::FactorAbove { component, threshold };
        let mut functions = vec![TestFunction::Constant];
        functions.extend((0..states).map(|state| TestFunction::State { state }));
        functions.push(above.clone());
        functions.extend(
            (0..states).map(|state| TestFunction::Product { factors: vec![TestFunction::State { state }, above.clone()] }),
        );
        Self { functions }
    }

    /// Constant and state indicators only.
    pub fn states_only(states: usize) -> Self {
        let mut functions = vec![TestFunction::Constant];
        functions.extend((0..states).map(|state| TestFunction::State { state }));
        Self { functions }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.functions.iter().map(TestFunction::label).collect()
    }
}
