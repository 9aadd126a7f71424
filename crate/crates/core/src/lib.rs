//! Simulation and verification of finite-state conditional Markov chains.
//!
//! - [`process`]: state space, grid, factor paths, intensity models, chain paths.
//! - [`simulate`]: reference-measure construction, change-of-measure weights,
//!   direct conditional sampling.
//! - [`kolmogorov`]: conditional transition fields and three solution routes.
//! - [`diagnostics`]: Monte Carlo martingale and conditional-Markov tests.
//! - [`oracle`]: exact checks on enumerable discrete-time scenarios.
//! - [`export`]: atomic file output, ensemble CSVs and run manifests.
//! - [`cli`]: batch commands behind the `cmclab` binary.

// `!(x >= 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod kolmogorov;
pub mod linalg;
pub mod oracle;
pub mod process;
pub mod scenario;
pub mod simulate;

pub use error::{Error, Result};
pub use scenario::Scenario;
