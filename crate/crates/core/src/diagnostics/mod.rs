//! Monte Carlo checks of the martingale characterizations on weighted
//! ensembles.
//!
//! A conditional-expectation statement `E[V_t - V_s | info_s] = 0` is tested
//! as orthogonality of the increment to a finite dictionary of adapted test
//! functions: for every component, node pair and test function `phi`, the
//! weighted mean of `phi_s (V_t - V_s)` is turned into a z-score. A report
//! passes when the largest `|z|` stays below a Bonferroni-style threshold.

mod cmc;
mod dictionary;
mod equivalence;
mod jumps;
mod martingale;
mod report;

pub use cmc::{cmc_conditional_test, log_log_slope, CmcCell, CmcReport, FactorBucket, MIN_CELL_PATHS};
pub use dictionary::{TestFunction, TestFunctionDictionary};
pub use equivalence::{equivalence_check, pathwise_intensity_gap, EquivalenceReport};
pub use jumps::{common_jump_scan, common_jump_scan_paths};
pub use martingale::{residual_k, residual_l, residual_m, residual_n, NodePair};
pub use report::{MartingaleTestReport, TestRecord, Z_THRESHOLD};
