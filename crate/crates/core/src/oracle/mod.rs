//! Exact verification on enumerable discrete-time scenarios.
//!
//! The factor is a sequence of fair bits `eps_1..eps_K`, the chain moves by
//! Euler one-step matrices `I + Lambda_k Delta`, and every conditional
//! probability is a finite sum over an [`AtomTable`].

mod atoms;
mod convergence;
mod scenario;
mod verify;

pub use atoms::{conditional_probability, enumerate_atoms, Atom, AtomTable, Conditional, Measure};
pub use convergence::{convergence_study, discrete_marginal, ConvergencePoint, ConvergenceStudy};
pub use scenario::{DiscreteIntensity, DiscreteScenario, PlantedViolation, MAX_STATES, MAX_STEPS};
pub use verify::{
    discrete_weight, verify_all, verify_c_fidis_and_immersion, verify_cmc, verify_discrete_girsanov,
    verify_dsmc_and_tp, CheckResult, DsmcDiscrepancy, FidisDiscrepancy, GirsanovDiscrepancy, OracleReport,
    ORACLE_TOL, SUM_TOL,
};
