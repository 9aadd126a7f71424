//! Chain construction under the reference measure, change-of-measure
//! weights, and the direct conditional sampler used to cross-check them.

mod direct;
mod drivers;
mod ensemble;
mod initial;
mod reference;
mod rng;
mod weight;

pub use direct::{build_direct_ensemble, simulate_direct_dsmc, simulate_direct_dsmc_with, DirectEnsemble};
pub use drivers::{sample_factor, sample_factor_with, FactorDriver};
pub use ensemble::{build_weighted_ensemble, effective_sample_size, simulate_weighted_path, WeightStats, WeightedEnsemble, WeightedPath};
pub use initial::{sample_initial, sample_initial_with, InitialLaw};
pub use reference::{simulate_reference_chain, simulate_reference_chain_with, ReferenceRates};
pub use rng::{path_rng, PathRng, Stream};
pub use weight::{radon_nikodym_weight, weight_from_intensities, PathWeight};
