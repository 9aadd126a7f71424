//! State space, time grid, factor paths, intensity models and chain paths.
//!
//! States are stored 0-based internally (`0..d`); files and reports label
//! them `1..=d`.

mod factor;
mod generator;
mod grid;
mod intensity;
mod path;

pub use factor::{FactorHistory, FactorPath};
pub use generator::{validate_generator, GeneratorMatrix, GeneratorReport, Violation, ROW_SUM_TOL};
pub use grid::{StateSpace, TimeGrid};
pub use intensity::{evaluate_intensity, evaluate_on_grid, IntensityModel, IntensitySpec, RateMatrix};
pub use path::{ChainPath, Jump};
