//! Continuous-time scenario files.
//!
//! A scenario is a JSON document naming the state count, the grid, the
//! factor driver, the intensity model, the reference Poisson rates and the
//! initial law. See `docs/scenario-schema.md` for the full schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::process::{IntensityModel, IntensitySpec, StateSpace, TimeGrid};
use crate::simulate::{FactorDriver, InitialLaw, ReferenceRates};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub states: usize,
    pub horizon: f64,
    pub steps: usize,
    pub factor: FactorDriver,
    pub intensity: IntensitySpec,
    pub reference_rates: ReferenceRates,
    pub initial_law: InitialLaw,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let space = StateSpace::new(self.states)?;
        TimeGrid::new(self.horizon, self.steps)?;
        let m = self.factor.dim();
        self.factor.validate()?;
        self.intensity.validate(space.size(), m)?;
        if !self.intensity.lambda_max().is_finite() {
            return Err(Error::Scenario("intensity bound must be finite".into()));
        }
        if self.reference_rates.dim() != self.states {
            return Err(Error::Scenario("reference rates have the wrong dimension".into()));
        }
        self.initial_law.validate(self.states, m)
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon, self.steps).expect("validated grid")
    }

    /// SHA-256 of the canonical (re-serialized) JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Copy of the scenario with every off-diagonal intensity scaled.
    pub fn with_intensity_scale(&self, scale: f64) -> Self {
        let mut sc = self.clone();
        sc.intensity = sc.intensity.scaled(scale);
        sc
    }
}
