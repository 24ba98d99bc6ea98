//! Accept/reject gate applied to every proposed map.
//!
//! A proposal survives only if (a) its smallest district population stays at
//! or above an absolute floor and (b) the standard deviation of district
//! populations stays inside a bracket around the seed map's value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::DistrictMap;

/// File-level validator parameters (everything except the seed-derived s0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidatorParams {
    pub min_population: u64,
    pub std_lower_factor: f64,
    pub std_upper_factor: f64,
}

impl Default for ValidatorParams {
    fn default() -> Self {
        ValidatorParams {
            min_population: 50,
            std_lower_factor: 0.75,
            std_upper_factor: 1.25,
        }
    }
}

/// Runtime validator configuration; s0 is the population standard deviation
/// of the seed map, fixed once at chain start and never updated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidatorConfig {
    pub min_population: u64,
    pub std_lower_factor: f64,
    pub std_upper_factor: f64,
    pub s0: f64,
}

impl ValidatorConfig {
    pub fn new(params: ValidatorParams, s0: f64) -> Result<Self> {
        if !(params.std_lower_factor > 0.0
            && params.std_lower_factor < 1.0
            && params.std_upper_factor > 1.0)
        {
            return Err(Error::Config(format!(
                "std bracket factors must satisfy 0 < lower < 1 < upper, got [{}, {}]",
                params.std_lower_factor, params.std_upper_factor
            )));
        }
        if s0.is_nan() || s0 <= 0.0 {
            return Err(Error::Config(format!(
                "seed-map population standard deviation must be positive, got {s0}"
            )));
        }
        Ok(ValidatorConfig {
            min_population: params.min_population,
            std_lower_factor: params.std_lower_factor,
            std_upper_factor: params.std_upper_factor,
            s0,
        })
    }

    /// Configuration anchored to a seed map's district-population spread.
    pub fn for_seed(seed: &DistrictMap, params: ValidatorParams) -> Result<Self> {
        ValidatorConfig::new(params, population_std(seed))
    }
}

/// Sample standard deviation (z − 1 divisor) of the district totals.
pub fn population_std(map: &DistrictMap) -> f64 {
    let z = map.z();
    debug_assert!(z >= 2);
    let totals: Vec<f64> = map.tallies().iter().map(|t| t.total as f64).collect();
    let mean = totals.iter().sum::<f64>() / z as f64;
    let ss: f64 = totals.iter().map(|t| (t - mean) * (t - mean)).sum();
    (ss / (z as f64 - 1.0)).sqrt()
}

/// Why a proposal was rejected, if it was.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationOutcome {
    Pass,
    FailLowerBound,
    FailStd,
    FailBoth,
}

impl ValidationOutcome {
    pub fn passed(self) -> bool {
        self == ValidationOutcome::Pass
    }

    pub fn failed_lower_bound(self) -> bool {
        matches!(
            self,
            ValidationOutcome::FailLowerBound | ValidationOutcome::FailBoth
        )
    }

    pub fn failed_std(self) -> bool {
        matches!(self, ValidationOutcome::FailStd | ValidationOutcome::FailBoth)
    }
}

/// True iff the smallest district population is at least `min_population`,
/// which keeps empty districts out of every retained map.
pub fn validate_lower_bound(map: &DistrictMap, cfg: &ValidatorConfig) -> bool {
    map.tallies()
        .iter()
        .map(|t| t.total)
        .min()
        .is_some_and(|min| min >= cfg.min_population)
}

/// True iff the map's district-population standard deviation lies inside
/// [lower·s0, upper·s0].
pub fn validate_std(map: &DistrictMap, cfg: &ValidatorConfig) -> bool {
    let s = population_std(map);
    s >= cfg.std_lower_factor * cfg.s0 && s <= cfg.std_upper_factor * cfg.s0
}

/// Both validators must pass.
pub fn validate(map: &DistrictMap, cfg: &ValidatorConfig) -> bool {
    check(map, cfg).passed()
}

/// Run both validators and report which failed.
pub fn check(map: &DistrictMap, cfg: &ValidatorConfig) -> ValidationOutcome {
    match (validate_lower_bound(map, cfg), validate_std(map, cfg)) {
        (true, true) => ValidationOutcome::Pass,
        (false, true) => ValidationOutcome::FailLowerBound,
        (true, false) => ValidationOutcome::FailStd,
        (false, false) => ValidationOutcome::FailBoth,
    }
}
