//! Serializable model description, shared by config files and tests.

use serde::{Deserialize, Serialize};

use super::{
    attach_inner, build_toeplitz_population, uniform_population, BulkSpectrum, PopulationModel,
    DEFAULT_SPIKE_CAP,
};
use crate::error::{Result, SpectraError};

/// Model section of a config file.
///
/// ```json
/// { "M": 400, "N": 800,
///   "bulk": { "atoms": [ { "value": 18, "weight": 0.5 }, { "value": 1, "weight": 0.5 } ] },
///   "spikes": [ { "sigma_g": 35 }, { "index": 200, "d": 3 } ] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "M", alias = "m")]
    pub m: usize,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub bulk: BulkSpec,
    #[serde(default)]
    pub spikes: Vec<SpikeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BulkSpec {
    /// All M population eigenvalues.
    Explicit(Vec<f64>),
    /// Atoms whose weights are multiples of 1/M.
    Atoms(Vec<AtomSpec>),
    Toeplitz { rho: f64 },
    /// Uniform law on `[lo, hi]`, discretized at cell midpoints.
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpikeSpec {
    Index(IndexSpike),
    Sigma(SigmaSpike),
}

/// Spike on population eigenvalue `index` (0-based, descending order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpike {
    pub index: usize,
    pub d: f64,
}

/// Spike given by its value; it replaces the largest free population eigenvalue below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaSpike {
    pub sigma_g: f64,
}

impl ModelSpec {
    pub fn build(&self) -> Result<PopulationModel> {
        if self.m == 0 || self.n == 0 {
            return Err(SpectraError::Parameter {
                name: "M/N",
                reason: "dimensions must be positive".into(),
            });
        }
        let (population, basis) = match &self.bulk {
            BulkSpec::Explicit(values) => {
                if values.len() != self.m {
                    return Err(SpectraError::Dimension {
                        expected: format!("{} explicit eigenvalues", self.m),
                        found: format!("{}", values.len()),
                    });
                }
                (values.clone(), None)
            }
            BulkSpec::Atoms(atoms) => {
                let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a.value, a.weight)).collect();
                (BulkSpectrum::from_atoms(&pairs, self.m)?.expand()?, None)
            }
            BulkSpec::Toeplitz { rho } => {
                let (_, values, vectors) = build_toeplitz_population(*rho, self.m)?;
                (values, Some(vectors))
            }
            BulkSpec::Uniform { lo, hi } => (uniform_population(*lo, *hi, self.m)?, None),
        };
        let mut population = population;
        population.sort_by(|a, b| b.total_cmp(a));

        let mut list: Vec<(usize, f64, Option<f64>)> = Vec::new();
        let mut used = vec![false; population.len()];
        for s in &self.spikes {
            if let SpikeSpec::Index(IndexSpike { index, d }) = *s {
                if index < used.len() {
                    used[index] = true;
                }
                list.push((index, d, None));
            }
        }
        let mut by_sigma: Vec<f64> = self
            .spikes
            .iter()
            .filter_map(|s| match s {
                SpikeSpec::Sigma(SigmaSpike { sigma_g }) => Some(*sigma_g),
                SpikeSpec::Index(_) => None,
            })
            .collect();
        by_sigma.sort_by(|a, b| b.total_cmp(a));
        for (k, sigma_g) in by_sigma.into_iter().enumerate() {
            let slot = (0..population.len())
                .find(|&i| !used[i] && population[i] < sigma_g)
                .ok_or_else(|| SpectraError::Validation {
                    index: k,
                    reason: format!("no free population eigenvalue below sigma_g = {sigma_g}"),
                })?;
            used[slot] = true;
            list.push((slot, sigma_g / population[slot] - 1.0, Some(sigma_g)));
        }
        let spikes = attach_inner(&population, &list, DEFAULT_SPIKE_CAP)?;
        let model = PopulationModel::new(population, spikes, self.n)?;
        match basis {
            Some(v) => model.with_basis(v),
            None => Ok(model),
        }
    }
}
