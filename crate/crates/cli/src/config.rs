//! Experiment configuration, read from JSON or TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use spectra_core::sim::EntryLaw;
use spectra_core::{ModelSpec, Thresholds};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub density: DensitySection,
    pub simulate: Option<SimulateSection>,
    pub shrink: Option<ShrinkSection>,
    pub oracle: Option<OracleSection>,
}

/// Overrides of the default thresholds.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub tau: Option<f64>,
    pub eps0: Option<f64>,
    pub eps1: Option<f64>,
    pub c0: Option<f64>,
    pub c_exponent: Option<f64>,
    pub kappa: Option<f64>,
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    /// Number of grid points.
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub law: EntryLaw,
    #[serde(default = "yes")]
    pub coupled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShrinkSection {
    pub loss: String,
    /// CSV with one eigenvalue per line, relative to the config file.
    pub eigenvalues: PathBuf,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Sample eigenvalues; when absent one sample is drawn from the model.
    pub eigenvalues: Option<PathBuf>,
    pub eta: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(s) = cfg.shrink.as_mut() {
            s.eigenvalues = base.join(&s.eigenvalues);
        }
        if let Some(p) = cfg.oracle.as_mut().and_then(|o| o.eigenvalues.as_mut()) {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    pub fn thresholds(&self) -> Thresholds {
        let d = Thresholds::default();
        let a = &self.analyze;
        Thresholds {
            tau: a.tau.unwrap_or(d.tau),
            eps0: a.eps0.unwrap_or(d.eps0),
            eps1: a.eps1.unwrap_or(d.eps1),
            c0: a.c0.or(d.c0),
            c_exponent: a.c_exponent.unwrap_or(d.c_exponent),
            kappa: a.kappa.unwrap_or(d.kappa),
            slack: a.slack.unwrap_or(d.slack),
        }
    }
}

/// Eigenvalues from a CSV file, one per line. A non-numeric first line is
/// taken as a header.
pub fn read_eigenvalues(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let Some(field) = record.get(0).map(str::trim) else { continue };
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if line == 0 => continue,
            Err(_) => bail!("{}: line {}: not a number: {field:?}", path.display(), line + 1),
        }
    }
    if out.is_empty() {
        bail!("{}: no eigenvalues", path.display());
    }
    Ok(out)
}
