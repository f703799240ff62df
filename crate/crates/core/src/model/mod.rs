//! Population covariance structure: a bulk spectrum πᵇ given as an atomic
//! measure, a finite set of spikes, and the aspect ratio c_N = N/M.

mod config;

pub use config::{AtomSpec, BulkSpec, IndexSpike, ModelSpec, SigmaSpike, SpikeSpec};

use serde::Serialize;

use crate::error::{Result, SpectraError};
use crate::linalg::{self, Matrix, SymMatrix};
use crate::stieltjes::{BulkStructure, FFunction};

/// Relative distance below which two eigenvalues are merged into one atom.
pub const ATOM_MERGE_TOLERANCE: f64 = 1e-10;
/// Default maximal number of spikes.
pub const DEFAULT_SPIKE_CAP: usize = 32;

/// Tunable constants that the theory leaves as unspecified small numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub tau: f64,
    pub eps0: f64,
    pub eps1: f64,
    /// Exponent constant `C` in the half-widths `N^{-1/2+Cε₀}` and `N^{-2/3+Cε₀}`.
    pub c_exponent: f64,
    /// Separation constant for the outlier set; `None` picks a quarter of the
    /// smallest inter-component critical gap.
    pub c0: Option<f64>,
    pub slack: f64,
    /// Multiplier on the edge-scale term of the detection buffer.
    pub kappa: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tau: 0.01,
            eps0: 0.05,
            eps1: 0.02,
            c_exponent: 2.0,
            c0: None,
            slack: 3.0,
            kappa: 1.0,
        }
    }
}

/// One named pass/fail check with the quantity that decided it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn push(
        &mut self,
        name: impl Into<String>,
        passed: bool,
        value: f64,
        threshold: f64,
        detail: impl Into<String>,
    ) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            value,
            threshold,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
    }
}

/// One atom of πᵇ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// Atomic measure πᵇ with values sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BulkSpectrum {
    atoms: Vec<Atom>,
    m: usize,
}

impl BulkSpectrum {
    /// Builds from explicit atoms. Values are merged and sorted; weights must
    /// sum to one.
    pub fn from_atoms(atoms: &[(f64, f64)], m: usize) -> Result<Self> {
        if atoms.is_empty() {
            return Err(SpectraError::Parameter {
                name: "atoms",
                reason: "empty atom list".into(),
            });
        }
        if m == 0 {
            return Err(SpectraError::Parameter {
                name: "M",
                reason: "dimension must be positive".into(),
            });
        }
        for (index, &(v, w)) in atoms.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SpectraError::Validation {
                    index,
                    reason: format!("atom value {v} is not positive"),
                });
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(SpectraError::Validation {
                    index,
                    reason: format!("atom weight {w} is not positive"),
                });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SpectraError::Parameter {
                name: "atoms",
                reason: format!("weights sum to {total}, expected 1"),
            });
        }
        let mut sorted: Vec<(f64, f64)> = atoms.to_vec();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut merged: Vec<(f64, f64, f64)> = Vec::new(); // (value sum·w, weight, head value)
        for (v, w) in sorted {
            match merged.last_mut() {
                Some(last) if (last.2 - v) <= ATOM_MERGE_TOLERANCE * last.2 => {
                    last.0 += v * w;
                    last.1 += w;
                }
                _ => merged.push((v * w, w, v)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        let atoms = merged
            .into_iter()
            .map(|(vw, w, _)| Atom {
                value: vw / w,
                weight: w / total,
            })
            .collect();
        Ok(Self { atoms, m })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[0].value
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].value
    }

    /// πᵇ([0, t]).
    pub fn mass_below(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value <= t)
            .map(|a| a.weight)
            .sum()
    }

    /// Expands back to the M-long descending eigenvalue list. Requires every
    /// weight to be a multiple of 1/M.
    pub fn expand(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.m);
        for (index, a) in self.atoms.iter().enumerate() {
            let mult = a.weight * self.m as f64;
            let rounded = mult.round();
            if (mult - rounded).abs() > 1e-6 || rounded < 1.0 {
                return Err(SpectraError::Validation {
                    index,
                    reason: format!(
                        "weight {} is not a multiple of 1/{} (multiplicity {mult})",
                        a.weight, self.m
                    ),
                });
            }
            out.extend(std::iter::repeat_n(a.value, rounded as usize));
        }
        if out.len() != self.m {
            return Err(SpectraError::Dimension {
                expected: format!("{} eigenvalues", self.m),
                found: format!("{}", out.len()),
            });
        }
        Ok(out)
    }
}

/// Empirical spectral distribution of a list of population eigenvalues.
pub fn build_bulk_from_eigenvalues(values: &[f64]) -> Result<BulkSpectrum> {
    if values.is_empty() {
        return Err(SpectraError::Parameter {
            name: "values",
            reason: "empty eigenvalue list".into(),
        });
    }
    if let Some(index) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(SpectraError::Validation {
            index,
            reason: format!("eigenvalue {} is not positive", values[index]),
        });
    }
    let m = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // (sum of values, count, head value)
    let mut groups: Vec<(f64, usize, f64)> = Vec::new();
    for v in sorted {
        match groups.last_mut() {
            Some(g) if (g.2 - v) <= ATOM_MERGE_TOLERANCE * g.2 => {
                g.0 += v;
                g.1 += 1;
            }
            _ => groups.push((v, 1, v)),
        }
    }
    let atoms = groups
        .into_iter()
        .map(|(sum, count, _)| Atom {
            value: sum / count as f64,
            weight: count as f64 / m as f64,
        })
        .collect();
    Ok(BulkSpectrum { atoms, m })
}

/// Population eigenvalues of the Toeplitz matrix `rho^|i-j|`, with its eigenvectors.
pub fn build_toeplitz_population(rho: f64, m: usize) -> Result<(BulkSpectrum, Vec<f64>, Matrix)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SpectraError::Parameter {
            name: "rho",
            reason: format!("{rho} is outside (0, 1)"),
        });
    }
    if m < 2 {
        return Err(SpectraError::Parameter {
            name: "M",
            reason: format!("Toeplitz population needs M >= 2, got {m}"),
        });
    }
    let eig = linalg::eigh(&linalg::toeplitz(rho, m)?)?;
    let bulk = build_bulk_from_eigenvalues(&eig.values)?;
    Ok((bulk, eig.values, eig.vectors))
}

/// Midpoint discretization of the uniform law on `[lo, hi]` with M atoms, descending.
pub fn uniform_population(lo: f64, hi: f64, m: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(SpectraError::Parameter {
            name: "uniform",
            reason: format!("need 0 < lo < hi, got [{lo}, {hi}]"),
        });
    }
    if m == 0 {
        return Err(SpectraError::Parameter {
            name: "M",
            reason: "dimension must be positive".into(),
        });
    }
    let h = (hi - lo) / m as f64;
    Ok((0..m).map(|i| hi - (i as f64 + 0.5) * h).collect())
}

/// A spiked population eigenvalue σᵍ = σᵇ(1 + d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spike {
    /// Position in the descending population eigenvalue list (0-based).
    pub base_index: usize,
    pub d: f64,
    pub sigma_b: f64,
    pub sigma_g: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SpikeSet {
    spikes: Vec<Spike>,
}

impl SpikeSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn r(&self) -> usize {
        self.spikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    pub fn get(&self, k: usize) -> &Spike {
        &self.spikes[k]
    }
}

/// Attaches spikes given as `(base_index, d)` to the population eigenvalues.
pub fn attach_spikes(population: &[f64], spikes: &[(usize, f64)]) -> Result<SpikeSet> {
    attach_spikes_with_cap(population, spikes, DEFAULT_SPIKE_CAP)
}

pub fn attach_spikes_with_cap(
    population: &[f64],
    spikes: &[(usize, f64)],
    cap: usize,
) -> Result<SpikeSet> {
    let list: Vec<(usize, f64, Option<f64>)> = spikes.iter().map(|&(i, d)| (i, d, None)).collect();
    attach_inner(population, &list, cap)
}

/// Attaches spikes given by their target value σᵍ. Each one takes the largest
/// unused population eigenvalue strictly below it, so d = σᵍ/σᵇ − 1 > 0.
pub fn attach_spikes_by_sigma(population: &[f64], sigma_g: &[f64]) -> Result<SpikeSet> {
    let mut order: Vec<usize> = (0..sigma_g.len()).collect();
    order.sort_by(|&a, &b| sigma_g[b].total_cmp(&sigma_g[a]));
    let mut used = vec![false; population.len()];
    let mut list = Vec::with_capacity(sigma_g.len());
    for k in order {
        let s = sigma_g[k];
        let slot = (0..population.len())
            .find(|&i| !used[i] && population[i] < s)
            .ok_or_else(|| SpectraError::Validation {
                index: k,
                reason: format!("no free population eigenvalue below sigma_g = {s}"),
            })?;
        used[slot] = true;
        list.push((slot, s / population[slot] - 1.0, Some(s)));
    }
    attach_inner(population, &list, DEFAULT_SPIKE_CAP)
}

fn attach_inner(
    population: &[f64],
    list: &[(usize, f64, Option<f64>)],
    cap: usize,
) -> Result<SpikeSet> {
    if list.len() > cap {
        return Err(SpectraError::Parameter {
            name: "spikes",
            reason: format!("{} spikes exceed the cap of {cap}", list.len()),
        });
    }
    let mut seen = std::collections::HashSet::new();
    let mut spikes = Vec::with_capacity(list.len());
    for (k, &(base_index, d, sigma_g)) in list.iter().enumerate() {
        if base_index >= population.len() {
            return Err(SpectraError::Validation {
                index: k,
                reason: format!(
                    "base index {base_index} out of range for M = {}",
                    population.len()
                ),
            });
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(SpectraError::Validation {
                index: k,
                reason: format!("perturbation d = {d} must be positive"),
            });
        }
        if !seen.insert(base_index) {
            return Err(SpectraError::Validation {
                index: k,
                reason: format!("duplicate base index {base_index}"),
            });
        }
        let sigma_b = population[base_index];
        spikes.push(Spike {
            base_index,
            d,
            sigma_b,
            sigma_g: sigma_g.unwrap_or(sigma_b * (1.0 + d)),
        });
    }
    spikes.sort_by(|a, b| b.d.total_cmp(&a.d).then(a.base_index.cmp(&b.base_index)));
    Ok(SpikeSet { spikes })
}

/// Σ_b, its spikes and the sampling regime.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    bulk: BulkSpectrum,
    population: Vec<f64>,
    spikes: SpikeSet,
    n: usize,
    basis: Option<Matrix>,
}

impl PopulationModel {
    /// `population` is the descending list of Σ_b eigenvalues (length M).
    pub fn new(population: Vec<f64>, spikes: SpikeSet, n: usize) -> Result<Self> {
        let mut population = population;
        population.sort_by(|a, b| b.total_cmp(a));
        let bulk = build_bulk_from_eigenvalues(&population)?;
        if n == 0 {
            return Err(SpectraError::Parameter {
                name: "N",
                reason: "sample count must be positive".into(),
            });
        }
        for s in spikes.spikes() {
            if s.base_index >= population.len() {
                return Err(SpectraError::Validation {
                    index: s.base_index,
                    reason: "spike base index out of range".into(),
                });
            }
        }
        Ok(Self {
            bulk,
            population,
            spikes,
            n,
            basis: None,
        })
    }

    /// Attaches an orthogonal eigenbasis of Σ_b; column k pairs with population eigenvalue k.
    pub fn with_basis(mut self, basis: Matrix) -> Result<Self> {
        let m = self.m();
        if basis.rows() != m || basis.cols() != m {
            return Err(SpectraError::Dimension {
                expected: format!("{m}x{m} basis"),
                found: format!("{}x{}", basis.rows(), basis.cols()),
            });
        }
        let defect = basis.orthonormality_defect();
        if defect > 1e-10 {
            return Err(SpectraError::Parameter {
                name: "basis",
                reason: format!("columns not orthonormal (defect {defect:e})"),
            });
        }
        self.basis = Some(basis);
        Ok(self)
    }

    pub fn bulk(&self) -> &BulkSpectrum {
        &self.bulk
    }

    pub fn population(&self) -> &[f64] {
        &self.population
    }

    pub fn spikes(&self) -> &SpikeSet {
        &self.spikes
    }

    pub fn basis(&self) -> Option<&Matrix> {
        self.basis.as_ref()
    }

    pub fn m(&self) -> usize {
        self.population.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c_n(&self) -> f64 {
        self.n as f64 / self.m() as f64
    }

    /// Same population and sample size without spikes.
    pub fn without_spikes(&self) -> Self {
        Self {
            spikes: SpikeSet::empty(),
            ..self.clone()
        }
    }

    /// Eigenvalues of Σ_g, indexed like the population.
    pub fn spiked_population(&self) -> Vec<f64> {
        let mut out = self.population.clone();
        for s in self.spikes.spikes() {
            out[s.base_index] = s.sigma_g;
        }
        out
    }

    pub fn f_function(&self) -> FFunction {
        FFunction::new(&self.bulk, self.c_n())
    }

    /// Population direction of spike `k` in ambient coordinates.
    pub fn spike_direction(&self, k: usize) -> Vec<f64> {
        let idx = self.spikes.get(k).base_index;
        match &self.basis {
            Some(v) => v.column(idx),
            None => {
                let mut e = vec![0.0; self.m()];
                e[idx] = 1.0;
                e
            }
        }
    }

    /// Σ^{1/2} for the given eigenvalue list in this model's basis.
    pub fn sqrt_covariance(&self, eigenvalues: &[f64]) -> Result<SymMatrix> {
        let roots: Vec<f64> = eigenvalues.iter().map(|v| v.sqrt()).collect();
        match &self.basis {
            None => SymMatrix::diagonal(&roots),
            Some(v) => {
                // V diag(√σ) Vᵀ via row-scaled copy of Vᵀ.
                let vt = v.transpose();
                let mut scaled = vt.clone();
                for (k, r) in roots.iter().enumerate() {
                    for x in scaled.row_mut(k) {
                        *x *= r;
                    }
                }
                let full = v.matmul(&scaled)?;
                SymMatrix::from_matrix_upper(&full)
            }
        }
    }

    /// True when the basis is absent, so Σ^{1/2} is diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.basis.is_none()
    }
}

/// Checks the bound assumptions on πᵇ and c_N plus the right-side condition
/// on every spike.
pub fn validate_assumptions(model: &PopulationModel, tau: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let bulk = model.bulk();
    let lo = bulk.min_value();
    let hi = bulk.max_value();
    report.push(
        "bulk_lower_bound",
        lo > tau,
        lo,
        tau,
        "smallest population eigenvalue must exceed tau",
    );
    report.push(
        "bulk_upper_bound",
        hi <= 1.0 / tau,
        hi,
        1.0 / tau,
        "largest population eigenvalue must not exceed 1/tau",
    );
    let low_mass = bulk.mass_below(tau);
    report.push(
        "bulk_mass_near_zero",
        low_mass <= 1.0 - tau,
        low_mass,
        1.0 - tau,
        "mass of the bulk on [0, tau]",
    );
    let c = model.c_n();
    report.push(
        "aspect_ratio",
        (tau..=1.0 / tau).contains(&c),
        c,
        tau,
        "c_N = N/M must lie in [tau, 1/tau]",
    );
    if model.spikes().is_empty() {
        return report;
    }
    match model.f_function().bulk_structure() {
        Ok(structure) => report.extend(right_side_report(model, &structure, tau)),
        Err(e) => report.push(
            "right_side",
            false,
            f64::NAN,
            tau,
            format!("bulk structure unavailable: {e}"),
        ),
    }
    report
}

/// Right-side condition: each spike's predicted location sits closer to the
/// right edge of its own component than to the lower edge of the one above.
pub fn right_side_report(
    model: &PopulationModel,
    structure: &BulkStructure,
    tau: f64,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let f = model.f_function();
    for (k, s) in model.spikes().spikes().iter().enumerate() {
        let x = -1.0 / s.sigma_g;
        let name = format!("right_side[spike {k}]");
        let Some(i) = structure.component_of_spike(x) else {
            report.push(name, false, f64::NAN, tau, "spike collides with a pole");
            continue;
        };
        let Ok(loc) = f.eval(x) else {
            report.push(name, false, f64::NAN, tau, "f undefined at -1/sigma_g");
            continue;
        };
        let right_edge = structure.edges[2 * i - 2];
        if i == 1 {
            report.push(name, true, f64::INFINITY, tau, "top component, f(x_0) = inf");
            continue;
        }
        let upper = structure.edges[2 * i - 3];
        let within = right_edge <= loc && loc <= upper;
        let margin = (loc - upper).abs() - (loc - right_edge).abs();
        report.push(
            name,
            within && margin >= tau,
            margin,
            tau,
            format!("location {loc} between edges {right_edge} and {upper} of component {i}"),
        );
    }
    report
}
