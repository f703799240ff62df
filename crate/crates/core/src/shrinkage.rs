//! Eigenvalue shrinkage: the (l, c, s) pipeline for observed outliers, the
//! loss-specific shrinkers and the Frobenius oracle estimator.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};
use crate::exec::{map_indexed, Execution};
use crate::model::{PopulationModel, Thresholds};
use crate::stieltjes::{bisect_sign, BulkStructure, FFunction, Slope};

/// Optimal shrinker for one loss, as a function of (l, c²) with s² = 1 − c².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shrinker {
    Frobenius,
    InverseFrobenius,
    RelativeFrobeniusA,
    RelativeFrobeniusB,
    SymmetrizedRelative,
    Stein,
    Entropy,
    Divergence,
    MatusitaAffinity,
    Frechet,
}

impl Shrinker {
    pub const ALL: [Shrinker; 10] = [
        Shrinker::Frobenius,
        Shrinker::InverseFrobenius,
        Shrinker::RelativeFrobeniusA,
        Shrinker::RelativeFrobeniusB,
        Shrinker::SymmetrizedRelative,
        Shrinker::Stein,
        Shrinker::Entropy,
        Shrinker::Divergence,
        Shrinker::MatusitaAffinity,
        Shrinker::Frechet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shrinker::Frobenius => "frobenius",
            Shrinker::InverseFrobenius => "inverse-frobenius",
            Shrinker::RelativeFrobeniusA => "relative-frobenius-a",
            Shrinker::RelativeFrobeniusB => "relative-frobenius-b",
            Shrinker::SymmetrizedRelative => "symmetrized-relative",
            Shrinker::Stein => "stein",
            Shrinker::Entropy => "entropy",
            Shrinker::Divergence => "divergence",
            Shrinker::MatusitaAffinity => "matusita-affinity",
            Shrinker::Frechet => "frechet",
        }
    }

    /// β(l, c²). Some entries are written in equivalent forms that keep
    /// β(1, ·) = 1 and β(·, 1) = l exact in floating point.
    pub fn apply(self, l: f64, c2: f64) -> f64 {
        let s2 = 1.0 - c2;
        match self {
            Shrinker::Frobenius | Shrinker::Entropy => l * c2 + s2,
            Shrinker::InverseFrobenius | Shrinker::Stein => l / (c2 + l * s2),
            Shrinker::RelativeFrobeniusA => (l * c2 + l * l * s2) / (c2 + l * l * s2),
            // (l²c² + s²)/(lc² + s²)
            Shrinker::RelativeFrobeniusB => l * ((l * c2 + s2 / l) / (l * c2 + s2)),
            // 1 + (l − 1)c²/(c² + ls²)²
            Shrinker::SymmetrizedRelative => {
                let d2 = (c2 + l * s2).powi(2);
                ((d2 - c2) + l * c2) / d2
            }
            // √((l²c² + ls²)/(c² + ls²))
            Shrinker::Divergence => l * ((c2 + s2 / l) / (c2 + l * s2)).sqrt(),
            Shrinker::MatusitaAffinity => ((1.0 + c2) * l + s2) / (1.0 + c2 + l * s2),
            // (√l·c² + s²)²
            Shrinker::Frechet => l * (c2 + s2 / l.sqrt()).powi(2),
        }
    }
}

impl fmt::Display for Shrinker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shrinker {
    type Err = SpectraError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Shrinker::ALL
            .into_iter()
            .find(|k| k.name() == key || k.name().replace('-', "") == key)
            .ok_or_else(|| SpectraError::Parameter {
                name: "loss",
                reason: format!("unknown shrinker '{s}'"),
            })
    }
}

pub fn apply_shrinker(name: &str, l: f64, c2: f64) -> Result<f64> {
    if !(l > 0.0) || !(0.0..=1.0).contains(&c2) {
        return Err(SpectraError::Parameter {
            name: "l/c2",
            reason: format!("need l > 0 and c2 in [0, 1], got l = {l}, c2 = {c2}"),
        });
    }
    Ok(name.parse::<Shrinker>()?.apply(l, c2))
}

/// A shrinker for observed outliers, or the Frobenius oracle for every index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Shrinker(Shrinker),
    FrobeniusOracle,
}

impl FromStr for Loss {
    type Err = SpectraError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "frobenius-oracle" | "oracle" => Ok(Loss::FrobeniusOracle),
            other => Ok(Loss::Shrinker(other.parse()?)),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loss::Shrinker(s) => s.fmt(f),
            Loss::FrobeniusOracle => f.write_str("frobenius-oracle"),
        }
    }
}

/// Component `i` with a_{2i−1} < μ < a_{2(i−1)}, a₀ = +∞.
fn gap_component(s: &BulkStructure, mu: f64) -> Option<usize> {
    (1..=s.p).find(|&i| {
        let upper = if i == 1 { f64::INFINITY } else { s.left_edge(i - 1) };
        mu > s.right_edge(i) && mu < upper
    })
}

/// l(μ) = −1/f⁻¹(μ) on the increasing branch right of the component's critical point.
pub fn invert_f_outlier(f: &FFunction, s: &BulkStructure, mu: f64) -> Result<f64> {
    let i = gap_component(s, mu).ok_or_else(|| {
        SpectraError::Domain(format!("{mu} is not an outlier observation"))
    })?;
    let lo = s.x(2 * i - 1);
    let hi = if i == 1 { 0.0 } else { s.x(2 * i - 2) };
    let x = bisect_sign(&|x| f.eval_unchecked(x) - mu, lo, hi, Slope::Rising);
    Ok(-1.0 / x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkInputs {
    pub mu: f64,
    pub l: f64,
    pub c2: f64,
    pub s2: f64,
    /// The raw value fell outside [0, 1] and was clamped.
    pub clamped: bool,
}

/// l, c² and s² for an observed outlier μ.
pub fn shrink_inputs(f: &FFunction, s: &BulkStructure, mu: f64) -> Result<ShrinkInputs> {
    let l = invert_f_outlier(f, s, mu)?;
    let x = -1.0 / l;
    let raw = f.derivative(x, 1)? / (l * f.eval(x)?);
    let c2 = raw.clamp(0.0, 1.0);
    let clamped = c2 != raw;
    if clamped {
        log::warn!("c2 = {raw} at mu = {mu} clamped to {c2}");
    }
    Ok(ShrinkInputs {
        mu,
        l,
        c2,
        s2: 1.0 - c2,
        clamped,
    })
}

/// c²(μ) = (1/l)·f′(−1/l)/f(−1/l), clamped to [0, 1].
pub fn cosine_sq(f: &FFunction, s: &BulkStructure, mu: f64) -> Result<f64> {
    Ok(shrink_inputs(f, s, mu)?.c2)
}

/// (σᵍ)²/f(−1/σᵍ) for an outlier spike.
pub fn oracle_outlier_value(f: &FFunction, s: &BulkStructure, sigma_g: f64) -> Result<f64> {
    let x = -1.0 / sigma_g;
    match s.component_of_spike(x) {
        Some(i) if x > s.x(2 * i - 1) => Ok(sigma_g * sigma_g / f.eval(x)?),
        _ => Err(SpectraError::Precondition(format!(
            "sigma_g = {sigma_g} does not produce an outlier"
        ))),
    }
}

/// The two parts of u*Σ_g u for an outlier: the outlier directions contribute
/// f′/f and the bulk directions (σᵍ)²/(N f)·Σ_j (σᵇ_j)²/(σᵍ − σᵇ_j)².
/// Their sum telescopes to (σᵍ)²/f(−1/σᵍ).
pub fn oracle_outlier_parts(f: &FFunction, sigma_g: f64, sigma_b: &[f64]) -> Result<(f64, f64)> {
    let x = -1.0 / sigma_g;
    let fx = f.eval(x)?;
    let spike = f.derivative(x, 1)? / fx;
    let n = f.n() as f64;
    let sum: f64 = sigma_b
        .iter()
        .map(|&b| (b / (sigma_g - b)).powi(2))
        .sum();
    Ok((spike, sigma_g * sigma_g * sum / (n * fx)))
}

fn check_eigs(mu: &[f64]) -> Result<()> {
    if mu.is_empty() {
        return Err(SpectraError::Parameter {
            name: "sample_eigs",
            reason: "empty eigenvalue list".into(),
        });
    }
    if let Some(k) = mu.iter().position(|v| !v.is_finite()) {
        return Err(SpectraError::Validation {
            index: k,
            reason: "non-finite eigenvalue".into(),
        });
    }
    Ok(())
}

/// Default imaginary offset N^{−1/2}.
pub fn default_eta(n: usize) -> f64 {
    (n as f64).powf(-0.5)
}

/// The N eigenvalues of the companion matrix: the top min(M, N) values of
/// the M sample eigenvalues, padded with zeros up to N.
fn companion_spectrum(mu: &[f64], n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = mu.iter().copied().take(n).collect();
    v.resize(n, 0.0);
    v
}

/// m̂(z) = (1/N)·Σ_k 1/(μ_k − z) over the companion spectrum.
pub fn empirical_stieltjes(companion: &[f64], z: Complex64) -> Complex64 {
    let s: Complex64 = companion.iter().map(|&m| (Complex64::new(m, 0.0) - z).inv()).sum();
    s / companion.len() as f64
}

fn positive(mu: f64, i: usize) -> Result<()> {
    if mu > 0.0 {
        Ok(())
    } else {
        Err(SpectraError::Domain(format!(
            "oracle bulk value needs a positive eigenvalue, index {i} has {mu}"
        )))
    }
}

/// d̂_i = 1/(μ_i·|m̂(μ_i + iη)|²) for every index, with η = N^{−1/2} unless overridden.
pub fn oracle_bulk_values(
    sample_eigs: &[f64],
    n: usize,
    eta: Option<f64>,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_eigs(sample_eigs)?;
    let eta = eta.unwrap_or_else(|| default_eta(n));
    let companion = companion_spectrum(sample_eigs, n);
    let out = map_indexed(exec, sample_eigs.len(), |i| {
        let mu = sample_eigs[i];
        positive(mu, i)?;
        let m = empirical_stieltjes(&companion, Complex64::new(mu, eta));
        Ok(1.0 / (mu * m.norm_sqr()))
    });
    out.into_iter().collect()
}

/// The same values through m̂₁ = (1/M)·Tr G₁ of the M×M matrix:
/// d̂_i = |z|²/(μ_i·|1 − c⁻¹ − c⁻¹ z m̂₁(z)|²), z = μ_i + iη, c = N/M.
pub fn oracle_bulk_values_m1(
    sample_eigs: &[f64],
    n: usize,
    eta: Option<f64>,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_eigs(sample_eigs)?;
    let eta = eta.unwrap_or_else(|| default_eta(n));
    let m = sample_eigs.len() as f64;
    let cinv = m / n as f64;
    let out = map_indexed(exec, sample_eigs.len(), |i| {
        let mu = sample_eigs[i];
        positive(mu, i)?;
        let z = Complex64::new(mu, eta);
        let m1 = empirical_stieltjes(sample_eigs, z);
        let denom = Complex64::new(1.0 - cinv, 0.0) - cinv * z * m1;
        Ok(z.norm_sqr() / (mu * denom.norm_sqr()))
    });
    out.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    OutlierFormula,
    BulkStieltjes,
    BulkPassthrough,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::OutlierFormula => "outlier-formula",
            Method::BulkStieltjes => "bulk-stieltjes",
            Method::BulkPassthrough => "bulk-passthrough",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkEntry {
    pub index: usize,
    pub mu: f64,
    /// Component whose right edge μ exceeds, for outliers.
    pub component: Option<usize>,
    pub method: Method,
    pub l: Option<f64>,
    pub c2: Option<f64>,
    pub beta: f64,
}

pub const DENOMINATOR_NOTE: &str =
    "bulk values use the sample eigenvalue mu_i in the denominator 1/(mu_i |m(mu_i + i eta)|^2); \
     the variant with the population value lambda_i there is not used";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkagePlan {
    pub loss: String,
    pub entries: Vec<ShrinkEntry>,
    pub outliers: usize,
    pub eta: Option<f64>,
    pub notes: Vec<String>,
}

impl ShrinkagePlan {
    pub fn betas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.beta).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ShrinkOptions {
    pub thresholds: Thresholds,
    /// Override of η = N^{−1/2} for the oracle bulk values.
    pub eta: Option<f64>,
    /// Bulk values σ̂ᵇ for pass-through; the model's population by default.
    pub bulk_values: Option<Vec<f64>>,
    pub exec: Execution,
}

/// Buffer above a_{2i−1} beyond which an observed eigenvalue counts as an
/// outlier: max(N^{−2/3+Cε₀}, κ·ϖ·N^{−2/3+Cε₀}).
pub fn detection_buffer(s: &BulkStructure, i: usize, n: usize, th: &Thresholds) -> f64 {
    let rate = (n as f64).powf(-2.0 / 3.0 + th.c_exponent * th.eps0);
    let scale = s.edge_scales.get(2 * i - 2).copied().unwrap_or(1.0);
    rate.max(th.kappa * scale * rate)
}

/// Component of an observed outlier, or `None` for a bulk eigenvalue.
pub fn detect_outlier(s: &BulkStructure, mu: f64, n: usize, th: &Thresholds) -> Option<usize> {
    gap_component(s, mu).filter(|&i| mu > s.right_edge(i) + detection_buffer(s, i, n, th))
}

pub fn shrink_spectrum(
    sample_eigs: &[f64],
    model: &PopulationModel,
    f: &FFunction,
    s: &BulkStructure,
    loss: Loss,
    opts: &ShrinkOptions,
) -> Result<ShrinkagePlan> {
    check_eigs(sample_eigs)?;
    let n = model.n();
    let exec = opts.exec;
    let outlier: Vec<Option<usize>> = sample_eigs
        .iter()
        .map(|&mu| detect_outlier(s, mu, n, &opts.thresholds))
        .collect();
    let mut notes = Vec::new();
    let bulk: Option<Vec<f64>> = match loss {
        Loss::FrobeniusOracle => {
            notes.push(DENOMINATOR_NOTE.to_string());
            let eta = opts.eta.unwrap_or_else(|| default_eta(n));
            let companion = companion_spectrum(sample_eigs, n);
            let vals = map_indexed(exec, sample_eigs.len(), |i| {
                if outlier[i].is_some() {
                    return Ok(0.0);
                }
                let mu = sample_eigs[i];
                positive(mu, i)?;
                let m = empirical_stieltjes(&companion, Complex64::new(mu, eta));
                Ok(1.0 / (mu * m.norm_sqr()))
            });
            Some(vals.into_iter().collect::<Result<Vec<f64>>>()?)
        }
        Loss::Shrinker(_) => None,
    };
    let passthrough = opts
        .bulk_values
        .clone()
        .unwrap_or_else(|| model.population().to_vec());
    if bulk.is_none() && passthrough.len() < sample_eigs.len() {
        return Err(SpectraError::Dimension {
            expected: format!("at least {} bulk values", sample_eigs.len()),
            found: format!("{}", passthrough.len()),
        });
    }
    let entries = map_indexed(exec, sample_eigs.len(), |i| -> Result<ShrinkEntry> {
        let mu = sample_eigs[i];
        match outlier[i] {
            Some(comp) => {
                let inp = shrink_inputs(f, s, mu)?;
                let beta = match loss {
                    Loss::Shrinker(k) => k.apply(inp.l, inp.c2),
                    // (σᵍ)²/f(−1/σᵍ) with σᵍ = l(μ) and f(−1/l) = μ
                    Loss::FrobeniusOracle => inp.l * inp.l / mu,
                };
                Ok(ShrinkEntry {
                    index: i,
                    mu,
                    component: Some(comp),
                    method: Method::OutlierFormula,
                    l: Some(inp.l),
                    c2: Some(inp.c2),
                    beta,
                })
            }
            None => {
                let (method, beta) = match &bulk {
                    Some(v) => (Method::BulkStieltjes, v[i]),
                    None => (Method::BulkPassthrough, passthrough[i]),
                };
                Ok(ShrinkEntry {
                    index: i,
                    mu,
                    component: None,
                    method,
                    l: None,
                    c2: None,
                    beta,
                })
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let outliers = entries
        .iter()
        .filter(|e| e.method == Method::OutlierFormula)
        .count();
    Ok(ShrinkagePlan {
        loss: loss.to_string(),
        entries,
        outliers,
        eta: matches!(loss, Loss::FrobeniusOracle)
            .then(|| opts.eta.unwrap_or_else(|| default_eta(n))),
        notes,
    })
}

/// Oracle estimate d̂ for a full sample spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub d_hat: Vec<f64>,
    pub method: Vec<Method>,
    pub eta: f64,
    pub notes: Vec<String>,
}

pub fn oracle_estimate(
    sample_eigs: &[f64],
    model: &PopulationModel,
    f: &FFunction,
    s: &BulkStructure,
    opts: &ShrinkOptions,
) -> Result<OracleEstimate> {
    let plan = shrink_spectrum(sample_eigs, model, f, s, Loss::FrobeniusOracle, opts)?;
    Ok(OracleEstimate {
        d_hat: plan.betas(),
        method: plan.entries.iter().map(|e| e.method).collect(),
        eta: plan.eta.unwrap_or_else(|| default_eta(model.n())),
        notes: plan.notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{attach_spikes, attach_spikes_by_sigma, SpikeSet};
    use crate::outliers::Analysis;
    use crate::stieltjes::test_support::{two_bulk, mp};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn table_values() {
        assert_eq!(apply_shrinker("Frobenius", 5.0, 1.0).unwrap(), 5.0);
        assert_abs_diff_eq!(apply_shrinker("stein", 4.0, 0.5).unwrap(), 1.6, epsilon = 1e-15);
        assert!(apply_shrinker("nope", 4.0, 0.5).is_err());
        assert!(apply_shrinker("stein", 4.0, 1.5).is_err());
        assert_eq!("relative_frobenius_a".parse::<Shrinker>().unwrap(), Shrinker::RelativeFrobeniusA);
        assert_eq!("oracle".parse::<Loss>().unwrap(), Loss::FrobeniusOracle);
    }

    /// The shrinkers in their textbook form, to check the rearranged ones.
    fn textbook(k: Shrinker, l: f64, c2: f64) -> f64 {
        let s2 = 1.0 - c2;
        match k {
            Shrinker::Frobenius | Shrinker::Entropy => l * c2 + s2,
            Shrinker::InverseFrobenius | Shrinker::Stein => l / (c2 + l * s2),
            Shrinker::RelativeFrobeniusA => (l * c2 + l * l * s2) / (c2 + l * l * s2),
            Shrinker::RelativeFrobeniusB => (l * l * c2 + s2) / (l * c2 + s2),
            Shrinker::SymmetrizedRelative => 1.0 + (l - 1.0) * c2 / (c2 + l * s2).powi(2),
            Shrinker::Divergence => ((l * l * c2 + l * s2) / (c2 + l * s2)).sqrt(),
            Shrinker::MatusitaAffinity => ((1.0 + c2) * l + s2) / (1.0 + c2 + l * s2),
            Shrinker::Frechet => (l.sqrt() * c2 + s2).powi(2),
        }
    }

    proptest! {
        #[test]
        fn fixed_points_exact(l in 1e-3f64..1e3, c2 in 0.0f64..=1.0) {
            for k in Shrinker::ALL {
                prop_assert_eq!(k.apply(1.0, c2), 1.0, "{} at c2 = {}", k, c2);
                prop_assert_eq!(k.apply(l, 1.0), l, "{} at l = {}", k, l);
            }
        }

        #[test]
        fn matches_textbook_forms(l in 1e-2f64..1e2, c2 in 0.0f64..=1.0) {
            for k in Shrinker::ALL {
                let a = k.apply(l, c2);
                let b = textbook(k, l, c2);
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{}: {} vs {}", k, a, b);
            }
        }

        #[test]
        fn inverse_frobenius_below_frobenius(l in 1.0001f64..100.0, c2 in 0.001f64..0.999) {
            prop_assert!(Shrinker::InverseFrobenius.apply(l, c2) <= Shrinker::Frobenius.apply(l, c2));
        }

        #[test]
        fn oracle_bulk_positive(
            mut mu in proptest::collection::vec(1e-3f64..50.0, 1..40),
            extra in 0usize..40,
        ) {
            mu.sort_by(|a, b| b.total_cmp(a));
            let n = mu.len() + extra;
            let d = oracle_bulk_values(&mu, n, None, Execution::Sequential).unwrap();
            prop_assert!(d.iter().all(|v| *v > 0.0 && v.is_finite()));
            let companion = companion_spectrum(&mu, n);
            for &e in &[-1.0, 0.0, 3.0, 100.0] {
                prop_assert!(empirical_stieltjes(&companion, Complex64::new(e, 0.1)).im > 0.0);
            }
        }

        #[test]
        fn two_oracle_forms_agree(
            mut mu in proptest::collection::vec(0.05f64..20.0, 2..60),
            n in 1usize..120,
        ) {
            mu.sort_by(|a, b| b.total_cmp(a));
            // the m₁ identity needs every nonzero eigenvalue in the companion
            let n = n.max(mu.len());
            let a = oracle_bulk_values(&mu, n, None, Execution::Sequential).unwrap();
            let b = oracle_bulk_values_m1(&mu, n, None, Execution::Sequential).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn single_eigenvalue_oracle() {
        let d = oracle_bulk_values(&[2.0], 1, None, Execution::Sequential).unwrap();
        // m̂ = 1/(−i) = i, so d̂ = 1/(2·1)
        assert_abs_diff_eq!(d[0], 0.5, epsilon = 1e-15);
        assert!(oracle_bulk_values(&[], 3, None, Execution::Sequential).is_err());
        assert!(oracle_bulk_values(&[1.0, 0.0], 3, None, Execution::Sequential).is_err());
    }

    #[test]
    fn invert_two_bulk() {
        let f = two_bulk();
        let s = f.bulk_structure().unwrap();
        let l = invert_f_outlier(&f, &s, 44.522).unwrap();
        assert_abs_diff_eq!(l, 35.0, epsilon = 5e-2);
        let mu4 = f.eval(-0.25).unwrap();
        assert_abs_diff_eq!(invert_f_outlier(&f, &s, mu4).unwrap(), 4.0, epsilon = 1e-9);
        assert!(matches!(
            invert_f_outlier(&f, &s, s.right_edge(1)),
            Err(SpectraError::Domain(_))
        ));
        assert!(invert_f_outlier(&f, &s, 0.5 * (s.left_edge(1) + s.right_edge(1))).is_err());
    }

    #[test]
    fn invert_null_case() {
        let (c, d) = (2.0, 1.0);
        let f = mp(c);
        let s = f.bulk_structure().unwrap();
        let mu = 1.0 + d + (1.0 + 1.0 / d) / c;
        assert_abs_diff_eq!(invert_f_outlier(&f, &s, mu).unwrap(), 2.0, epsilon = 1e-10);
        let d = 3.0;
        let mu = 1.0 + d + (1.0 + 1.0 / d) / c;
        let closed = (1.0 - 1.0 / (c * d * d)) / (1.0 + 1.0 / (c * d));
        assert_abs_diff_eq!(cosine_sq(&f, &s, mu).unwrap(), closed, epsilon = 1e-10);
    }

    #[test]
    fn cosine_vanishes_at_edge() {
        let f = mp(2.0);
        let s = f.bulk_structure().unwrap();
        let c_near = cosine_sq(&f, &s, s.right_edge(1) + 1e-10).unwrap();
        assert!(c_near < 1e-3);
    }

    #[test]
    fn pipeline_matches_overlap_limit() {
        let mut pop = vec![18.0; 200];
        pop.extend(vec![1.0; 200]);
        let spikes = attach_spikes_by_sigma(&pop, &[35.0, 4.0]).unwrap();
        let model = PopulationModel::new(pop, spikes, 800).unwrap();
        let a = Analysis::new(&model, Thresholds::default()).unwrap();
        for p in &a.predictions {
            let c2 = cosine_sq(&a.f, &a.structure, p.location).unwrap();
            assert_abs_diff_eq!(c2, p.overlap.unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn oracle_outlier_examples() {
        let f = two_bulk();
        let s = f.bulk_structure().unwrap();
        let v = oracle_outlier_value(&f, &s, 35.0).unwrap();
        assert_abs_diff_eq!(v, 35.0 * 35.0 / f.eval(-1.0 / 35.0).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 35.0 * 35.0 / 44.522, epsilon = 5e-3);
        assert!(oracle_outlier_value(&f, &s, 1.2).is_err());

        let (c, d) = (2.0, 3.0);
        let g = mp(c);
        let t = g.bulk_structure().unwrap();
        let mu = 1.0 + d + (1.0 + 1.0 / d) / c;
        let v = oracle_outlier_value(&g, &t, 1.0 + d).unwrap();
        assert_abs_diff_eq!(v, (1.0 + d) * (1.0 + d) / mu, epsilon = 1e-12);
        let big = oracle_outlier_value(&g, &t, 1e7).unwrap();
        assert_abs_diff_eq!(big / 1e7, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn outlier_parts_telescope() {
        let mut pop = vec![18.0; 200];
        pop.extend(vec![1.0; 200]);
        let model = PopulationModel::new(pop.clone(), SpikeSet::empty(), 800).unwrap();
        let f = model.f_function();
        let s = f.bulk_structure().unwrap();
        for sigma in [35.0, 4.0] {
            let (a, b) = oracle_outlier_parts(&f, sigma, &pop).unwrap();
            let v = oracle_outlier_value(&f, &s, sigma).unwrap();
            assert_abs_diff_eq!(a + b, v, epsilon = 1e-10 * v);
        }
    }

    #[test]
    fn shrink_plans() {
        let pop = vec![1.0; 400];
        let spikes = attach_spikes(&pop, &[(0, 3.0)]).unwrap();
        let model = PopulationModel::new(pop, spikes, 800).unwrap();
        let f = model.f_function();
        let s = f.bulk_structure().unwrap();
        let opts = ShrinkOptions::default();
        let mut mu = vec![1.0 + 3.0 + (1.0 + 1.0 / 3.0) / 2.0];
        mu.extend((0..399).map(|k| 2.8 - 2.6 * k as f64 / 398.0));
        let plan = shrink_spectrum(&mu, &model, &f, &s, Loss::Shrinker(Shrinker::Frobenius), &opts)
            .unwrap();
        assert_eq!(plan.outliers, 1);
        let e = plan.entries[0];
        assert_eq!(e.method, Method::OutlierFormula);
        assert_abs_diff_eq!(e.l.unwrap(), 4.0, epsilon = 1e-9);
        // null bulk: lc² + s² equals the oracle value
        let oracle = oracle_outlier_value(&f, &s, 4.0).unwrap();
        assert!((e.beta - oracle).abs() / oracle <= 0.05);
        assert!(plan.entries[1..].iter().all(|e| e.method == Method::BulkPassthrough && e.beta == 1.0));

        let pure = shrink_spectrum(&mu[1..], &model, &f, &s, Loss::Shrinker(Shrinker::Stein), &opts)
            .unwrap();
        assert_eq!(pure.outliers, 0);

        let par = ShrinkOptions {
            exec: Execution::Parallel,
            ..ShrinkOptions::default()
        };
        let seq = ShrinkOptions {
            exec: Execution::Sequential,
            ..ShrinkOptions::default()
        };
        let a = shrink_spectrum(&mu, &model, &f, &s, Loss::FrobeniusOracle, &par).unwrap();
        let b = shrink_spectrum(&mu, &model, &f, &s, Loss::FrobeniusOracle, &seq).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries[0].method, Method::OutlierFormula);
        assert_abs_diff_eq!(a.entries[0].beta, oracle, epsilon = 1e-9);
        assert!(a.entries[1..].iter().all(|e| e.method == Method::BulkStieltjes && e.beta > 0.0));
        assert_eq!(a.notes.len(), 1);
    }
}
