//! Monte Carlo harness: draws data matrices, builds Q_g and the coupled Q_b,
//! and compares their eigen-structure with the predictions.
//!
//! Replicate `k` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `k`,
//! so a replicate's numbers do not depend on how many run or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};
use crate::exec::{map_indexed, Execution};
use crate::linalg::{dot, eigh, eigvalsh, sample_covariance, Matrix};
use crate::model::{PopulationModel, Thresholds, ValidationReport};
use crate::outliers::Analysis;
use crate::shrinkage::detect_outlier;
use crate::stieltjes::BulkStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryLaw {
    #[default]
    Gaussian,
    Rademacher,
    /// Uniform on [−√3, √3].
    Uniform,
}

impl EntryLaw {
    fn sample(self, rng: &mut impl Rng) -> f64 {
        match self {
            EntryLaw::Gaussian => rng.sample(StandardNormal),
            EntryLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryLaw::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

impl std::str::FromStr for EntryLaw {
    type Err = SpectraError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(EntryLaw::Gaussian),
            "rademacher" => Ok(EntryLaw::Rademacher),
            "uniform" => Ok(EntryLaw::Uniform),
            _ => Err(SpectraError::Parameter {
                name: "entry_law",
                reason: format!("unknown law '{s}'"),
            }),
        }
    }
}

/// M×N matrix with entries q/√N, q i.i.d. with mean 0 and variance 1.
pub fn draw_x(m: usize, n: usize, law: EntryLaw, rng: &mut impl Rng) -> Matrix {
    let scale = 1.0 / (n as f64).sqrt();
    Matrix::from_fn(m, n, |_, _| scale * law.sample(rng))
}

/// RNG for replicate `k`.
pub fn replicate_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub model: PopulationModel,
    pub replicates: usize,
    pub seed: u64,
    pub entry_law: EntryLaw,
    /// Build Q_b from the same X.
    pub coupled: bool,
    pub thresholds: Thresholds,
    pub exec: Execution,
}

impl SimulationConfig {
    pub fn new(model: PopulationModel) -> Self {
        Self {
            model,
            replicates: 1,
            seed: 0,
            entry_law: EntryLaw::Gaussian,
            coupled: true,
            thresholds: Thresholds::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierObservation {
    pub spike: usize,
    pub component: usize,
    pub rank: usize,
    pub mu: f64,
    /// ⟨u_{i,j}, v_{i,j}⟩².
    pub overlap: f64,
    /// u*Σ_g u for the same sample eigenvector.
    pub quadratic_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonOutlierOverlap {
    pub spike: usize,
    pub component: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    /// Eigenvalues of Q_g, descending.
    pub mu: Vec<f64>,
    /// Eigenvalues of Q_b, descending, when coupled.
    pub lambda: Option<Vec<f64>>,
    pub outliers: Vec<OutlierObservation>,
    /// μ_{i, r_i⁺+1} per component.
    pub extremal: Vec<f64>,
    /// |μ_{i,j+r_i⁺} − λ_{i,j}| for j = 1..N_i − r_i⁺, per component.
    pub sticking_gaps: Vec<Vec<f64>>,
    pub interlacing_violations: usize,
    /// Eigenvalues whose gap-midpoint component differs from the count-based one.
    pub relabel_mismatches: usize,
    /// Eigenvalues beyond an edge buffer.
    pub detected_outliers: usize,
    pub nonoutlier_overlaps: Vec<NonOutlierOverlap>,
}

impl ReplicateResult {
    /// μ_{i,j}, 1-based.
    pub fn mu_at(&self, s: &BulkStructure, i: usize, j: usize) -> f64 {
        self.mu[s.offset(i) + j - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeSummary {
    pub spike: usize,
    pub component: usize,
    pub rank: usize,
    pub predicted_location: f64,
    pub location_mean: f64,
    pub location_se: f64,
    pub predicted_overlap: f64,
    pub overlap_mean: f64,
    pub overlap_se: f64,
    pub quadratic_form_mean: f64,
    pub quadratic_form_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub seed: u64,
    pub entry_law: EntryLaw,
    pub coupled: bool,
    pub m: usize,
    pub n: usize,
    pub replicates: Vec<ReplicateResult>,
    pub summary: Vec<SpikeSummary>,
}

/// Mean and standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn quadratic_form(model: &PopulationModel, sigma: &[f64], u: &[f64]) -> f64 {
    match model.basis() {
        None => u.iter().zip(sigma).map(|(x, s)| s * x * x).sum(),
        Some(v) => {
            let coords = v.transpose().matvec(u);
            coords.iter().zip(sigma).map(|(x, s)| s * x * x).sum()
        }
    }
}

/// Count-based component of each global index, 1-based; 0 beyond Σ N_i.
fn count_labels(s: &BulkStructure, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    let mut k = 0;
    for (i, &c) in s.bulk_counts.iter().enumerate() {
        for _ in 0..c {
            if k < len {
                out[k] = i + 1;
            }
            k += 1;
        }
    }
    out
}

/// Component by gap midpoints (a_{2i} + a_{2i+1})/2.
fn midpoint_label(s: &BulkStructure, e: f64) -> usize {
    for i in 1..s.p {
        if e > 0.5 * (s.left_edge(i) + s.right_edge(i + 1)) {
            return i;
        }
    }
    s.p
}

/// λ_{i+r} ≤ μ_i ≤ λ_{i−r} with out-of-range λ read as ±∞.
pub fn interlacing_violations(mu: &[f64], lambda: &[f64], r: usize) -> usize {
    let scale = lambda.first().copied().unwrap_or(1.0).abs().max(1.0);
    let tol = 1e-9 * scale;
    mu.iter()
        .enumerate()
        .filter(|&(i, &m)| {
            let upper = if i >= r { lambda[i - r] } else { f64::INFINITY };
            let lower = lambda.get(i + r).copied().unwrap_or(f64::NEG_INFINITY);
            m > upper + tol || m < lower - tol
        })
        .count()
}

fn run_replicate(
    cfg: &SimulationConfig,
    analysis: &Analysis,
    sg_half: &crate::linalg::SymMatrix,
    sb_half: &crate::linalg::SymMatrix,
    sigma_g: &[f64],
    k: usize,
) -> Result<ReplicateResult> {
    let model = &cfg.model;
    let s = &analysis.structure;
    let cls = &analysis.classification;
    let (m, n) = (model.m(), model.n());
    let mut rng = replicate_rng(cfg.seed, k);
    let x = draw_x(m, n, cfg.entry_law, &mut rng);
    let qg = sample_covariance(sg_half, &x)?;
    let eig = eigh(&qg)?;
    let mu = eig.values.clone();
    let lambda = if cfg.coupled {
        if model.spikes().is_empty() {
            Some(mu.clone())
        } else {
            Some(eigvalsh(&sample_covariance(sb_half, &x)?)?)
        }
    } else {
        None
    };

    let mut outliers = Vec::new();
    let mut nonoutlier = Vec::new();
    for c in cls.outliers() {
        let idx = s.offset(c.component) + c.rank - 1;
        let u = eig.vector(idx);
        let v = model.spike_direction(c.spike);
        outliers.push(OutlierObservation {
            spike: c.spike,
            component: c.component,
            rank: c.rank,
            mu: mu[idx],
            overlap: dot(&u, &v).powi(2),
            quadratic_form: quadratic_form(model, sigma_g, &u),
        });
        for l in 1..=s.p {
            let count = s.bulk_counts[l - 1] - cls.r_plus[l - 1];
            for j in [1, 2, count / 2] {
                if j == 0 || j > count {
                    continue;
                }
                let w = eig.vector(s.offset(l) + cls.r_plus[l - 1] + j - 1);
                nonoutlier.push(NonOutlierOverlap {
                    spike: c.spike,
                    component: l,
                    j,
                    value: dot(&w, &v).powi(2),
                });
            }
        }
    }

    let mut extremal = Vec::with_capacity(s.p);
    let mut gaps = Vec::with_capacity(s.p);
    for i in 1..=s.p {
        let rp = cls.r_plus[i - 1];
        let count = s.bulk_counts[i - 1];
        let base = s.offset(i);
        extremal.push(mu.get(base + rp).copied().unwrap_or(f64::NAN));
        gaps.push(match &lambda {
            Some(lam) => (1..=count.saturating_sub(rp))
                .map(|j| (mu[base + j + rp - 1] - lam[base + j - 1]).abs())
                .collect(),
            None => Vec::new(),
        });
    }

    let labels = count_labels(s, mu.len());
    let relabel_mismatches = mu
        .iter()
        .zip(&labels)
        .filter(|&(&e, &l)| l != 0 && midpoint_label(s, e) != l)
        .count();
    let detected_outliers = mu
        .iter()
        .filter(|&&e| detect_outlier(s, e, n, &cfg.thresholds).is_some())
        .count();
    let interlacing = lambda
        .as_ref()
        .map(|lam| interlacing_violations(&mu, lam, model.spikes().r()))
        .unwrap_or(0);

    Ok(ReplicateResult {
        replicate: k,
        mu,
        lambda,
        outliers,
        extremal,
        sticking_gaps: gaps,
        interlacing_violations: interlacing,
        relabel_mismatches,
        detected_outliers,
        nonoutlier_overlaps: nonoutlier,
    })
}

pub fn run(cfg: &SimulationConfig) -> Result<SimulationResult> {
    let analysis = Analysis::new(&cfg.model, cfg.thresholds)?;
    run_with(cfg, &analysis)
}

/// Runs with a precomputed analysis of `cfg.model`.
pub fn run_with(cfg: &SimulationConfig, analysis: &Analysis) -> Result<SimulationResult> {
    if cfg.replicates == 0 {
        return Err(SpectraError::Parameter {
            name: "replicates",
            reason: "at least one replicate is required".into(),
        });
    }
    let model = &cfg.model;
    let sigma_g = model.spiked_population();
    let sg_half = model.sqrt_covariance(&sigma_g)?;
    let sb_half = model.sqrt_covariance(model.population())?;
    let reps = map_indexed(cfg.exec, cfg.replicates, |k| {
        run_replicate(cfg, analysis, &sg_half, &sb_half, &sigma_g, k).map_err(|e| {
            SpectraError::Replicate {
                replicate: k,
                source: Box::new(e),
            }
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let summary = analysis
        .classification
        .outliers()
        .map(|c| {
            let pick = |g: fn(&OutlierObservation) -> f64| -> Vec<f64> {
                reps.iter()
                    .flat_map(|r| r.outliers.iter().filter(|o| o.spike == c.spike).map(g))
                    .collect()
            };
            let (lm, lse) = mean_se(&pick(|o| o.mu));
            let (om, ose) = mean_se(&pick(|o| o.overlap));
            let (qm, qse) = mean_se(&pick(|o| o.quadratic_form));
            let pred = &analysis.predictions[c.spike];
            SpikeSummary {
                spike: c.spike,
                component: c.component,
                rank: c.rank,
                predicted_location: pred.location,
                location_mean: lm,
                location_se: lse,
                predicted_overlap: pred.overlap.unwrap_or(f64::NAN),
                overlap_mean: om,
                overlap_se: ose,
                quadratic_form_mean: qm,
                quadratic_form_se: qse,
            }
        })
        .collect();

    Ok(SimulationResult {
        seed: cfg.seed,
        entry_law: cfg.entry_law,
        coupled: cfg.coupled,
        m: model.m(),
        n: model.n(),
        replicates: reps,
        summary,
    })
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

/// Frequency proxies for the theorems, each rate multiplied by `slack`.
pub fn verify_theorems(result: &SimulationResult, analysis: &Analysis, slack: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let s = &analysis.structure;
    let th = &analysis.thresholds;
    let n = result.n as f64;
    let reps = &result.replicates;

    for p in analysis.predictions.iter().filter(|p| p.is_outlier) {
        let obs: Vec<&OutlierObservation> = reps
            .iter()
            .flat_map(|r| r.outliers.iter().filter(|o| o.spike == p.spike))
            .collect();
        let tol = slack * p.half_width;
        let hits = obs.iter().filter(|o| (o.mu - p.location).abs() <= tol).count();
        report.push(
            format!("outlier_location[spike {}]", p.spike),
            fraction(hits, obs.len()) >= 0.95,
            fraction(hits, obs.len()),
            0.95,
            format!("|mu - {:.6}| <= {:.3e}", p.location, tol),
        );
        let u = p.overlap.unwrap_or(f64::NAN);
        let r = p.overlap_error.unwrap_or(f64::INFINITY);
        let hits = obs.iter().filter(|o| (o.overlap - u).abs() <= slack * r).count();
        report.push(
            format!("outlier_overlap[spike {}]", p.spike),
            fraction(hits, obs.len()) >= 0.95,
            fraction(hits, obs.len()),
            0.95,
            format!("|<u,v>^2 - {u:.6}| <= {:.3e}", slack * r),
        );
    }

    let rate = n.powf(-2.0 / 3.0 + th.c_exponent * th.eps0);
    for i in 1..=s.p {
        let tol = slack * rate * (th.kappa * s.edge_scales[2 * i - 2]).max(1.0);
        let vals: Vec<f64> = reps.iter().map(|r| r.extremal[i - 1]).filter(|v| v.is_finite()).collect();
        let hits = vals.iter().filter(|&&v| (v - s.right_edge(i)).abs() <= tol).count();
        report.push(
            format!("extremal_nonoutlier[component {i}]"),
            fraction(hits, vals.len()) >= 0.95,
            fraction(hits, vals.len()),
            0.95,
            format!("|mu - a_{}| <= {tol:.3e}", 2 * i - 1),
        );
    }

    if result.coupled {
        for b in &analysis.sticking {
            let i = b.component;
            let bound = slack * b.bound_at(1);
            let vals: Vec<f64> = reps.iter().filter_map(|r| r.sticking_gaps[i - 1].first().copied()).collect();
            let hits = vals.iter().filter(|&&g| g <= bound).count();
            report.push(
                format!("sticking[component {i}]"),
                fraction(hits, vals.len()) >= 0.9,
                fraction(hits, vals.len()),
                0.9,
                format!("{:?} regime, gap <= {bound:.3e}", b.regime),
            );
        }
        let total: usize = reps.iter().map(|r| r.interlacing_violations).sum();
        report.push("interlacing", total == 0, total as f64, 0.0, "violations across replicates");
    }

    let cls = &analysis.classification;
    let mut hits = 0;
    let mut total = 0;
    for r in reps {
        for o in &r.nonoutlier_overlaps {
            let c = cls.of_spike(o.spike);
            let b = crate::outliers::nonoutlier_vector_bound(s, cls, c.spike, o.component, o.j, th.eps1)
                .unwrap_or(f64::INFINITY);
            total += 1;
            if o.value <= slack * b {
                hits += 1;
            }
        }
    }
    if total > 0 {
        report.push(
            "nonoutlier_overlap",
            fraction(hits, total) >= 0.95,
            fraction(hits, total),
            0.95,
            "<v_k, u_{l,j}>^2 against the kappa bound",
        );
    }

    let expected = cls.total_outliers();
    let hits = reps.iter().filter(|r| r.detected_outliers == expected).count();
    report.push(
        "outlier_count",
        fraction(hits, reps.len()) >= 0.95,
        fraction(hits, reps.len()),
        0.95,
        format!("{expected} eigenvalues beyond the edge buffers"),
    );
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityReport {
    /// Share of (replicate, component, j) within slack times the rigidity scale.
    pub fraction_within: f64,
    pub checked: usize,
    /// Per component, the median of |λ_{i,j} − γ_{i,j}| over replicates and j ≤ 10.
    pub edge_median: Vec<f64>,
    /// Per component, the median over the middle half of the component.
    pub bulk_median: Vec<f64>,
    /// Crossings where γ and λ orders disagree.
    pub crossings: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// |λ_{i,j} − γ_{i,j}| against N^{−2/3+ε₁}(j ∧ (N_i+1−j))^{−1/3}·slack.
/// Uses λ when present, else μ.
pub fn rigidity_check(
    result: &SimulationResult,
    gammas: &[Vec<f64>],
    s: &BulkStructure,
    eps1: f64,
    slack: f64,
) -> RigidityReport {
    let n = result.n as f64;
    let mut within = 0;
    let mut checked = 0;
    let mut crossings = 0;
    let mut edge = vec![Vec::new(); s.p];
    let mut bulk = vec![Vec::new(); s.p];
    for r in &result.replicates {
        let vals = r.lambda.as_ref().unwrap_or(&r.mu);
        for (i, g) in gammas.iter().enumerate() {
            let base = s.offset(i + 1);
            let count = g.len();
            for j in 1..=count {
                let Some(&l) = vals.get(base + j - 1) else { continue };
                let dev = (l - g[j - 1]).abs();
                let k = j.min(count + 1 - j) as f64;
                let bound = slack * n.powf(-2.0 / 3.0 + eps1) * k.powf(-1.0 / 3.0);
                checked += 1;
                if dev <= bound {
                    within += 1;
                }
                if j <= 10 {
                    edge[i].push(dev);
                }
                if j > count / 4 && j <= 3 * count / 4 {
                    bulk[i].push(dev);
                }
                if j > 1 && (g[j - 1] > g[j - 2]) != (l > vals[base + j - 2]) {
                    crossings += 1;
                }
            }
        }
    }
    RigidityReport {
        fraction_within: fraction(within, checked),
        checked,
        edge_median: edge.into_iter().map(median).collect(),
        bulk_median: bulk.into_iter().map(median).collect(),
        crossings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{attach_spikes, SpikeSet};
    use approx::assert_abs_diff_eq;

    #[test]
    fn entry_law_moments() {
        let n = 1_000_000;
        let mut rng = replicate_rng(7, 0);
        for law in [EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::Uniform] {
            let x = draw_x(1, n, law, &mut rng);
            let q: Vec<f64> = x.as_slice().iter().map(|v| v * (n as f64).sqrt()).collect();
            let mean = q.iter().sum::<f64>() / n as f64;
            let var = q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4e-3, "{law:?} mean {mean}");
            assert!((var - 1.0).abs() < 0.01, "{law:?} var {var}");
            if law == EntryLaw::Rademacher {
                assert!(q.iter().all(|v| (v.abs() - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn streams_are_independent_of_replicate_count() {
        let a = draw_x(3, 4, EntryLaw::Gaussian, &mut replicate_rng(11, 5));
        let b = draw_x(3, 4, EntryLaw::Gaussian, &mut replicate_rng(11, 5));
        let c = draw_x(3, 4, EntryLaw::Gaussian, &mut replicate_rng(11, 6));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn interlacing_counter() {
        assert_eq!(interlacing_violations(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0], 0), 0);
        assert_eq!(interlacing_violations(&[5.0, 2.0, 1.0], &[3.0, 2.0, 1.0], 1), 0);
        assert_eq!(interlacing_violations(&[5.0, 4.0, 1.0], &[3.0, 2.0, 1.0], 1), 1);
    }

    #[test]
    fn zero_spikes_coupled_is_identical() {
        let model = PopulationModel::new(vec![1.0; 30], SpikeSet::empty(), 60).unwrap();
        let mut cfg = SimulationConfig::new(model);
        cfg.replicates = 2;
        let r = run(&cfg).unwrap();
        for rep in &r.replicates {
            assert_eq!(rep.lambda.as_ref().unwrap(), &rep.mu);
            assert!(rep.sticking_gaps[0].iter().all(|g| *g == 0.0));
            assert_eq!(rep.interlacing_violations, 0);
        }
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let pop = vec![1.0; 40];
        let spikes = attach_spikes(&pop, &[(0, 4.0), (1, 2.0)]).unwrap();
        let model = PopulationModel::new(pop, spikes, 80).unwrap();
        let mut cfg = SimulationConfig::new(model);
        cfg.replicates = 4;
        cfg.seed = 99;
        cfg.exec = Execution::Parallel;
        let a = serde_json::to_string(&run(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&cfg).unwrap()).unwrap();
        cfg.exec = Execution::Sequential;
        let c = serde_json::to_string(&run(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn small_run_invariants() {
        let pop = vec![1.0; 60];
        let spikes = attach_spikes(&pop, &[(3, 5.0)]).unwrap();
        let model = PopulationModel::new(pop, spikes, 120).unwrap();
        let mut cfg = SimulationConfig::new(model.clone());
        cfg.replicates = 3;
        cfg.entry_law = EntryLaw::Rademacher;
        let r = run(&cfg).unwrap();
        for rep in &r.replicates {
            assert!(rep.mu.iter().all(|v| *v >= -1e-12));
            assert!(rep.lambda.as_ref().unwrap().iter().all(|v| *v >= -1e-12));
            assert_eq!(rep.interlacing_violations, 0);
            assert_eq!(rep.outliers.len(), 1);
            let o = &rep.outliers[0];
            assert!(o.overlap > 0.0 && o.overlap <= 1.0 + 1e-12);
            assert!(o.quadratic_form > 0.0);
        }
        assert_eq!(r.summary.len(), 1);
        assert!(r.summary[0].location_se > 0.0);
    }

    #[test]
    fn overlaps_sum_to_one() {
        let pop = vec![1.0; 25];
        let spikes = attach_spikes(&pop, &[(0, 3.0)]).unwrap();
        let model = PopulationModel::new(pop, spikes, 50).unwrap();
        let sg = model.sqrt_covariance(&model.spiked_population()).unwrap();
        let x = draw_x(25, 50, EntryLaw::Gaussian, &mut replicate_rng(3, 0));
        let eig = eigh(&sample_covariance(&sg, &x).unwrap()).unwrap();
        let v = model.spike_direction(0);
        let total: f64 = (0..25).map(|k| dot(&eig.vector(k), &v).powi(2)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn mean_and_se() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5);
        assert_abs_diff_eq!(se, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
        assert!(mean_se(&[]).0.is_nan());
    }

    #[test]
    fn zero_replicates_rejected() {
        let model = PopulationModel::new(vec![1.0; 10], SpikeSet::empty(), 20).unwrap();
        let mut cfg = SimulationConfig::new(model);
        cfg.replicates = 0;
        assert!(run(&cfg).is_err());
    }
}
