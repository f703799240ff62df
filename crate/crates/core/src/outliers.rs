//! Spike classification, outlier locations and eigenvector overlaps with
//! their error terms, sticking and non-outlier eigenvector bounds.
//!
//! A spike σᵍ attaches to component i through x = −1/σᵍ. Its margin is
//! `x − x_{2i−1}`; it produces an outlier near f(x) when the margin is positive
//! and x stays `c₀` below `x_{2(i−1)}`. Whether the margin also clears the
//! finite-N rate `N^{−1/3+ε₀}` is reported separately as `meets_rate`.

use serde::Serialize;

use crate::error::{Result, SpectraError};
use crate::model::{PopulationModel, Thresholds, ValidationReport};
use crate::stieltjes::{BulkStructure, FFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpikeClass {
    /// Position in the model's spike set.
    pub spike: usize,
    pub sigma_g: f64,
    /// 1-based component.
    pub component: usize,
    /// 1-based rank among the spikes of the component, by σᵍ descending.
    pub rank: usize,
    pub is_outlier: bool,
    /// margin ≥ N^{−1/3+ε₀} on top of `is_outlier`.
    pub meets_rate: bool,
    /// −1/σᵍ − x_{2i−1}; negative inside the component's preimage.
    pub margin: f64,
    pub threshold_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeClassification {
    pub spikes: Vec<SpikeClass>,
    /// Spikes per component.
    pub r: Vec<usize>,
    /// Outliers per component.
    pub r_plus: Vec<usize>,
    /// Outliers per component that also meet the finite-N rate.
    pub r_plus_rate: Vec<usize>,
    pub c0: Option<f64>,
    pub n: usize,
}

impl SpikeClassification {
    pub fn outliers(&self) -> impl Iterator<Item = &SpikeClass> {
        self.spikes.iter().filter(|s| s.is_outlier)
    }

    pub fn total_outliers(&self) -> usize {
        self.r_plus.iter().sum()
    }

    pub fn of_spike(&self, k: usize) -> &SpikeClass {
        &self.spikes[k]
    }
}

/// Smallest gap `x_{2(i−1)} − x_{2i−1}` over components i ≥ 2.
fn min_component_gap(s: &BulkStructure) -> Option<f64> {
    (2..=s.p)
        .map(|i| s.x(2 * i - 2) - s.x(2 * i - 1))
        .min_by(f64::total_cmp)
}

pub fn classify_spikes(
    model: &PopulationModel,
    s: &BulkStructure,
    eps0: f64,
    c0: Option<f64>,
) -> Result<SpikeClassification> {
    let f = model.f_function();
    let n = model.n();
    let gap = min_component_gap(s);
    let c0 = match (c0, gap) {
        (Some(c), Some(g)) if !(c > 0.0 && c < g / 2.0) => {
            return Err(SpectraError::Parameter {
                name: "c0",
                reason: format!("{c} must lie in (0, {})", g / 2.0),
            })
        }
        (Some(c), _) => Some(c),
        (None, Some(g)) => Some(g / 4.0),
        (None, None) => None,
    };
    let threshold = (n as f64).powf(-1.0 / 3.0 + eps0);
    let mut spikes = Vec::with_capacity(model.spikes().r());
    for (k, sp) in model.spikes().spikes().iter().enumerate() {
        let x = -1.0 / sp.sigma_g;
        f.eval(x).map_err(|e| {
            SpectraError::Structure(format!("spike {k} (sigma_g = {}): {e}", sp.sigma_g))
        })?;
        let i = s.component_of_spike(x).ok_or_else(|| {
            SpectraError::Structure(format!(
                "spike {k} at -1/sigma_g = {x} lies in no component interval"
            ))
        })?;
        let margin = x - s.x(2 * i - 1);
        let separated = i == 1 || x < s.x(2 * i - 2) - c0.unwrap_or(0.0);
        spikes.push(SpikeClass {
            spike: k,
            sigma_g: sp.sigma_g,
            component: i,
            rank: 0,
            is_outlier: margin > 0.0 && separated,
            meets_rate: margin >= threshold && separated,
            margin,
            threshold_used: threshold,
        });
    }
    let mut r = vec![0; s.p];
    let mut r_plus = vec![0; s.p];
    let mut r_plus_rate = vec![0; s.p];
    for i in 1..=s.p {
        let mut members: Vec<usize> = (0..spikes.len())
            .filter(|&k| spikes[k].component == i)
            .collect();
        members.sort_by(|&a, &b| {
            spikes[b]
                .sigma_g
                .total_cmp(&spikes[a].sigma_g)
                .then(a.cmp(&b))
        });
        for (rank, &k) in members.iter().enumerate() {
            spikes[k].rank = rank + 1;
        }
        r[i - 1] = members.len();
        r_plus[i - 1] = members.iter().filter(|&&k| spikes[k].is_outlier).count();
        r_plus_rate[i - 1] = members.iter().filter(|&&k| spikes[k].meets_rate).count();
    }
    Ok(SpikeClassification {
        spikes,
        r,
        r_plus,
        r_plus_rate,
        c0,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeFallback {
    pub location: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierPrediction {
    pub spike: usize,
    pub component: usize,
    pub rank: usize,
    pub is_outlier: bool,
    pub sigma_g: f64,
    /// f(−1/σᵍ) for outliers, the right edge a_{2i−1} otherwise.
    pub location: f64,
    pub half_width: f64,
    pub overlap: Option<f64>,
    pub overlap_error: Option<f64>,
    pub edge_fallback: Option<EdgeFallback>,
}

/// u = (1/σᵍ)·f′(−1/σᵍ)/f(−1/σᵍ).
pub fn overlap_formula(f: &FFunction, sigma_g: f64) -> Result<f64> {
    let x = -1.0 / sigma_g;
    Ok(f.derivative(x, 1)? / (sigma_g * f.eval(x)?))
}

/// Limit of ⟨u, v⟩² for outlier spike `k`.
pub fn overlap_limit(f: &FFunction, cls: &SpikeClassification, k: usize) -> Result<f64> {
    let c = cls.of_spike(k);
    if !c.is_outlier {
        return Err(SpectraError::Precondition(format!(
            "spike {k} (sigma_g = {}) is not an outlier",
            c.sigma_g
        )));
    }
    overlap_formula(f, c.sigma_g)
}

pub fn predict_outliers(
    f: &FFunction,
    s: &BulkStructure,
    cls: &SpikeClassification,
    th: &Thresholds,
) -> Result<Vec<OutlierPrediction>> {
    let n = cls.n as f64;
    let mut out = Vec::with_capacity(cls.spikes.len());
    for c in &cls.spikes {
        let edge = s.right_edge(c.component);
        let fallback = EdgeFallback {
            location: edge,
            half_width: n.powf(-2.0 / 3.0 + th.c_exponent * th.eps0),
        };
        let pred = if c.is_outlier {
            OutlierPrediction {
                spike: c.spike,
                component: c.component,
                rank: c.rank,
                is_outlier: true,
                sigma_g: c.sigma_g,
                location: f.eval(-1.0 / c.sigma_g)?,
                half_width: n.powf(-0.5 + th.c_exponent * th.eps0) * c.margin.sqrt(),
                overlap: Some(overlap_formula(f, c.sigma_g)?),
                overlap_error: Some(overlap_error_bound(cls, c.spike, c.spike)),
                edge_fallback: None,
            }
        } else {
            OutlierPrediction {
                spike: c.spike,
                component: c.component,
                rank: c.rank,
                is_outlier: false,
                sigma_g: c.sigma_g,
                location: edge,
                half_width: fallback.half_width,
                overlap: None,
                overlap_error: None,
                edge_fallback: Some(fallback),
            }
        };
        out.push(pred);
    }
    Ok(out)
}

fn inv_gap(a: f64, b: f64) -> f64 {
    (-1.0 / a + 1.0 / b).abs()
}

/// ν_k(A): distance in −1/σᵍ from spike `k` to the spikes on the other side of `A`.
/// Minima over empty sets are +∞.
pub fn nu(cls: &SpikeClassification, k: usize, a: &[usize]) -> f64 {
    let inside = a.contains(&k);
    let sk = cls.spikes[k].sigma_g;
    cls.spikes
        .iter()
        .filter(|o| o.spike != k && a.contains(&o.spike) != inside)
        .map(|o| inv_gap(sk, o.sigma_g))
        .fold(f64::INFINITY, f64::min)
}

/// R(k₁, k₂, N), with ν taken relative to A = {k₁}. Infinite when ν = 0.
pub fn overlap_error_bound(cls: &SpikeClassification, k1: usize, k2: usize) -> f64 {
    overlap_error_bound_with_nu(cls, k1, k2, nu(cls, k2, &[k1]))
}

/// R(k₁, k₂, N) with a caller-supplied ν.
pub fn overlap_error_bound_with_nu(cls: &SpikeClassification, k1: usize, k2: usize, nu2: f64) -> f64 {
    let n = cls.n as f64;
    let same = k1 == k2;
    let m1 = cls.spikes[k1].margin;
    let diag = if same { n.powf(-0.5) * m1.powf(-0.5) } else { 0.0 };
    let edge = if same { m1.powi(-2) } else { 0.0 };
    let r = diag + (nu2.powi(-2) + edge) / n;
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionLimit {
    /// Σ_{k∈A} u_k w_k².
    pub value: f64,
    /// R(w, A).
    pub bound: f64,
}

/// Limit of ⟨w, P_A w⟩ for `w` given by its coordinates on every spike
/// direction (`coords[k] = ⟨v_k, w⟩`).
pub fn projection_limit(
    f: &FFunction,
    cls: &SpikeClassification,
    coords: &[f64],
    a: &[usize],
) -> Result<ProjectionLimit> {
    if coords.len() != cls.spikes.len() {
        return Err(SpectraError::Dimension {
            expected: format!("{} spike coordinates", cls.spikes.len()),
            found: format!("{}", coords.len()),
        });
    }
    let mut value = 0.0;
    for &k in a {
        if k >= cls.spikes.len() {
            return Err(SpectraError::Precondition(format!("spike {k} does not exist")));
        }
        value += overlap_limit(f, cls, k)? * coords[k] * coords[k];
    }
    let n = cls.n as f64;
    let r = cls.spikes.len();
    let nus: Vec<f64> = (0..r).map(|k| nu(cls, k, a)).collect();
    let margin = |k: usize| cls.spikes[k].margin;
    let mut bound = 0.0;
    for k1 in 0..r {
        for k2 in 0..r {
            let w = (coords[k1] * coords[k2]).abs();
            if w == 0.0 {
                continue;
            }
            let (in1, in2) = (a.contains(&k1), a.contains(&k2));
            let gap = inv_gap(cls.spikes[k1].sigma_g, cls.spikes[k2].sigma_g);
            let mut half = 0.0;
            if in1 && in2 {
                half += margin(k1).powf(-0.25) * margin(k2).powf(-0.25);
            }
            if in1 && !in2 {
                half += margin(k1).sqrt() / gap;
            }
            if !in1 && in2 {
                half += margin(k2).sqrt() / gap;
            }
            let t1 = 1.0 / nus[k1] + if in1 { 1.0 / margin(k1) } else { 0.0 };
            let t2 = 1.0 / nus[k2] + if in2 { 1.0 / margin(k2) } else { 0.0 };
            bound += w * (half / n.sqrt() + t1 * t2 / n);
        }
    }
    Ok(ProjectionLimit { value, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Sticking,
    Rigidity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StickingBound {
    pub component: usize,
    /// min over the component's spikes of |−1/σᵍ − x_{2i−1}|; `None` without spikes.
    pub alpha_plus: Option<f64>,
    /// N^{2ε₁}/(N·α⁺) when spikes are present, else the rigidity scale at j = 1.
    pub bound: f64,
    pub regime: Regime,
    pub n: usize,
    pub count: usize,
    pub eps1: f64,
}

impl StickingBound {
    /// N^{−2/3+ε₁}·(j ∧ (N_i+1−j))^{−1/3}.
    pub fn rigidity_at(&self, j: usize) -> f64 {
        let n = self.n as f64;
        let k = j.min(self.count + 1 - j).max(1) as f64;
        n.powf(-2.0 / 3.0 + self.eps1) * k.powf(-1.0 / 3.0)
    }

    /// Bound on |μ_{i,j+r⁺} − λ_{i,j}| for the regime in force.
    pub fn bound_at(&self, j: usize) -> f64 {
        match self.regime {
            Regime::Sticking => self.bound,
            Regime::Rigidity => self.rigidity_at(j),
        }
    }
}

pub fn sticking_bounds(s: &BulkStructure, cls: &SpikeClassification, eps1: f64) -> Vec<StickingBound> {
    let n = cls.n as f64;
    (1..=s.p)
        .map(|i| {
            let alpha = cls
                .spikes
                .iter()
                .filter(|c| c.component == i)
                .map(|c| c.margin.abs())
                .min_by(f64::total_cmp);
            let mut b = StickingBound {
                component: i,
                alpha_plus: alpha,
                bound: 0.0,
                regime: Regime::Rigidity,
                n: cls.n,
                count: s.bulk_counts[i - 1],
                eps1,
            };
            match alpha {
                Some(a) => {
                    b.bound = n.powf(2.0 * eps1) / (n * a);
                    if a >= n.powf(-1.0 / 3.0 + 2.0 * eps1) {
                        b.regime = Regime::Sticking;
                    }
                }
                None => b.bound = b.rigidity_at(1),
            }
            b
        })
        .collect()
}

/// κᵈ_{l,j} = (j ∧ (N_l+1−j))^{2/3}·N^{−2/3}.
pub fn kappa_d(s: &BulkStructure, l: usize, j: usize, n: usize) -> f64 {
    let count = s.bulk_counts[l - 1];
    let k = j.min(count + 1 - j).max(1) as f64;
    k.powf(2.0 / 3.0) * (n as f64).powf(-2.0 / 3.0)
}

/// Bound on ⟨v_k, u_{l,j}⟩² for outlier spike `k` and the non-outlier sample
/// eigenvector at rank `j` of component `l`.
pub fn nonoutlier_vector_bound(
    s: &BulkStructure,
    cls: &SpikeClassification,
    k: usize,
    l: usize,
    j: usize,
    eps1: f64,
) -> Result<f64> {
    if l == 0 || l > s.p || j == 0 || j > s.bulk_counts[l - 1] {
        return Err(SpectraError::Precondition(format!(
            "({l}, {j}) is not a bulk index"
        )));
    }
    let c = cls.of_spike(k);
    let n = cls.n as f64;
    let d = 1.0 / c.sigma_g + s.x(2 * c.component - 1);
    Ok(n.powf(6.0 * eps1) / (n * (kappa_d(s, l, j, cls.n) + d * d)))
}

/// Generalized version for ⟨w, u_{l,j}⟩² given w's spike coordinates.
pub fn nonoutlier_projection_bound(
    s: &BulkStructure,
    cls: &SpikeClassification,
    coords: &[f64],
    l: usize,
    j: usize,
    eps1: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (k, w) in coords.iter().enumerate() {
        if *w != 0.0 {
            total += w * w * nonoutlier_vector_bound(s, cls, k, l, j, eps1)?;
        }
    }
    Ok(total)
}

/// ν_k(A) ≥ margin_k^{−1/2}·N^{−1/2+ε₀} for every outlier k.
pub fn check_nonoverlap(cls: &SpikeClassification, a: &[usize], eps0: f64) -> ValidationReport {
    let n = cls.n as f64;
    let mut report = ValidationReport::default();
    for c in cls.outliers() {
        let v = nu(cls, c.spike, a);
        let need = c.margin.powf(-0.5) * n.powf(-0.5 + eps0);
        report.push(
            format!("non_overlap[spike {}]", c.spike),
            v >= need,
            v,
            need,
            format!("component {}, rank {}", c.component, c.rank),
        );
    }
    report
}

/// All predictions for one model with the given thresholds.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub f: FFunction,
    pub structure: BulkStructure,
    pub classification: SpikeClassification,
    pub predictions: Vec<OutlierPrediction>,
    pub sticking: Vec<StickingBound>,
    pub thresholds: Thresholds,
}

impl Analysis {
    pub fn new(model: &PopulationModel, thresholds: Thresholds) -> Result<Self> {
        let f = model.f_function();
        let structure = f.bulk_structure()?;
        Self::with_structure(model, f, structure, thresholds)
    }

    pub fn with_structure(
        model: &PopulationModel,
        f: FFunction,
        structure: BulkStructure,
        thresholds: Thresholds,
    ) -> Result<Self> {
        let classification = classify_spikes(model, &structure, thresholds.eps0, thresholds.c0)?;
        let predictions = predict_outliers(&f, &structure, &classification, &thresholds)?;
        let sticking = sticking_bounds(&structure, &classification, thresholds.eps1);
        Ok(Self {
            f,
            structure,
            classification,
            predictions,
            sticking,
            thresholds,
        })
    }

    pub fn report(&self) -> OutlierReport {
        let spikes = self
            .predictions
            .iter()
            .map(|p| SpikeReport {
                spike: p.spike,
                sigma_g: p.sigma_g,
                component: p.component,
                rank: p.rank,
                is_outlier: p.is_outlier,
                margin: self.classification.spikes[p.spike].margin,
                predicted_location: p.location,
                half_width: p.half_width,
                overlap: p.overlap,
                overlap_error: p.overlap_error,
                sticking: self.sticking[p.component - 1],
            })
            .collect();
        OutlierReport {
            spikes,
            c0: self.classification.c0,
            r: self.classification.r.clone(),
            r_plus: self.classification.r_plus.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeReport {
    pub spike: usize,
    pub sigma_g: f64,
    pub component: usize,
    pub rank: usize,
    pub is_outlier: bool,
    pub margin: f64,
    pub predicted_location: f64,
    pub half_width: f64,
    pub overlap: Option<f64>,
    pub overlap_error: Option<f64>,
    pub sticking: StickingBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierReport {
    pub spikes: Vec<SpikeReport>,
    pub c0: Option<f64>,
    pub r: Vec<usize>,
    pub r_plus: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{attach_spikes, attach_spikes_by_sigma, SpikeSet};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn null_model(c: f64, ds: &[f64], m: usize) -> PopulationModel {
        let pop = vec![1.0; m];
        let list: Vec<(usize, f64)> = ds.iter().enumerate().map(|(i, &d)| (i, d)).collect();
        let spikes = attach_spikes(&pop, &list).unwrap();
        PopulationModel::new(pop, spikes, (c * m as f64) as usize).unwrap()
    }

    fn two_bulk(scale: f64) -> PopulationModel {
        let mut pop = vec![18.0 * scale; 200];
        pop.extend(vec![scale; 200]);
        let spikes = attach_spikes_by_sigma(&pop, &[35.0 * scale, 4.0 * scale]).unwrap();
        PopulationModel::new(pop, spikes, 800).unwrap()
    }

    #[test]
    fn bbp_threshold() {
        let t = Thresholds::default();
        let a = Analysis::new(&null_model(2.0, &[0.5, 1.0], 400), t).unwrap();
        let by_d: Vec<(f64, bool)> = a
            .classification
            .spikes
            .iter()
            .map(|c| (c.sigma_g - 1.0, c.is_outlier))
            .collect();
        assert_eq!(by_d, vec![(1.0, true), (0.5, false)]);
    }

    #[test]
    fn two_bulk_predictions() {
        let model = two_bulk(1.0);
        let a = Analysis::new(&model, Thresholds::default()).unwrap();
        let mut locs: Vec<(usize, f64)> = a
            .predictions
            .iter()
            .map(|p| {
                assert!(p.is_outlier);
                (p.component, p.location)
            })
            .collect();
        locs.sort_by_key(|l| l.0);
        assert_abs_diff_eq!(locs[0].1, 44.522, epsilon = 5e-3);
        assert_abs_diff_eq!(locs[1].1, 3.0476, epsilon = 5e-3);
        assert_eq!(a.classification.r_plus, vec![1, 1]);
        for p in &a.predictions {
            assert!(p.location > a.structure.right_edge(p.component));
            let u = p.overlap.unwrap();
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn zero_margin_is_not_outlier() {
        let f = crate::stieltjes::test_support::mp(2.0);
        let s = f.bulk_structure().unwrap();
        let sigma = -1.0 / s.critical_points[0];
        let pop = vec![1.0; 400];
        let spikes = attach_spikes(&pop, &[(0, sigma - 1.0)]).unwrap();
        let model = PopulationModel::new(pop, spikes, 800).unwrap();
        let cls = classify_spikes(&model, &s, 0.05, None).unwrap();
        assert!(!cls.spikes[0].is_outlier);
        assert!(cls.spikes[0].margin.abs() < 1e-12);
    }

    #[test]
    fn subcritical_fallback_is_mp_edge() {
        let model = null_model(2.0, &[0.5], 400);
        let a = Analysis::new(&model, Thresholds::default()).unwrap();
        let p = &a.predictions[0];
        assert!(!p.is_outlier);
        let edge = (1.0 + 0.5f64.sqrt()).powi(2);
        assert_abs_diff_eq!(p.edge_fallback.unwrap().location, edge, epsilon = 1e-10);
        assert!(p.overlap.is_none());
        assert!(a.classification.spikes[0].margin < 0.0);
    }

    #[test]
    fn null_case_reduction() {
        let c = 2.0;
        for d in [1.0, 2.0, 3.0, 5.0] {
            let model = null_model(c, &[d], 400);
            let a = Analysis::new(&model, Thresholds::default()).unwrap();
            let p = &a.predictions[0];
            assert_abs_diff_eq!(p.location, 1.0 + d + (1.0 + 1.0 / d) / c, epsilon = 1e-10);
            let u_closed = (1.0 - 1.0 / (c * d * d)) / (1.0 + 1.0 / (c * d));
            assert_abs_diff_eq!(p.overlap.unwrap(), u_closed, epsilon = 1e-10);
        }
        let model = null_model(c, &[1e6], 400);
        assert!(overlap_formula(&model.f_function(), 1e6 + 1.0).unwrap() > 0.999);
    }

    #[test]
    fn overlap_requires_outlier() {
        let model = null_model(2.0, &[0.5], 400);
        let a = Analysis::new(&model, Thresholds::default()).unwrap();
        assert!(matches!(
            overlap_limit(&a.f, &a.classification, 0),
            Err(SpectraError::Precondition(_))
        ));
    }

    #[test]
    fn scale_consistency() {
        let a1 = Analysis::new(&two_bulk(1.0), Thresholds::default()).unwrap();
        let a2 = Analysis::new(&two_bulk(2.0), Thresholds::default()).unwrap();
        for (p, q) in a1.predictions.iter().zip(&a2.predictions) {
            assert_abs_diff_eq!(q.location, 2.0 * p.location, epsilon = 1e-9);
            assert_abs_diff_eq!(q.overlap.unwrap(), p.overlap.unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn reorder_invariance() {
        let mut pop = vec![18.0; 200];
        pop.extend(vec![1.0; 200]);
        let s1 = attach_spikes(&pop, &[(0, 35.0 / 18.0 - 1.0), (200, 3.0)]).unwrap();
        let s2 = attach_spikes(&pop, &[(200, 3.0), (0, 35.0 / 18.0 - 1.0)]).unwrap();
        let m1 = PopulationModel::new(pop.clone(), s1, 800).unwrap();
        let m2 = PopulationModel::new(pop, s2, 800).unwrap();
        let a1 = Analysis::new(&m1, Thresholds::default()).unwrap();
        let a2 = Analysis::new(&m2, Thresholds::default()).unwrap();
        assert_eq!(a1.classification, a2.classification);
    }

    #[test]
    fn overlap_error_scaling() {
        let cls = |n: usize| SpikeClassification {
            spikes: vec![SpikeClass {
                spike: 0,
                sigma_g: 5.0,
                component: 1,
                rank: 1,
                is_outlier: true,
                meets_rate: true,
                margin: 0.01,
                threshold_used: 0.0,
            }],
            r: vec![1],
            r_plus: vec![1],
            r_plus_rate: vec![1],
            c0: None,
            n,
        };
        // the N^{-1/2} term dominates: R(4N)/R(N) → 1/2
        let n = 1_000_000_000;
        let ratio = overlap_error_bound(&cls(4 * n), 0, 0) / overlap_error_bound(&cls(n), 0, 0);
        assert_abs_diff_eq!(ratio, 0.5, epsilon = 1e-2);
    }

    #[test]
    fn distinct_spikes_error_is_order_inverse_n() {
        let a = Analysis::new(&two_bulk(1.0), Thresholds::default()).unwrap();
        let r = overlap_error_bound(&a.classification, 0, 1);
        let gap = (1.0 / 35.0 - 0.25f64).abs();
        assert_abs_diff_eq!(r, 1.0 / (800.0 * gap * gap), epsilon = 1e-15);
        assert!(r.is_finite());
    }

    #[test]
    fn projection_limits() {
        let a = Analysis::new(&two_bulk(1.0), Thresholds::default()).unwrap();
        let u: Vec<f64> = (0..2)
            .map(|k| overlap_limit(&a.f, &a.classification, k).unwrap())
            .collect();
        let p = projection_limit(&a.f, &a.classification, &[1.0, 0.0], &[0]).unwrap();
        assert_abs_diff_eq!(p.value, u[0], epsilon = 1e-15);
        let p = projection_limit(&a.f, &a.classification, &[0.0, 0.0], &[0, 1]).unwrap();
        assert_eq!(p.value, 0.0);
        assert_eq!(p.bound, 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p = projection_limit(&a.f, &a.classification, &[h, h], &[0, 1]).unwrap();
        assert_abs_diff_eq!(p.value, (u[0] + u[1]) / 2.0, epsilon = 1e-14);
        assert!(p.bound > 0.0 && p.bound.is_finite());
    }

    #[test]
    fn sticking_two_bulk() {
        let a = Analysis::new(&two_bulk(1.0), Thresholds::default()).unwrap();
        let x1 = a.structure.critical_points[0];
        let b = a.sticking[0];
        assert_abs_diff_eq!(b.alpha_plus.unwrap(), (-1.0 / 35.0 - x1).abs(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            b.bound,
            800f64.powf(0.04) / (800.0 * b.alpha_plus.unwrap()),
            epsilon = 1e-15
        );
        // α⁺ ≈ 0.0085 sits below N^{-1/3+2ε₁} ≈ 0.141
        assert_eq!(b.regime, Regime::Rigidity);
        assert_eq!(a.sticking[1].regime, Regime::Sticking);
    }

    #[test]
    fn sticking_without_spikes() {
        let model = PopulationModel::new(vec![1.0; 400], SpikeSet::empty(), 800).unwrap();
        let a = Analysis::new(&model, Thresholds::default()).unwrap();
        let b = a.sticking[0];
        assert!(b.alpha_plus.is_none());
        assert_eq!(b.regime, Regime::Rigidity);
        let n = 800f64;
        assert_abs_diff_eq!(b.bound_at(1), n.powf(-2.0 / 3.0 + 0.02), epsilon = 1e-15);
        assert_abs_diff_eq!(
            b.bound_at(8),
            n.powf(-2.0 / 3.0 + 0.02) * 8f64.powf(-1.0 / 3.0),
            epsilon = 1e-15
        );
        assert_eq!(b.bound_at(400), b.bound_at(1));
    }

    #[test]
    fn nonoutlier_vector_bounds() {
        let a = Analysis::new(&two_bulk(1.0), Thresholds::default()).unwrap();
        let s = &a.structure;
        let cls = &a.classification;
        let k4 = cls.spikes.iter().position(|c| c.sigma_g == 4.0).unwrap();
        let b1 = nonoutlier_vector_bound(s, cls, k4, 2, 1, 0.02).unwrap();
        let b50 = nonoutlier_vector_bound(s, cls, k4, 2, 50, 0.02).unwrap();
        let b100 = nonoutlier_vector_bound(s, cls, k4, 2, 100, 0.02).unwrap();
        assert!(b1 > b50 && b50 > b100);
        // κᵈ = O(1), margin bounded below: N^{-1+Cε₁}
        assert!(b100 <= 800f64.powf(-1.0 + 15.0 * 0.02));
        assert!(nonoutlier_vector_bound(s, cls, k4, 2, 0, 0.02).is_err());
        // margin 0, j = 1 substitution
        let mut zero = cls.clone();
        let comp = zero.spikes[0].component;
        zero.spikes[0].sigma_g = -1.0 / s.x(2 * comp - 1);
        let b = nonoutlier_vector_bound(s, &zero, 0, comp, 1, 0.02).unwrap();
        let expect = 800f64.powf(0.12) / (800.0 * 800f64.powf(-2.0 / 3.0));
        assert_abs_diff_eq!(b, expect, epsilon = 1e-12 * expect);
    }

    #[test]
    fn nonoverlap_checks() {
        let a = Analysis::new(&two_bulk(1.0), Thresholds::default()).unwrap();
        let k35 = a.classification.spikes.iter().position(|c| c.sigma_g == 35.0).unwrap();
        let report = check_nonoverlap(&a.classification, &[k35], 0.05);
        // ν = |1/35 − 1/4| against margin^{-1/2}·N^{-0.45}: the 4 spike clears it,
        // the 35 spike (margin ≈ 0.0085) does not at N = 800
        let gap = 0.25 - 1.0 / 35.0;
        for c in &report.checks {
            assert_abs_diff_eq!(c.value, gap, epsilon = 1e-15);
        }
        let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec![format!("non_overlap[spike {k35}]").as_str()]);
        // a single spike has an empty complement
        let single = null_model(2.0, &[3.0], 400);
        let a1 = Analysis::new(&single, Thresholds::default()).unwrap();
        assert_eq!(nu(&a1.classification, 0, &[0]), f64::INFINITY);
        assert!(check_nonoverlap(&a1.classification, &[0], 0.05).all_passed());
        // identical spikes separated by A
        let pop = vec![1.0; 400];
        let spikes = attach_spikes(&pop, &[(0, 3.0), (1, 3.0)]).unwrap();
        let twin = PopulationModel::new(pop, spikes, 800).unwrap();
        let a2 = Analysis::new(&twin, Thresholds::default()).unwrap();
        let r = check_nonoverlap(&a2.classification, &[0], 0.05);
        assert!(!r.all_passed());
        assert_eq!(nu(&a2.classification, 0, &[0]), 0.0);
        assert_eq!(overlap_error_bound(&a2.classification, 0, 0), f64::INFINITY);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn overlap_in_unit_interval_and_monotone(s1 in 40.0f64..200.0, ds in 1.0f64..50.0) {
            let mut pop = vec![18.0; 200];
            pop.extend(vec![1.0; 200]);
            let model = PopulationModel::new(pop, SpikeSet::empty(), 800).unwrap();
            let f = model.f_function();
            let u1 = overlap_formula(&f, s1).unwrap();
            let u2 = overlap_formula(&f, s1 + ds).unwrap();
            prop_assert!(u1 > 0.0 && u1 <= 1.0);
            prop_assert!(u2 >= u1);
        }

        #[test]
        fn location_exceeds_edge(d in 0.75f64..20.0) {
            let model = null_model(2.0, &[d], 400);
            let a = Analysis::new(&model, Thresholds::default()).unwrap();
            let p = &a.predictions[0];
            if p.is_outlier {
                prop_assert!(p.location > a.structure.edges[0]);
            }
        }
    }
}
