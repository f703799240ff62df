//! Critical points of f and the resulting bulk components.

use serde::Serialize;

use super::FFunction;
use crate::error::{Result, SpectraError};
use crate::exec::{map_indexed, Execution};

/// Stand-in for the critical point at infinity when c_N = 1; its edge is 0.
pub const INFINITE_CRITICAL_POINT: f64 = f64::MAX;

const GRID_POINTS: usize = 4096;
const DEGENERATE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BulkStructure {
    /// x_1 ≥ … ≥ x_{2p−1}, then x_{2p} (positive when c_N < 1).
    pub critical_points: Vec<f64>,
    /// a_k = f(x_k), descending.
    pub edges: Vec<f64>,
    pub p: usize,
    /// Component k as `(a_{2k}, a_{2k−1})`.
    pub support: Vec<(f64, f64)>,
    /// Classical eigenvalue count per component.
    pub bulk_counts: Vec<usize>,
    /// Edge scale ϖ_k = (|f″(x_k)|/2)^{1/3}; fluctuations at a_k are of order ϖ_k·N^{−2/3}.
    pub edge_scales: Vec<f64>,
    /// Critical points where an inner pair closed up, each counted twice.
    pub degenerate: Vec<f64>,
    pub c_n: f64,
}

impl BulkStructure {
    /// x_k with 1-based `k`.
    pub fn x(&self, k: usize) -> f64 {
        self.critical_points[k - 1]
    }

    /// a_k with 1-based `k`.
    pub fn a(&self, k: usize) -> f64 {
        self.edges[k - 1]
    }

    /// Right edge a_{2i−1} of component `i` (1-based).
    pub fn right_edge(&self, i: usize) -> f64 {
        self.a(2 * i - 1)
    }

    pub fn left_edge(&self, i: usize) -> f64 {
        self.a(2 * i)
    }

    pub fn top_edge(&self) -> f64 {
        self.edges[0]
    }

    pub fn bottom_edge(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Offset s_i = Σ_{l<i} N_l of component `i` in the global ordering.
    pub fn offset(&self, i: usize) -> usize {
        self.bulk_counts[..i - 1].iter().sum()
    }

    pub fn total_count(&self) -> usize {
        self.bulk_counts.iter().sum()
    }

    /// 1-based component whose support contains `e`.
    pub fn component_containing(&self, e: f64) -> Option<usize> {
        self.support
            .iter()
            .position(|&(lo, hi)| lo <= e && e <= hi)
            .map(|k| k + 1)
    }

    /// Component a spike at `x = −1/σᵍ` attaches to: the one whose gap
    /// `(x_{2i−1}, x_{2(i−1)})` contains x, or whose preimage `(x_{2i}, x_{2i−1}]`
    /// does (sub-critical spike).
    pub fn component_of_spike(&self, x: f64) -> Option<usize> {
        if !(x < 0.0) {
            return None;
        }
        for i in 1..=self.p {
            let right = self.x(2 * i - 1);
            let upper = if i == 1 { 0.0 } else { self.x(2 * i - 2) };
            if x > right && x < upper {
                return Some(i);
            }
            let left = self.x(2 * i);
            let left = if left > 0.0 { f64::NEG_INFINITY } else { left };
            if x > left && x <= right {
                return Some(i);
            }
        }
        None
    }
}

pub fn find_bulk_structure(f: &FFunction) -> Result<BulkStructure> {
    find_bulk_structure_with(f, Execution::default())
}

/// Locates the critical points of f per interval between consecutive poles.
///
/// I₁ = (q₁, 0) and I₀ each hold exactly one root of f′; every inner interval
/// holds none or two, decided by the sign of max f′ on a log-dense grid.
pub fn find_bulk_structure_with(f: &FFunction, exec: Execution) -> Result<BulkStructure> {
    let q = f.poles();
    let c = f.c_n();
    let d1 = |x: f64| f.d1_unchecked(x);

    let x1 = bisect_sign(&d1, q[0], 0.0, Slope::Rising);

    let inner: Vec<Result<InnerRoots>> = map_indexed(exec, q.len() - 1, |k| {
        inner_interval_roots(f, q[k + 1], q[k], k)
    });

    let mut critical = vec![x1];
    let mut degenerate = Vec::new();
    for roots in inner {
        match roots? {
            InnerRoots::None => {}
            InnerRoots::Pair { low, high } => {
                if high - low < DEGENERATE_GAP {
                    degenerate.push(0.5 * (low + high));
                }
                critical.push(high);
                critical.push(low);
            }
        }
    }

    let last_pole = q[q.len() - 1];
    let x_last = if (c - 1.0).abs() < 1e-14 {
        INFINITE_CRITICAL_POINT
    } else if c > 1.0 {
        let mut span = last_pole.abs().max(1.0);
        while d1(last_pole - span) <= 0.0 {
            span *= 2.0;
            if span > 1e300 {
                return Err(SpectraError::Structure(
                    "no critical point found left of the last pole".into(),
                ));
            }
        }
        bisect_sign(&d1, last_pole - span, last_pole, Slope::Falling)
    } else {
        let mut right = 1.0;
        while d1(right) >= 0.0 {
            right *= 2.0;
            if right > 1e300 {
                return Err(SpectraError::Structure(
                    "no positive critical point found".into(),
                ));
            }
        }
        bisect_sign(&d1, 0.0, right, Slope::Falling)
    };
    critical.push(x_last);

    if critical.len() % 2 != 0 {
        return Err(SpectraError::Structure(format!(
            "odd number of critical points ({})",
            critical.len()
        )));
    }
    let edges: Vec<f64> = critical
        .iter()
        .map(|&x| {
            if x == INFINITE_CRITICAL_POINT {
                0.0
            } else {
                f.eval_unchecked(x)
            }
        })
        .collect();
    for (k, w) in edges.windows(2).enumerate() {
        if w[1] > w[0] + 1e-9 * w[0].abs().max(1.0) {
            return Err(SpectraError::Structure(format!(
                "edges out of order: a_{} = {} < a_{} = {}",
                k + 1,
                w[0],
                k + 2,
                w[1]
            )));
        }
    }
    if edges.iter().any(|a| !a.is_finite() || *a < -1e-12) {
        return Err(SpectraError::Structure(format!("invalid edges {edges:?}")));
    }
    let p = critical.len() / 2;
    let support = (0..p).map(|k| (edges[2 * k + 1], edges[2 * k])).collect();
    let edge_scales = critical
        .iter()
        .map(|&x| {
            if x == INFINITE_CRITICAL_POINT {
                0.0
            } else {
                (f.d2_unchecked(x).abs() / 2.0).cbrt()
            }
        })
        .collect();

    let bulk_counts = component_counts(f, &critical, p);

    Ok(BulkStructure {
        critical_points: critical,
        edges,
        p,
        support,
        bulk_counts,
        edge_scales,
        degenerate,
        c_n: c,
    })
}

/// N_i = M·πᵇ(poles in the preimage of component i); the last component takes
/// the remainder so the counts sum to min(M, N).
fn component_counts(f: &FFunction, critical: &[f64], p: usize) -> Vec<usize> {
    let m = f.m();
    let total = m.min(f.n());
    let mut counts = Vec::with_capacity(p);
    let mut used = 0usize;
    for i in 0..p.saturating_sub(1) {
        let hi = critical[2 * i];
        let lo = critical[2 * i + 1];
        let w: f64 = f
            .poles()
            .iter()
            .zip(f.weights())
            .filter(|(&q, _)| q > lo && q < hi)
            .map(|(_, &w)| w)
            .sum();
        let n_i = ((w * m as f64).round() as usize).min(total - used);
        counts.push(n_i);
        used += n_i;
    }
    counts.push(total - used);
    counts
}

enum InnerRoots {
    None,
    Pair { low: f64, high: f64 },
}

fn inner_interval_roots(f: &FFunction, left: f64, right: f64, k: usize) -> Result<InnerRoots> {
    let gap = right - left;
    // f′ ≤ 1/x² − (w₁/c)/(x−left)² − (w₂/c)/(x−right)², and the two pole terms
    // together are at least (w₁^{1/3}+w₂^{1/3})³/(c·gap²) on the interval.
    let sw = f.scaled_weights_pair(k);
    let floor = (sw.0.cbrt() + sw.1.cbrt()).powi(3) / (gap * gap);
    if 1.0 / (right * right) < floor {
        return Ok(InnerRoots::None);
    }
    let grid = log_dense_grid(left, right, GRID_POINTS);
    let (mut best_i, mut best_v) = (0, f64::NEG_INFINITY);
    for (i, &x) in grid.iter().enumerate() {
        let v = f.d1_unchecked(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { left } else { grid[best_i - 1] };
    let hi = if best_i + 1 == grid.len() { right } else { grid[best_i + 1] };
    let (x_max, v_max) = golden_max(|x| f.d1_unchecked(x), lo, hi, (grid[best_i], best_v));
    if v_max <= 0.0 {
        return Ok(InnerRoots::None);
    }
    let d1 = |x: f64| f.d1_unchecked(x);
    let low = bisect_sign(&d1, left, x_max, Slope::Rising);
    let high = bisect_sign(&d1, x_max, right, Slope::Falling);
    if !(low < high) {
        return Err(SpectraError::Structure(format!(
            "inner interval ({left}, {right}) produced unordered roots {low}, {high}"
        )));
    }
    Ok(InnerRoots::Pair { low, high })
}

/// Points accumulating geometrically at both ends of `(left, right)`.
fn log_dense_grid(left: f64, right: f64, n: usize) -> Vec<f64> {
    let gap = right - left;
    let half = n / 2;
    let lo_exp = (1e-12f64).ln();
    let hi_exp = (0.5f64).ln();
    let mut pts = Vec::with_capacity(2 * half);
    for j in 0..half {
        let t = j as f64 / (half - 1) as f64;
        let d = gap * (lo_exp + t * (hi_exp - lo_exp)).exp();
        pts.push(left + d);
    }
    for j in (0..half).rev() {
        let t = j as f64 / (half - 1) as f64;
        let d = gap * (lo_exp + t * (hi_exp - lo_exp)).exp();
        pts.push(right - d);
    }
    pts
}

/// Golden-section refinement of a maximum bracketed by `[lo, hi]`; keeps the
/// grid maximum if refinement does not improve on it.
fn golden_max(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, seed: (f64, f64)) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let mut ga = g(a);
    let mut gb = g(b);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * lo.abs().max(hi.abs()) {
            break;
        }
        if ga > gb {
            hi = b;
            b = a;
            gb = ga;
            a = hi - r * (hi - lo);
            ga = g(a);
        } else {
            lo = a;
            a = b;
            ga = gb;
            b = lo + r * (hi - lo);
            gb = g(b);
        }
    }
    let (x, v) = if ga > gb { (a, ga) } else { (b, gb) };
    if v >= seed.1 {
        (x, v)
    } else {
        seed
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Slope {
    /// g < 0 near `lo`, g > 0 near `hi`.
    Rising,
    /// g > 0 near `lo`, g < 0 near `hi`.
    Falling,
}

/// Bisection on the sign of `g` over the open interval `(lo, hi)`; only
/// interior midpoints are evaluated.
pub(crate) fn bisect_sign(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, slope: Slope) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        let go_right = match slope {
            Slope::Rising => v < 0.0,
            Slope::Falling => v > 0.0,
        };
        if v == 0.0 {
            return mid;
        }
        if go_right {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl FFunction {
    /// Scaled weights of the poles bounding inner interval `k` (left, right).
    fn scaled_weights_pair(&self, k: usize) -> (f64, f64) {
        (self.scaled_weights[k + 1], self.scaled_weights[k])
    }
}
