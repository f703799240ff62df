//! Density of the deformed Marchenko–Pastur law, its per-component
//! cumulative mass and classical eigenvalue locations.
//!
//! Mass convention: m is the Stieltjes transform of the N×N companion
//! `X*Σ_b X`. When c_N > 1 it carries an atom of mass 1 − 1/c_N at zero, so the
//! continuous part integrates to min(1, 1/c_N).

use num_complex::Complex64;

use super::solver::newton;
use super::{solve_m, solve_m_from, BulkStructure, FFunction, INFINITE_CRITICAL_POINT};
use crate::error::{Result, SpectraError};
use crate::exec::{map_indexed, Execution};
use crate::model::ValidationReport;

const CDF_INTERVALS: usize = 4096;
const SWEEP_CHUNK: usize = 128;

fn eta0(s: &BulkStructure) -> f64 {
    1e-7 * (s.top_edge() - s.bottom_edge()).max(1e-300)
}

/// ρ(E); zero outside the open support intervals.
pub fn density(f: &FFunction, s: &BulkStructure, e: f64) -> Result<f64> {
    Ok(density_warm(f, s, e, None)?.0)
}

/// Density plus the Stieltjes value at `E + iη₀`, optionally warm-started.
fn density_warm(
    f: &FFunction,
    s: &BulkStructure,
    e: f64,
    guess: Option<Complex64>,
) -> Result<(f64, Option<Complex64>)> {
    let inside = s.support.iter().any(|&(lo, hi)| lo < e && e < hi);
    if !inside || e <= 0.0 {
        return Ok((0.0, None));
    }
    let z = Complex64::new(e, eta0(s));
    let v = match guess {
        Some(g) => solve_m_from(f, z, g)?,
        None => solve_m(f, s, z)?,
    };
    // Let η → 0⁺ with Newton on the real axis, keeping the upper branch.
    let tol = 1e-12 * e.abs().max(1.0);
    let m = match newton(f, Complex64::new(e, 0.0), v.m, tol, 60) {
        Some((m, _)) if m.im > 0.0 => m,
        _ => v.m,
    };
    Ok((m.im.max(0.0) / std::f64::consts::PI, Some(v.m)))
}

/// Density on a grid. Consecutive points share warm starts inside fixed-size
/// chunks, so the result does not depend on the execution mode.
pub fn density_grid(
    f: &FFunction,
    s: &BulkStructure,
    grid: &[f64],
    exec: Execution,
) -> Result<Vec<f64>> {
    sweep(f, s, grid, exec)
}

fn sweep(f: &FFunction, s: &BulkStructure, energies: &[f64], exec: Execution) -> Result<Vec<f64>> {
    let chunks = energies.len().div_ceil(SWEEP_CHUNK);
    let parts: Vec<Result<Vec<f64>>> = map_indexed(exec, chunks, |c| {
        let lo = c * SWEEP_CHUNK;
        let hi = (lo + SWEEP_CHUNK).min(energies.len());
        let mut out = Vec::with_capacity(hi - lo);
        let mut guess = None;
        for &e in &energies[lo..hi] {
            let (rho, m) = density_warm(f, s, e, guess)?;
            guess = m.or(guess);
            out.push(rho);
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(energies.len());
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// Cumulative mass of one component measured downward from its right edge,
/// tabulated on `E(θ) = b − (b − a)(1 − cos θ)/2`.
#[derive(Debug, Clone)]
pub struct ComponentCdf {
    /// 1-based component index.
    pub component: usize,
    pub lower: f64,
    pub upper: f64,
    thetas: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ComponentCdf {
    pub fn total(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    fn energy(&self, theta: f64) -> f64 {
        self.upper - (self.upper - self.lower) * (1.0 - theta.cos()) / 2.0
    }

    /// ∫_E^{upper} ρ.
    pub fn mass_above(&self, e: f64) -> f64 {
        if e >= self.upper {
            return 0.0;
        }
        if e <= self.lower {
            return self.total();
        }
        let t = 1.0 - 2.0 * (self.upper - e) / (self.upper - self.lower);
        let theta = t.clamp(-1.0, 1.0).acos();
        let h = self.thetas[1] - self.thetas[0];
        let k = ((theta / h) as usize).min(self.thetas.len() - 2);
        let frac = (theta - self.thetas[k]) / h;
        self.cumulative[k] + frac * (self.cumulative[k + 1] - self.cumulative[k])
    }

    /// E with ∫_E^{upper} ρ = `mass`.
    pub fn quantile_from_top(&self, mass: f64) -> Result<f64> {
        if !(mass >= 0.0) || mass > self.total() {
            return Err(SpectraError::Precondition(format!(
                "component {} holds mass {}, requested {mass}",
                self.component,
                self.total()
            )));
        }
        let k = self.cumulative.partition_point(|&c| c < mass).max(1);
        let (c0, c1) = (self.cumulative[k - 1], self.cumulative[k]);
        let frac = if c1 > c0 { (mass - c0) / (c1 - c0) } else { 0.0 };
        let theta = self.thetas[k - 1] + frac * (self.thetas[k] - self.thetas[k - 1]);
        Ok(self.energy(theta))
    }
}

/// Cumulative table for component `i` (1-based).
pub fn component_cdf(
    f: &FFunction,
    s: &BulkStructure,
    i: usize,
    exec: Execution,
) -> Result<ComponentCdf> {
    let (lower, upper) = s.support[i - 1];
    let n = CDF_INTERVALS;
    let thetas: Vec<f64> = (0..=n)
        .map(|k| std::f64::consts::PI * k as f64 / n as f64)
        .collect();
    let mut cdf = ComponentCdf {
        component: i,
        lower,
        upper,
        thetas,
        cumulative: Vec::new(),
    };
    let energies: Vec<f64> = cdf.thetas.iter().map(|&t| cdf.energy(t)).collect();
    let rho = sweep(f, s, &energies, exec)?;
    let half_width = (upper - lower) / 2.0;
    let integrand: Vec<f64> = rho
        .iter()
        .zip(&cdf.thetas)
        .map(|(r, t)| r * half_width * t.sin())
        .collect();
    let h = std::f64::consts::PI / n as f64;
    let mut cumulative = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for k in 0..n {
        acc += 0.5 * h * (integrand[k] + integrand[k + 1]);
        cumulative.push(acc);
    }
    cdf.cumulative = cumulative;
    Ok(cdf)
}

/// Mass of the continuous part of ρ, summed over components.
pub fn total_mass(f: &FFunction, s: &BulkStructure, exec: Execution) -> Result<f64> {
    let mut total = 0.0;
    for i in 1..=s.p {
        total += component_cdf(f, s, i, exec)?.total();
    }
    Ok(total)
}

pub fn classical_locations(f: &FFunction, s: &BulkStructure, n: usize) -> Result<Vec<Vec<f64>>> {
    classical_locations_with(f, s, n, Execution::default())
}

/// γ_{i,j} solving N·∫_γ^{a_{2i−1}} ρ = j − 1/2 for j = 1..N_i, per component.
pub fn classical_locations_with(
    f: &FFunction,
    s: &BulkStructure,
    n: usize,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(s.p);
    for i in 1..=s.p {
        let cdf = component_cdf(f, s, i, exec)?;
        let count = s.bulk_counts[i - 1];
        let mut gammas = Vec::with_capacity(count);
        for j in 1..=count {
            let mass = (j as f64 - 0.5) / n as f64;
            let g = cdf.quantile_from_top(mass).map_err(|_| {
                SpectraError::Precondition(format!(
                    "component {i}: cumulative mass {} too small for index {j} of {count}",
                    cdf.total() * n as f64
                ))
            })?;
            gammas.push(g);
        }
        out.push(gammas);
    }
    Ok(out)
}

/// Regularity of the edges: positivity, separation, distance of critical
/// points from poles, and a positive density inside every component.
pub fn check_edge_regularity(s: &BulkStructure, f: &FFunction, tau: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (k, &a) in s.edges.iter().enumerate() {
        report.push(
            format!("edge_positive[a_{}]", k + 1),
            a >= tau,
            a,
            tau,
            "edge must be at least tau",
        );
    }
    let mut worst = (f64::INFINITY, 0, 0);
    for k in 0..s.edges.len() {
        for l in (k + 1)..s.edges.len() {
            let d = (s.edges[k] - s.edges[l]).abs();
            if d < worst.0 {
                worst = (d, k + 1, l + 1);
            }
        }
    }
    if s.edges.len() > 1 {
        report.push(
            "edge_separation",
            worst.0 >= tau,
            worst.0,
            tau,
            format!("closest pair a_{} and a_{}", worst.1, worst.2),
        );
    }
    for (k, &x) in s.critical_points.iter().enumerate() {
        if x == INFINITE_CRITICAL_POINT {
            continue;
        }
        let d = f
            .poles()
            .iter()
            .map(|q| (x - q).abs())
            .fold(f64::INFINITY, f64::min);
        report.push(
            format!("critical_pole_distance[x_{}]", k + 1),
            d >= tau,
            d,
            tau,
            "critical point must stay tau away from every pole",
        );
    }
    for &x in &s.degenerate {
        report.push(
            "degenerate_critical_point",
            false,
            x,
            tau,
            "an inner pair of critical points closed up",
        );
    }
    for (i, &(lo, hi)) in s.support.iter().enumerate() {
        let (a, b) = (lo + tau, hi - tau);
        if a >= b {
            report.push(
                format!("density_floor[component {}]", i + 1),
                false,
                0.0,
                0.0,
                "component narrower than 2 tau",
            );
            continue;
        }
        let grid: Vec<f64> = (0..64).map(|k| a + (b - a) * k as f64 / 63.0).collect();
        match sweep(f, s, &grid, Execution::default()) {
            Ok(values) => {
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                report.push(
                    format!("density_floor[component {}]", i + 1),
                    min > 0.0,
                    min,
                    0.0,
                    "smallest density on the tau-trimmed component",
                );
            }
            Err(e) => report.push(
                format!("density_floor[component {}]", i + 1),
                false,
                f64::NAN,
                0.0,
                e.to_string(),
            ),
        }
    }
    report
}
