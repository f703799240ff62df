//! The self-consistent equation z = f(m) for the deformed Marchenko–Pastur law.
//!
//! `f(x) = −1/x + (1/c_N) Σ_k w_k / (x + 1/σ_k)` is a finite sum over the atoms
//! of πᵇ. Its critical points delimit the bulk components, its inverse on the
//! upper half plane is the Stieltjes transform m(z) of the limiting spectrum of
//! `X*Σ_b X`, and `Im m / π` on the real axis is the density.

mod density;
mod solver;
mod structure;

pub use density::{
    check_edge_regularity, classical_locations, classical_locations_with, component_cdf,
    density, density_grid, total_mass, ComponentCdf,
};
pub use solver::{solve_m, solve_m_from, StieltjesValue};
pub(crate) use structure::{bisect_sign, Slope};
pub use structure::{find_bulk_structure, find_bulk_structure_with, BulkStructure, INFINITE_CRITICAL_POINT};

use num_complex::Complex64;

use crate::error::{Result, SpectraError};
use crate::model::BulkSpectrum;

/// Distance to a pole below which evaluation is refused.
pub const POLE_TOLERANCE: f64 = 1e-14;

/// `f` for a bulk spectrum and aspect ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct FFunction {
    /// Poles −1/σ_k, descending (closest to zero first).
    poles: Vec<f64>,
    /// w_k / c_N, aligned with `poles`.
    scaled_weights: Vec<f64>,
    weights: Vec<f64>,
    c_n: f64,
    m: usize,
}

impl FFunction {
    pub fn new(bulk: &BulkSpectrum, c_n: f64) -> Self {
        let poles = bulk.atoms().iter().map(|a| -1.0 / a.value).collect();
        let weights: Vec<f64> = bulk.atoms().iter().map(|a| a.weight).collect();
        let scaled_weights = weights.iter().map(|w| w / c_n).collect();
        Self {
            poles,
            scaled_weights,
            weights,
            c_n,
            m: bulk.m(),
        }
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    /// Population dimension M.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Sample count N = c_N·M.
    pub fn n(&self) -> usize {
        (self.c_n * self.m as f64).round() as usize
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest population eigenvalue.
    pub fn sigma_max(&self) -> f64 {
        -1.0 / self.poles[0]
    }

    fn check_real(&self, x: f64) -> Result<()> {
        if x.abs() <= POLE_TOLERANCE {
            return Err(SpectraError::Pole {
                x,
                pole: 0.0,
                distance: x.abs(),
            });
        }
        if let Some(&q) = self
            .poles
            .iter()
            .find(|&&q| (x - q).abs() <= POLE_TOLERANCE)
        {
            return Err(SpectraError::Pole {
                x,
                pole: q,
                distance: (x - q).abs(),
            });
        }
        Ok(())
    }

    fn check_complex(&self, z: Complex64) -> Result<()> {
        if z.norm() <= POLE_TOLERANCE {
            return Err(SpectraError::Pole {
                x: z.re,
                pole: 0.0,
                distance: z.norm(),
            });
        }
        if let Some(&q) = self
            .poles
            .iter()
            .find(|&&q| (z - q).norm() <= POLE_TOLERANCE)
        {
            return Err(SpectraError::Pole {
                x: z.re,
                pole: q,
                distance: (z - q).norm(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_real(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub fn eval_complex(&self, z: Complex64) -> Result<Complex64> {
        self.check_complex(z)?;
        Ok(self.eval_complex_unchecked(z))
    }

    /// Derivative of order 1 or 2.
    pub fn derivative(&self, x: f64, order: u8) -> Result<f64> {
        self.check_real(x)?;
        match order {
            1 => Ok(self.d1_unchecked(x)),
            2 => Ok(self.d2_unchecked(x)),
            _ => Err(order_error(order)),
        }
    }

    pub fn derivative_complex(&self, z: Complex64, order: u8) -> Result<Complex64> {
        self.check_complex(z)?;
        match order {
            1 => Ok(self.d1_complex_unchecked(z)),
            2 => {
                let s: Complex64 = self
                    .poles
                    .iter()
                    .zip(&self.scaled_weights)
                    .map(|(&q, &w)| {
                        let t = (z - q).inv();
                        w * t * t * t
                    })
                    .sum();
                Ok(-2.0 / (z * z * z) + 2.0 * s)
            }
            _ => Err(order_error(order)),
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let s: f64 = self
            .poles
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&q, &w)| w / (x - q))
            .sum();
        -1.0 / x + s
    }

    #[inline]
    pub(crate) fn d1_unchecked(&self, x: f64) -> f64 {
        let s: f64 = self
            .poles
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&q, &w)| {
                let t = 1.0 / (x - q);
                w * t * t
            })
            .sum();
        1.0 / (x * x) - s
    }

    #[inline]
    pub(crate) fn d2_unchecked(&self, x: f64) -> f64 {
        let s: f64 = self
            .poles
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&q, &w)| {
                let t = 1.0 / (x - q);
                w * t * t * t
            })
            .sum();
        -2.0 / (x * x * x) + 2.0 * s
    }

    /// f and f′ together, sharing the reciprocals.
    #[inline]
    pub(crate) fn eval_with_d1_complex(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        for (&q, &w) in self.poles.iter().zip(&self.scaled_weights) {
            let t = (z - q).inv();
            s0 += w * t;
            s1 += w * t * t;
        }
        let zi = z.inv();
        (-zi + s0, zi * zi - s1)
    }

    #[inline]
    pub(crate) fn eval_complex_unchecked(&self, z: Complex64) -> Complex64 {
        let s: Complex64 = self
            .poles
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&q, &w)| w * (z - q).inv())
            .sum();
        -z.inv() + s
    }

    #[inline]
    pub(crate) fn d1_complex_unchecked(&self, z: Complex64) -> Complex64 {
        self.eval_with_d1_complex(z).1
    }

    /// Σ_k (w_k/c) / (m − q_k), the bulk part of f.
    #[inline]
    pub(crate) fn bulk_sum_complex(&self, z: Complex64) -> Complex64 {
        self.poles
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&q, &w)| w * (z - q).inv())
            .sum()
    }

    /// Critical points, edges and components with the default execution mode.
    pub fn bulk_structure(&self) -> Result<BulkStructure> {
        find_bulk_structure(self)
    }
}

fn order_error(order: u8) -> SpectraError {
    SpectraError::Parameter {
        name: "order",
        reason: format!("derivative order {order} not supported (1 or 2)"),
    }
}
