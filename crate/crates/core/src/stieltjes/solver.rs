//! Solving z = f(m) on the upper half plane and on the real axis off the support.

use num_complex::Complex64;
use serde::Serialize;

use super::structure::{bisect_sign, Slope, INFINITE_CRITICAL_POINT};
use super::{BulkStructure, FFunction};
use crate::error::{Result, SpectraError};

const NEWTON_MAX: usize = 100;
const FIXED_POINT_MAX: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StieltjesValue {
    pub z: Complex64,
    pub m: Complex64,
    pub converged: bool,
    pub residual: f64,
}

fn tolerance(z: Complex64) -> f64 {
    1e-10 * z.norm().max(1.0)
}

/// m(z) with `Im m ≥ 0` for `Im z > 0`; for real z the real root on the
/// increasing branch of f bordering the relevant edge. `Im z < 0` is handled by
/// conjugation.
pub fn solve_m(f: &FFunction, structure: &BulkStructure, z: Complex64) -> Result<StieltjesValue> {
    if z.im > 0.0 {
        solve_complex(f, z, None)
    } else if z.im < 0.0 {
        let v = solve_complex(f, z.conj(), None)?;
        Ok(StieltjesValue {
            z,
            m: v.m.conj(),
            ..v
        })
    } else {
        solve_real(f, structure, z.re)
    }
}

/// Like [`solve_m`] for `Im z > 0`, trying Newton from `guess` before the
/// continuation path.
pub fn solve_m_from(f: &FFunction, z: Complex64, guess: Complex64) -> Result<StieltjesValue> {
    if !(z.im > 0.0) {
        return Err(SpectraError::Domain(format!(
            "warm-started solve needs Im z > 0, got {z}"
        )));
    }
    solve_complex(f, z, Some(guess))
}

fn solve_complex(f: &FFunction, z: Complex64, guess: Option<Complex64>) -> Result<StieltjesValue> {
    let tol = tolerance(z);
    if let Some(m0) = guess {
        if m0.im >= 0.0 {
            if let Some((m, res)) = newton(f, z, m0, tol, NEWTON_MAX) {
                return Ok(value(z, m, res));
            }
        }
    }
    if let Some((m, res)) = continuation(f, z, tol) {
        return Ok(value(z, m, res));
    }
    let (m, res) = fixed_point(f, z, tol);
    if res <= tol {
        return Ok(value(z, m, res));
    }
    Err(SpectraError::NoConvergence {
        what: "Stieltjes transform",
        iterations: FIXED_POINT_MAX,
        residual: res,
    })
}

fn value(z: Complex64, m: Complex64, residual: f64) -> StieltjesValue {
    StieltjesValue {
        z,
        m,
        converged: true,
        residual,
    }
}

/// Damped Newton on f(m) − z that never leaves the closed upper half plane.
pub(crate) fn newton(
    f: &FFunction,
    z: Complex64,
    m0: Complex64,
    tol: f64,
    max_iter: usize,
) -> Option<(Complex64, f64)> {
    let mut m = m0;
    let (mut fm, mut dfm) = f.eval_with_d1_complex(m);
    let mut res = (fm - z).norm();
    for _ in 0..max_iter {
        if !res.is_finite() {
            return None;
        }
        if res <= tol {
            return Some((m, res));
        }
        if dfm.norm() == 0.0 {
            return None;
        }
        let step = (fm - z) / dfm;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-12 {
            let cand = m - lambda * step;
            if cand.im >= 0.0 {
                let (fc, dfc) = f.eval_with_d1_complex(cand);
                let rc = (fc - z).norm();
                if rc.is_finite() && rc < res {
                    m = cand;
                    fm = fc;
                    dfm = dfc;
                    res = rc;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (res <= tol).then_some((m, res))
}

/// Newton along `E + iη_k`, lowering η geometrically from a height where
/// m ≈ −1/z; the step ratio grows after failures and shrinks after successes.
fn continuation(f: &FFunction, z: Complex64, tol: f64) -> Option<(Complex64, f64)> {
    let scale = f.sigma_max() * (1.0 + 1.0 / f.c_n()).powi(2) + z.re.abs() + 1.0;
    let mut good_eta = (10.0 * scale).max(z.im);
    let start = Complex64::new(z.re, good_eta);
    let mut m = match newton(f, start, -start.inv(), 1e-8 * start.norm(), NEWTON_MAX) {
        Some((m, _)) => m,
        None => return None,
    };
    let mut ratio: f64 = 0.5;
    loop {
        let eta = (good_eta * ratio).max(z.im);
        let last = eta <= z.im;
        let target = Complex64::new(z.re, eta);
        let step_tol = if last { tol } else { 1e-8 * target.norm().max(1.0) };
        match newton(f, target, m, step_tol, NEWTON_MAX) {
            Some((m_new, res)) => {
                m = m_new;
                if last {
                    return Some((m, res));
                }
                good_eta = eta;
                ratio = (ratio * 0.5).max(1e-3);
            }
            None => {
                ratio = ratio.sqrt();
                if ratio > 0.999 {
                    return None;
                }
            }
        }
    }
}

/// Damped iteration m ← 1/(Σ_k (w_k/c)/(m − q_k) − z).
fn fixed_point(f: &FFunction, z: Complex64, tol: f64) -> (Complex64, f64) {
    let mut m = -z.inv();
    let theta = 0.5;
    for _ in 0..FIXED_POINT_MAX {
        let next = (f.bulk_sum_complex(m) - z).inv();
        m = (1.0 - theta) * m + theta * next;
        if m.im < 0.0 {
            m.im = 0.0;
        }
        let res = (f.eval_complex_unchecked(m) - z).norm();
        if res <= tol {
            return (m, res);
        }
    }
    let res = (f.eval_complex_unchecked(m) - z).norm();
    (m, res)
}

fn solve_real(f: &FFunction, s: &BulkStructure, e: f64) -> Result<StieltjesValue> {
    if s.component_containing(e).is_some() {
        return Err(SpectraError::Domain(format!(
            "real z = {e} lies inside the support"
        )));
    }
    let c = f.c_n();
    let p = s.p;
    let g = |x: f64| f.eval_unchecked(x) - e;
    let (lo, hi) = if e > s.top_edge() {
        (s.x(1), 0.0)
    } else if let Some(i) = (1..p).find(|&i| e < s.left_edge(i) && e > s.right_edge(i + 1)) {
        (s.x(2 * i + 1), s.x(2 * i))
    } else if c < 1.0 {
        (0.0, s.x(2 * p))
    } else if e < 0.0 {
        let mut right = 1.0;
        while g(right) <= 0.0 {
            right *= 2.0;
            if right > 1e300 {
                return Err(SpectraError::Domain(format!("no real root for z = {e}")));
            }
        }
        (0.0, right)
    } else if e > 0.0 && c > 1.0 {
        let x_last = s.x(2 * p);
        let mut span = x_last.abs().max(1.0);
        while g(x_last - span) >= 0.0 {
            span *= 2.0;
            if span > 1e300 {
                return Err(SpectraError::Domain(format!("no real root for z = {e}")));
            }
        }
        (x_last - span, x_last)
    } else {
        return Err(SpectraError::Domain(format!(
            "z = {e} is the atom at zero (c_N = {c})"
        )));
    };
    debug_assert!(hi != INFINITE_CRITICAL_POINT);
    let m = bisect_sign(&g, lo, hi, Slope::Rising);
    let residual = g(m).abs();
    Ok(StieltjesValue {
        z: Complex64::new(e, 0.0),
        m: Complex64::new(m, 0.0),
        converged: true,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Root of c·z·m² + (c·z + c − 1)·m + c = 0 with positive imaginary part.
    /// Derived from −1/m + 1/(c(m+1)) = z.
    fn mp_closed_form(c: f64, z: Complex64) -> Complex64 {
        let a = c * z;
        let b = c * z + c - 1.0;
        let disc = (b * b - 4.0 * a * c).sqrt();
        let r1 = (-b + disc) / (2.0 * a);
        let r2 = (-b - disc) / (2.0 * a);
        if r1.im > r2.im {
            r1
        } else {
            r2
        }
    }

    #[test]
    fn mp_closed_form_agreement() {
        for c in [0.5, 1.0, 2.0] {
            let f = mp(c);
            let s = f.bulk_structure().unwrap();
            for z in [
                Complex64::new(2.0, 0.1),
                Complex64::new(0.5, 1e-3),
                Complex64::new(-1.0, 0.5),
                Complex64::new(7.0, 1e-6),
            ] {
                let v = solve_m(&f, &s, z).unwrap();
                let expected = mp_closed_form(c, z);
                assert!((v.m - expected).norm() < 1e-8, "c={c} z={z}: {} vs {expected}", v.m);
                assert!(v.residual <= 1e-10 * z.norm().max(1.0));
            }
        }
    }

    #[test]
    fn round_trip_gap_point() {
        let f = two_bulk();
        let s = f.bulk_structure().unwrap();
        let x = -0.3;
        assert!(f.derivative(x, 1).unwrap() > 0.0);
        let z = f.eval(x).unwrap();
        let v = solve_m(&f, &s, Complex64::new(z, 0.0)).unwrap();
        assert_abs_diff_eq!(v.m.re, x, epsilon = 1e-9);
        assert_eq!(v.m.im, 0.0);
    }

    #[test]
    fn right_of_top_edge() {
        let f = two_bulk();
        let s = f.bulk_structure().unwrap();
        let z = s.edges[0] + 1.0;
        let v = solve_m(&f, &s, Complex64::new(z, 0.0)).unwrap();
        assert!(v.m.re > s.critical_points[0] && v.m.re < 0.0);
        // independent bisection on (x_1, 0)
        let (mut lo, mut hi) = (s.critical_points[0], -1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f.eval(mid).unwrap() < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(v.m.re, 0.5 * (lo + hi), epsilon = 1e-12);
    }

    #[test]
    fn real_axis_branches() {
        // left of the bulk and negative z, c > 1
        let f = mp(2.0);
        let s = f.bulk_structure().unwrap();
        for e in [0.05, -0.5] {
            let v = solve_m(&f, &s, Complex64::new(e, 0.0)).unwrap();
            assert_abs_diff_eq!(f.eval(v.m.re).unwrap(), e, epsilon = 1e-10);
            assert!(f.derivative(v.m.re, 1).unwrap() > 0.0);
        }
        assert!(solve_m(&f, &s, Complex64::new(1.0, 0.0)).is_err());
        assert!(solve_m(&f, &s, Complex64::new(0.0, 0.0)).is_err());
        // c < 1
        let f = mp(0.5);
        let s = f.bulk_structure().unwrap();
        for e in [0.05, -0.5, 0.0] {
            let v = solve_m(&f, &s, Complex64::new(e, 0.0)).unwrap();
            assert_abs_diff_eq!(f.eval(v.m.re).unwrap(), e, epsilon = 1e-10);
        }
    }

    #[test]
    fn lower_half_plane_conjugates() {
        let f = two_bulk();
        let s = f.bulk_structure().unwrap();
        let up = solve_m(&f, &s, Complex64::new(3.0, 0.2)).unwrap();
        let down = solve_m(&f, &s, Complex64::new(3.0, -0.2)).unwrap();
        assert_eq!(up.m.conj(), down.m);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn stieltjes_positivity(re in -5.0f64..50.0, log_im in -6.0f64..1.0) {
            let f = two_bulk();
            let s = f.bulk_structure().unwrap();
            let z = Complex64::new(re, 10f64.powf(log_im));
            let v = solve_m(&f, &s, z).unwrap();
            prop_assert!(v.m.im > 0.0);
            prop_assert!(v.residual <= 1e-10 * z.norm().max(1.0));
        }
    }
}
