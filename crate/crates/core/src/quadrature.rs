//! Adaptive one-dimensional quadrature.
//!
//! Each panel is integrated with the double-exponential rule from the
//! `quadrature` crate; panels whose error estimate misses their share of
//! the tolerance are bisected.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 40;
const ABS_FLOOR: f64 = 1e-15;

/// `∫_a^b f` to relative tolerance `rel_tol` (absolute floor `1e-15`).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    integrate_panels(f, a, b, 8, rel_tol)
}

/// As [`integrate`], starting from `panels` equal panels.
///
/// Starting panels keep narrow features of a long interval from slipping
/// between the nodes of the first pass. The tolerance is relative to
/// `Σ |∫ panel|`, so integrals that cancel by symmetry still terminate.
pub fn integrate_panels(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    panels: usize,
    rel_tol: f64,
) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid(format!(
            "rel_tol must be > 0, got {rel_tol}"
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("integration limits must be finite"));
    }
    if panels == 0 {
        return Err(Error::invalid("need at least one panel"));
    }
    if a == b {
        return Ok(0.0);
    }
    let edges = panel_edges(a, b, panels);
    let mass: f64 = edges
        .windows(2)
        .map(|w| quadrature::integrate(&f, w[0], w[1], 1e-8).integral.abs())
        .sum();
    if !mass.is_finite() {
        return Err(Error::Numerical("integrand is not finite".into()));
    }
    bisect(f, &edges, (rel_tol * mass).max(ABS_FLOOR))
}

/// `∫_a^b f` to absolute tolerance `abs_tol`, starting from `panels` equal panels.
pub fn integrate_abs(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
) -> Result<f64> {
    if !(abs_tol > 0.0) {
        return Err(Error::invalid(format!(
            "abs_tol must be > 0, got {abs_tol}"
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("integration limits must be finite"));
    }
    if panels == 0 {
        return Err(Error::invalid("need at least one panel"));
    }
    if a == b {
        return Ok(0.0);
    }
    bisect(f, &panel_edges(a, b, panels), abs_tol)
}

fn panel_edges(a: f64, b: f64, panels: usize) -> Vec<f64> {
    let width = b - a;
    (0..=panels)
        .map(|i| {
            if i == panels {
                b
            } else {
                a + width * i as f64 / panels as f64
            }
        })
        .collect()
}

/// Adaptive bisection until each panel meets its width share of `target`.
fn bisect(f: impl Fn(f64) -> f64, edges: &[f64], target: f64) -> Result<f64> {
    let width = edges[edges.len() - 1] - edges[0];
    let mut total = 0.0;
    let mut stack: Vec<(f64, f64, u32)> = edges.windows(2).rev().map(|w| (w[0], w[1], 0)).collect();
    while let Some((lo, hi, depth)) = stack.pop() {
        let share = target * ((hi - lo) / width).abs();
        let out = quadrature::integrate(&f, lo, hi, share);
        if !out.integral.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand is not finite on [{lo}, {hi}]"
            )));
        }
        if out.error_estimate <= share {
            total += out.integral;
        } else if depth >= MAX_DEPTH {
            return Err(Error::Numerical(format!(
                "quadrature did not converge on [{lo}, {hi}]"
            )));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(total)
}

/// `∫_a^∞ f` through the substitution `x = a + s / (1 - s)`.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, rel_tol: f64) -> Result<f64> {
    let g = |s: f64| {
        let one_minus = 1.0 - s;
        if one_minus <= 0.0 {
            return 0.0;
        }
        f(a + s / one_minus) / (one_minus * one_minus)
    };
    integrate(g, 0.0, 1.0, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_trig() {
        let v = integrate(|x| x.powi(20), -1.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 / 21.0).abs() < 1e-13);
        let s = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integrand_is_resolved() {
        // ∫_0^{20π} cos(x)^2 = 10π
        let v = integrate(|x| x.cos().powi(2), 0.0, 20.0 * std::f64::consts::PI, 1e-10).unwrap();
        assert!((v - 10.0 * std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn half_line_gaussian() {
        let v = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1e-12).unwrap();
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        let w = integrate_to_infinity(|x| x * (-x).exp(), 1.0, 1e-12).unwrap();
        assert!((w - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn absolute_tolerance_on_negligible_tail() {
        let v = integrate_abs(|x| (-x * x).exp(), 10.0, 20.0, 4, 1e-12).unwrap();
        assert!(v.abs() < 1e-12);
        let w = integrate_abs(|x| x * x, 0.0, 3.0, 2, 1e-12).unwrap();
        assert!((w - 9.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(integrate(|x| x, 0.0, 1.0, 0.0).is_err());
        assert!(integrate(|x| x, 0.0, f64::INFINITY, 1e-6).is_err());
        assert_eq!(integrate(|x| x, 2.0, 2.0, 1e-6).unwrap(), 0.0);
        assert!(integrate_abs(|x| x, 0.0, 1.0, 4, -1.0).is_err());
    }
}
