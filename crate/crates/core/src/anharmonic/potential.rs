//! Single-site and pair potentials with their Fourier data.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature;

/// Half-width of the interval on which `V'` is integrated numerically and on
/// which assumption constants are certified.
pub const Q_RANGE: f64 = 50.0;

/// Largest frequency examined when integrating `|r| |V̂'(r)|` numerically.
const R_CAP: f64 = 4096.0;

/// A single-site perturbation `V: ℝ → ℝ`.
///
/// The Fourier convention is `V̂'(r) = (2π)^{-1} ∫ e^{-iqr} V'(q) dq`.
pub trait SitePotential: fmt::Debug + Send + Sync {
    fn value(&self, q: f64) -> f64;
    fn d1(&self, q: f64) -> f64;
    fn d2(&self, q: f64) -> f64;

    /// `|V̂'(r)|` in closed form, when known.
    fn fourier_d1_abs(&self, _r: f64) -> Option<f64> {
        None
    }

    /// `κ_V` in closed form, when known.
    fn kappa_closed_form(&self) -> Option<f64> {
        None
    }

    /// `sup |V''|` in closed form, when known.
    fn sup_abs_d2(&self) -> Option<f64> {
        None
    }
}

/// `|V̂'(r)|`, from the closed form if available, otherwise by quadrature of
/// `V'` over `[-Q_RANGE, Q_RANGE]`.
pub fn fourier_d1_abs(pot: &dyn SitePotential, r: f64, rel_tol: f64) -> Result<f64> {
    if let Some(v) = pot.fourier_d1_abs(r) {
        return Ok(v);
    }
    let panels = (2.0 * Q_RANGE) as usize;
    let re = quadrature::integrate_panels(
        |q| pot.d1(q) * (q * r).cos(),
        -Q_RANGE,
        Q_RANGE,
        panels,
        rel_tol,
    )?;
    let im = quadrature::integrate_panels(
        |q| pot.d1(q) * (q * r).sin(),
        -Q_RANGE,
        Q_RANGE,
        panels,
        rel_tol,
    )?;
    Ok(re.hypot(im) / (2.0 * PI))
}

/// `κ_V = ∫ |r| |V̂'(r)| dr` by quadrature.
///
/// With a closed-form transform the half line is mapped onto `[0, 1)`.
/// Otherwise the integral is accumulated over doubling intervals, each to an
/// absolute tolerance scaled by the running total, until two consecutive
/// intervals contribute below `rel_tol`; an integrand still
/// significant at `r = 4096` is reported as divergent.
pub fn kappa_quadrature(pot: &dyn SitePotential, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid(format!(
            "rel_tol must be > 0, got {rel_tol}"
        )));
    }
    let diverged = |e: Error| Error::Assumption(format!("kappa_V integral does not converge: {e}"));
    if pot.fourier_d1_abs(0.0).is_some() {
        let half = quadrature::integrate_to_infinity(
            |r| r * pot.fourier_d1_abs(r).unwrap_or(f64::NAN),
            0.0,
            rel_tol,
        )
        .map_err(diverged)?;
        return Ok(2.0 * half);
    }
    let inner_tol = (rel_tol * 1e-3).max(1e-14);
    let failure = RefCell::new(None);
    let integrand = |r: f64| match fourier_d1_abs(pot, r, inner_tol) {
        Ok(v) => r * v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let mut total = 0.0_f64;
    let mut quiet = 0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi <= R_CAP {
        let rough = ::quadrature::integrate(integrand, lo, hi, 1e-3).integral;
        let abs_tol = rel_tol * total.abs().max(rough.abs()).max(f64::MIN_POSITIVE);
        let piece = quadrature::integrate_abs(integrand, lo, hi, 8, abs_tol).map_err(diverged)?;
        if let Some(e) = failure.borrow_mut().take() {
            return Err(diverged(e));
        }
        total += piece;
        if piece.abs() <= 0.1 * rel_tol * total.abs() {
            quiet += 1;
            if quiet == 2 {
                return Ok(2.0 * total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::Assumption(format!(
        "kappa_V integrand still significant at r = {R_CAP}"
    )))
}

/// `V(q) = A e^{-q²/w²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSite {
    amplitude: f64,
    width: f64,
}

impl GaussianSite {
    pub fn new(amplitude: f64, width: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::invalid("site amplitude must be finite"));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::invalid(format!(
                "site width must be > 0, got {width}"
            )));
        }
        Ok(Self { amplitude, width })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    fn envelope(&self, q: f64) -> f64 {
        (-(q * q) / (self.width * self.width)).exp()
    }
}

impl SitePotential for GaussianSite {
    fn value(&self, q: f64) -> f64 {
        self.amplitude * self.envelope(q)
    }

    fn d1(&self, q: f64) -> f64 {
        let w2 = self.width * self.width;
        -2.0 * self.amplitude * q / w2 * self.envelope(q)
    }

    fn d2(&self, q: f64) -> f64 {
        let w2 = self.width * self.width;
        self.amplitude * (4.0 * q * q / (w2 * w2) - 2.0 / w2) * self.envelope(q)
    }

    fn fourier_d1_abs(&self, r: f64) -> Option<f64> {
        let w = self.width;
        Some(
            self.amplitude.abs() * w * r.abs() / (2.0 * PI.sqrt()) * (-(w * w * r * r) / 4.0).exp(),
        )
    }

    fn kappa_closed_form(&self) -> Option<f64> {
        Some(2.0 * self.amplitude.abs() / (self.width * self.width))
    }

    fn sup_abs_d2(&self) -> Option<f64> {
        Some(2.0 * self.amplitude.abs() / (self.width * self.width))
    }
}

/// Pair interaction `F_μ(d(z₁, z₂)) V(q_{z₁}, q_{z₂})` summed over unordered
/// pairs of distinct sites, with `V(a, b) = A e^{-(a² + b²)/w²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPotential {
    amplitude: f64,
    width: f64,
    weight_mu: f64,
}

impl PairPotential {
    pub fn new(amplitude: f64, width: f64, weight_mu: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::invalid("pair amplitude must be finite"));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::invalid(format!(
                "pair width must be > 0, got {width}"
            )));
        }
        if !(weight_mu >= 0.0) || !weight_mu.is_finite() {
            return Err(Error::invalid(format!(
                "pair weight rate must be finite and >= 0, got {weight_mu}"
            )));
        }
        Ok(Self {
            amplitude,
            width,
            weight_mu,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn weight_mu(&self) -> f64 {
        self.weight_mu
    }

    pub fn value(&self, a: f64, b: f64) -> f64 {
        self.amplitude * (-(a * a + b * b) / (self.width * self.width)).exp()
    }

    /// `(∂_1 V, ∂_2 V)`.
    pub fn gradient(&self, a: f64, b: f64) -> [f64; 2] {
        let s = -2.0 / (self.width * self.width) * self.value(a, b);
        [s * a, s * b]
    }

    /// `[[∂₁₁V, ∂₁₂V], [∂₂₁V, ∂₂₂V]]`.
    pub fn hessian(&self, a: f64, b: f64) -> [[f64; 2]; 2] {
        let w2 = self.width * self.width;
        let v = self.value(a, b);
        let d11 = (4.0 * a * a / (w2 * w2) - 2.0 / w2) * v;
        let d22 = (4.0 * b * b / (w2 * w2) - 2.0 / w2) * v;
        let d12 = 4.0 * a * b / (w2 * w2) * v;
        [[d11, d12], [d12, d22]]
    }

    /// `sup |∂₁₁V| = sup |∂₂₂V|`.
    pub fn sup_abs_diag(&self) -> f64 {
        2.0 * self.amplitude.abs() / (self.width * self.width)
    }

    /// `sup |∂₁₂V|`.
    pub fn sup_abs_mixed(&self) -> f64 {
        2.0 * self.amplitude.abs() / (std::f64::consts::E * self.width * self.width)
    }

    /// Smallest `G` with `|∂_1 V(a, b)| <= G |a|` for all `a, b`.
    pub fn linear_growth(&self) -> f64 {
        self.sup_abs_diag()
    }

    /// `∫∫ (|r₁| + |r₂|)(|∂̂₁V| + |∂̂₂V|) dr` in closed form.
    pub fn fourier_moment_closed_form(&self) -> f64 {
        4.0 * self.amplitude.abs() * (PI + 2.0) / (PI * self.width * self.width)
    }

    /// The same moment by quadrature of the factorised one-dimensional
    /// transforms.
    pub fn fourier_moment_quadrature(&self, rel_tol: f64) -> Result<f64> {
        let w = self.width;
        let a = self.amplitude.abs();
        let norm = w / (2.0 * PI.sqrt());
        let gauss = |r: f64| norm * (-(w * w * r * r) / 4.0).exp();
        let deriv = |r: f64| a * r.abs() * gauss(r);
        let m0 = 2.0 * quadrature::integrate_to_infinity(gauss, 0.0, rel_tol)?;
        let m1 = 2.0 * quadrature::integrate_to_infinity(|r| r * gauss(r), 0.0, rel_tol)?;
        let n0 = 2.0 * quadrature::integrate_to_infinity(deriv, 0.0, rel_tol)?;
        let n1 = 2.0 * quadrature::integrate_to_infinity(|r| r * deriv(r), 0.0, rel_tol)?;
        // two gradient components contribute equally
        Ok(2.0 * (n1 * m0 + n0 * m1))
    }
}
