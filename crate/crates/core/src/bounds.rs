//! Closed-form Lieb-Robinson envelopes and velocities.
//!
//! Envelopes exclude observable norms and cardinality factors; callers
//! multiply those in. All functions are pure.

use crate::anharmonic::{kappa_quadrature, AssumptionConstants, SitePotential};
use crate::error::{Error, Result};
use crate::harmonic::{light_cone_velocity, HarmonicParams};
use crate::lattice::{default_convolution_constant, DecayProfile, TorusLattice};

/// Bisection tolerance for [`optimal_mu`].
const BISECTION_TOL: f64 = 1e-12;

/// `c_{ω,λ} = sqrt(ω² + 4Σλ_j)`.
pub fn coupling_constant(params: &HarmonicParams) -> f64 {
    params.coupling_constant()
}

fn check_rate(name: &str, mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain(format!(
            "{name} must be finite and > 0, got {mu}"
        )));
    }
    Ok(())
}

/// `v_h(μ) = c max(2/μ, e^{μ/2 + 1})`.
pub fn harmonic_velocity(mu: f64, params: &HarmonicParams) -> Result<f64> {
    check_rate("mu", mu)?;
    Ok(light_cone_velocity(params.coupling_constant(), mu))
}

/// The rate minimizing `v_h`, where the two branches of the max coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalRate {
    pub mu0: f64,
    /// `v_h(μ₀) / c = 2 / μ₀`.
    pub v_opt_factor: f64,
}

/// Solves `2/μ = e^{μ/2 + 1}` by bisection on `[1/2, 1]`.
pub fn optimal_mu() -> OptimalRate {
    let gap = |mu: f64| 2.0 / mu - (mu / 2.0 + 1.0).exp();
    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu0 = 0.5 * (lo + hi);
    OptimalRate {
        mu0,
        v_opt_factor: 2.0 / mu0,
    }
}

/// `sup_{s >= 0} (1 + s)^{ν+1} e^{-εs}`, attained at `s* = max(0, (ν+1)/ε - 1)`.
pub fn sup_prefactor(nu: usize, epsilon: f64) -> Result<f64> {
    check_rate("epsilon", epsilon)?;
    let k = (nu + 1) as f64;
    let s = (k / epsilon - 1.0).max(0.0);
    Ok((1.0 + s).powf(k) * (-epsilon * s).exp())
}

/// `(1 + c e^{(μ+ε)/2} + 1/c) sup_s (1+s)^{ν+1} e^{-εs}`.
pub fn f_form_constant(c: f64, mu: f64, epsilon: f64, nu: usize) -> Result<f64> {
    Ok((1.0 + c * ((mu + epsilon) / 2.0).exp() + 1.0 / c) * sup_prefactor(nu, epsilon)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeVariant {
    /// Arbitrary smooth observables.
    General,
    /// Weyl observables.
    Weyl,
    /// Weyl observables with the `F_μ` decay profile.
    FForm { epsilon: f64 },
}

fn check_sets(lat: &TorusLattice, xs: &[usize], ys: &[usize]) -> Result<()> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::domain("envelope needs nonempty site sets"));
    }
    if let Some(&bad) = xs.iter().chain(ys).find(|&&i| i >= lat.len()) {
        return Err(Error::domain(format!(
            "site index {bad} outside lattice of {} sites",
            lat.len()
        )));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::domain(format!("time must be finite, got {t}")));
    }
    Ok(())
}

/// `Σ_{x ∈ X, y ∈ Y} F_μ(d(x, y))`.
fn decay_pair_sum(lat: &TorusLattice, xs: &[usize], ys: &[usize], mu: f64) -> Result<f64> {
    let profile = DecayProfile::new(mu, lat.nu())?;
    Ok(xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .map(|(x, y)| profile.eval(lat.distance_idx(x, y) as f64))
        .sum())
}

/// Harmonic envelope for observables supported on `X` and `Y`.
pub fn harmonic_envelope(
    lat: &TorusLattice,
    params: &HarmonicParams,
    xs: &[usize],
    ys: &[usize],
    t: f64,
    mu: f64,
    variant: EnvelopeVariant,
) -> Result<f64> {
    params.check_lattice(lat)?;
    check_sets(lat, xs, ys)?;
    check_time(t)?;
    check_rate("mu", mu)?;
    let c = params.coupling_constant();
    let tail = c * (mu / 2.0).exp() + 1.0 / c;
    match variant {
        EnvelopeVariant::General | EnvelopeVariant::Weyl => {
            let lead = if variant == EnvelopeVariant::General {
                2.0
            } else {
                1.0
            };
            let v = light_cone_velocity(c, mu);
            let sum: f64 = xs
                .iter()
                .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
                .map(|(x, y)| (-mu * (lat.distance_idx(x, y) as f64 - v * t.abs())).exp())
                .sum();
            Ok((lead + tail) * sum)
        }
        EnvelopeVariant::FForm { epsilon } => {
            let constant = f_form_constant(c, mu, epsilon, lat.nu())?;
            let rate = mu + epsilon;
            let growth = rate * light_cone_velocity(c, rate);
            Ok(constant * (growth * t.abs()).exp() * decay_pair_sum(lat, xs, ys, mu)?)
        }
    }
}

/// `κ_V = ∫ |r| |V̂'(r)| dr`, in closed form when the potential provides one.
pub fn kappa_v(pot: &dyn SitePotential, quad_tol: f64) -> Result<f64> {
    if let Some(k) = pot.kappa_closed_form() {
        return Ok(k);
    }
    kappa_quadrature(pot, quad_tol)
}

/// Rates and constants shared by the anharmonic envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub mu: f64,
    pub epsilon: f64,
    /// `c_{ω,λ}`.
    pub c: f64,
    pub kappa: f64,
    pub c3: f64,
    pub mu3: f64,
    /// `C_ν`.
    pub cnu: f64,
}

impl EnvelopeParams {
    /// Single-site parameters: `c` and `C_ν` from `params` and `nu`, no multi-site term.
    pub fn single_site(
        params: &HarmonicParams,
        nu: usize,
        mu: f64,
        epsilon: f64,
        kappa: f64,
    ) -> Result<Self> {
        check_rate("mu", mu)?;
        check_rate("epsilon", epsilon)?;
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::domain(format!(
                "kappa_V must be finite and >= 0, got {kappa}"
            )));
        }
        Ok(Self {
            mu,
            epsilon,
            c: params.coupling_constant(),
            kappa,
            c3: 0.0,
            mu3: f64::INFINITY,
            cnu: default_convolution_constant(nu)?,
        })
    }

    /// Multi-site parameters from certified assumption constants.
    pub fn multi_site(
        params: &HarmonicParams,
        nu: usize,
        constants: &AssumptionConstants,
        epsilon: f64,
    ) -> Result<Self> {
        check_rate("epsilon", epsilon)?;
        if !(constants.mu3 >= 0.0) || !constants.mu3.is_finite() {
            return Err(Error::domain(format!(
                "mu3 must be finite and >= 0 for a multi-site envelope, got {}",
                constants.mu3
            )));
        }
        if !(constants.c3 >= 0.0) || !constants.c3.is_finite() {
            return Err(Error::domain(format!(
                "C3 must be finite and >= 0, got {}",
                constants.c3
            )));
        }
        Ok(Self {
            mu: constants.mu3,
            epsilon,
            c: params.coupling_constant(),
            kappa: 0.0,
            c3: constants.c3,
            mu3: constants.mu3,
            cnu: default_convolution_constant(nu)?,
        })
    }

    /// Envelope prefactor `C` at rate `mu`.
    pub fn prefactor(&self, nu: usize) -> Result<f64> {
        f_form_constant(self.c, self.mu, self.epsilon, nu)
    }

    /// `δ = (μ+ε) v_h(μ+ε) + C C_ν κ_V`.
    pub fn delta_single(&self, nu: usize) -> Result<f64> {
        let rate = self.mu + self.epsilon;
        Ok(rate * light_cone_velocity(self.c, rate) + self.prefactor(nu)? * self.cnu * self.kappa)
    }

    /// `δ = (μ₃+ε) v_h(μ₃+ε) + C C₃ C_ν²`.
    pub fn delta_multi(&self, nu: usize) -> Result<f64> {
        let rate = self.mu3 + self.epsilon;
        let c = f_form_constant(self.c, self.mu3, self.epsilon, nu)?;
        Ok(rate * light_cone_velocity(self.c, rate) + c * self.c3 * self.cnu * self.cnu)
    }
}

/// Single-site anharmonic envelope `C e^{δ|t|} Σ F_μ(d(x, y))`.
pub fn anharmonic_envelope(
    lat: &TorusLattice,
    ep: &EnvelopeParams,
    xs: &[usize],
    ys: &[usize],
    t: f64,
) -> Result<f64> {
    check_sets(lat, xs, ys)?;
    check_time(t)?;
    let nu = lat.nu();
    let c = ep.prefactor(nu)?;
    Ok(c * (ep.delta_single(nu)? * t.abs()).exp() * decay_pair_sum(lat, xs, ys, ep.mu)?)
}

/// Multi-site envelope `C e^{δ|t|} Σ F_{μ₃}(d(x, y))`.
pub fn multisite_envelope(
    lat: &TorusLattice,
    params: &HarmonicParams,
    constants: &AssumptionConstants,
    xs: &[usize],
    ys: &[usize],
    t: f64,
    epsilon: f64,
) -> Result<f64> {
    params.check_lattice(lat)?;
    check_sets(lat, xs, ys)?;
    check_time(t)?;
    let nu = lat.nu();
    let ep = EnvelopeParams::multi_site(params, nu, constants, epsilon)?;
    let c = f_form_constant(ep.c, ep.mu3, epsilon, nu)?;
    Ok(c * (ep.delta_multi(nu)? * t.abs()).exp() * decay_pair_sum(lat, xs, ys, ep.mu3)?)
}

/// Natural logarithm of [`multisite_envelope`], finite even where the
/// envelope itself overflows.
pub fn multisite_envelope_ln(
    lat: &TorusLattice,
    params: &HarmonicParams,
    constants: &AssumptionConstants,
    xs: &[usize],
    ys: &[usize],
    t: f64,
    epsilon: f64,
) -> Result<f64> {
    params.check_lattice(lat)?;
    check_sets(lat, xs, ys)?;
    check_time(t)?;
    let nu = lat.nu();
    let ep = EnvelopeParams::multi_site(params, nu, constants, epsilon)?;
    let c = f_form_constant(ep.c, ep.mu3, epsilon, nu)?;
    Ok(c.ln() + ep.delta_multi(nu)? * t.abs() + decay_pair_sum(lat, xs, ys, ep.mu3)?.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityMode {
    SingleSite,
    MultiSite,
}

/// Upper bound on the anharmonic velocity.
///
/// `mu` is `μ` for a single-site potential and `μ₃` for a multi-site one;
/// `strength` is `κ_V` or `C₃` respectively.
pub fn anharmonic_velocity(
    mu: f64,
    epsilon: f64,
    params: &HarmonicParams,
    nu: usize,
    strength: f64,
    mode: VelocityMode,
) -> Result<f64> {
    check_rate("epsilon", epsilon)?;
    if mode == VelocityMode::MultiSite && mu == 0.0 {
        return Err(Error::NoFiniteVelocity(
            "mu3 = 0 gives only polynomial decay".into(),
        ));
    }
    check_rate("mu", mu)?;
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(Error::domain(format!(
            "perturbation strength must be finite and >= 0, got {strength}"
        )));
    }
    let c = params.coupling_constant();
    let rate = mu + epsilon;
    let base = (1.0 + epsilon / mu) * light_cone_velocity(c, rate);
    let prefactor = f_form_constant(c, mu, epsilon, nu)?;
    let cnu = default_convolution_constant(nu)?;
    let correction = match mode {
        VelocityMode::SingleSite => prefactor * cnu * strength / mu,
        VelocityMode::MultiSite => prefactor * strength * cnu * cnu / mu,
    };
    Ok(base + correction)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimates {
    /// `v_h(μ)`.
    pub v_h: f64,
    pub mu0: f64,
    /// `v_h(μ₀)`.
    pub v_h_opt: f64,
    pub delta: f64,
    pub v_ah: f64,
}

/// All velocity quantities for a single-site configuration.
pub fn velocity_estimates(
    params: &HarmonicParams,
    nu: usize,
    mu: f64,
    epsilon: f64,
    kappa: f64,
) -> Result<VelocityEstimates> {
    let ep = EnvelopeParams::single_site(params, nu, mu, epsilon, kappa)?;
    let opt = optimal_mu();
    Ok(VelocityEstimates {
        v_h: harmonic_velocity(mu, params)?,
        mu0: opt.mu0,
        v_h_opt: ep.c * opt.v_opt_factor,
        delta: ep.delta_single(nu)?,
        v_ah: anharmonic_velocity(mu, epsilon, params, nu, kappa, VelocityMode::SingleSite)?,
    })
}
