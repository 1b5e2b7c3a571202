//! Constants `C₁, C̃₁, μ₁, C₂, μ₂, C₃, μ₃` for the configured potentials.
//!
//! The constants are assembled from bounds on the generating functions:
//! `|V'(q)| <= |V'(0)| + S|q|` with `S = sup |V''|` for the site term and
//! `|∂₁V(a,b)| <= G|a|`, `|∂ᵢᵢV| <= D`, `|∂₁₂V| <= M` for the pair term.
//! Each bound is then checked on a grid over `[-50, 50]` (step `1e-2` in one
//! variable, `0.5` per axis in two) and at `10⁴` random points, and the
//! lattice-level inequalities are spot-checked at random phase points.
//!
//! A rate of `+∞` means the corresponding inequality holds with only the
//! on-site term `F(0) = 1` on its right-hand side.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::potential::{kappa_quadrature, SitePotential, Q_RANGE};
use super::{AnharmonicSystem, PairPotential};
use crate::error::{Error, Result};
use crate::lattice::{decay_sum, DecayProfile};

/// Spacing of the one-dimensional certification grid.
pub const CERT_GRID_STEP: f64 = 1e-2;
/// Spacing per axis of the two-dimensional certification grid.
const PAIR_GRID_STEP: f64 = 0.5;
/// Random points checked in addition to the grid.
pub const CERT_RANDOM_POINTS: usize = 10_000;
const CERT_SEED: u64 = 0x5eed_c045;
const LATTICE_SPOT_CHECKS: usize = 20;
const KAPPA_TOL: f64 = 1e-10;
/// Relative slack for roundoff in certified comparisons.
const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionConstants {
    pub c1: f64,
    pub c1_tilde: f64,
    pub mu1: f64,
    pub c2: f64,
    pub mu2: f64,
    pub c3: f64,
    pub mu3: f64,
}

impl AssumptionConstants {
    pub fn zero() -> Self {
        Self {
            c1: 0.0,
            c1_tilde: 0.0,
            mu1: f64::INFINITY,
            c2: 0.0,
            mu2: f64::INFINITY,
            c3: 0.0,
            mu3: f64::INFINITY,
        }
    }
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + SLACK) + f64::MIN_POSITIVE
}

fn grid_1d() -> impl Iterator<Item = f64> {
    let n = (2.0 * Q_RANGE / CERT_GRID_STEP).round() as usize;
    (0..=n).map(|i| -Q_RANGE + i as f64 * CERT_GRID_STEP)
}

fn random_1d(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-Q_RANGE..=Q_RANGE)
}

/// Certified single-site data: `(S, |V'(0)|, κ_V)`.
fn site_data(pot: &dyn SitePotential) -> Result<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(CERT_SEED);
    let sup_d2 = match pot.sup_abs_d2() {
        Some(s) => s,
        None => grid_1d().map(|q| pot.d2(q).abs()).fold(0.0, f64::max) * (1.0 + 1e-6),
    };
    let b0 = pot.d1(0.0).abs();
    let points = grid_1d().chain((0..CERT_RANDOM_POINTS).map(|_| random_1d(&mut rng)));
    for q in points {
        let (d1, d2) = (pot.d1(q), pot.d2(q));
        if !d1.is_finite() || !d2.is_finite() {
            return Err(Error::Assumption(format!(
                "site potential derivatives not finite at q = {q}"
            )));
        }
        if !within(d2.abs(), sup_d2) {
            return Err(Error::Assumption(format!(
                "second-derivative bound violated: |V''({q})| = {} > {sup_d2}",
                d2.abs()
            )));
        }
        if !within(d1.abs(), b0 + sup_d2 * q.abs()) {
            return Err(Error::Assumption(format!(
                "harmonic domination violated: |V'({q})| = {} > {}",
                d1.abs(),
                b0 + sup_d2 * q.abs()
            )));
        }
    }
    let kappa_q = kappa_quadrature(pot, KAPPA_TOL)?;
    let kappa = match pot.kappa_closed_form() {
        Some(k) => {
            if (k - kappa_q).abs() > 1e-8 * k.max(1.0) {
                return Err(Error::Consistency(format!(
                    "kappa_V closed form {k} disagrees with quadrature {kappa_q}"
                )));
            }
            k.max(kappa_q)
        }
        None => kappa_q,
    };
    Ok((sup_d2, b0, kappa))
}

/// Certified pair data: `(G, D, M, I)` with `I` the Fourier moment.
fn pair_data(pair: &PairPotential) -> Result<(f64, f64, f64, f64)> {
    let (g, d, m) = (
        pair.linear_growth(),
        pair.sup_abs_diag(),
        pair.sup_abs_mixed(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(CERT_SEED ^ 0x9a1);
    let n = (2.0 * Q_RANGE / PAIR_GRID_STEP).round() as usize;
    let axis: Vec<f64> = (0..=n)
        .map(|i| -Q_RANGE + i as f64 * PAIR_GRID_STEP)
        .collect();
    let grid = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b)));
    let random: Vec<(f64, f64)> = (0..CERT_RANDOM_POINTS)
        .map(|_| (random_1d(&mut rng), random_1d(&mut rng)))
        .collect();
    for (a, b) in grid.chain(random) {
        let [ga, gb] = pair.gradient(a, b);
        let h = pair.hessian(a, b);
        if !within(ga.abs(), g * a.abs()) || !within(gb.abs(), g * b.abs()) {
            return Err(Error::Assumption(format!(
                "pair harmonic domination violated at ({a}, {b})"
            )));
        }
        if !within(h[0][0].abs(), d) || !within(h[1][1].abs(), d) || !within(h[0][1].abs(), m) {
            return Err(Error::Assumption(format!(
                "pair second-derivative bound violated at ({a}, {b})"
            )));
        }
    }
    let closed = pair.fourier_moment_closed_form();
    let quad = pair.fourier_moment_quadrature(KAPPA_TOL)?;
    if (closed - quad).abs() > 1e-8 * closed.max(1.0) {
        return Err(Error::Consistency(format!(
            "pair Fourier moment closed form {closed} disagrees with quadrature {quad}"
        )));
    }
    Ok((g, d, m, closed.max(quad)))
}

/// Constants for the system's potentials, certified as described in the
/// module documentation.
pub fn assumption_constants(sys: &AnharmonicSystem) -> Result<AssumptionConstants> {
    if sys.is_harmonic() {
        return Ok(AssumptionConstants::zero());
    }
    let (s, b0, kappa) = match sys.site_potential() {
        Some(pot) => site_data(pot)?,
        None => (0.0, 0.0, 0.0),
    };
    let consts = match sys.pair_potential() {
        None => {
            let (c1, c1_tilde) = domination(s, b0);
            AssumptionConstants {
                c1,
                c1_tilde,
                mu1: f64::INFINITY,
                c2: s,
                mu2: f64::INFINITY,
                c3: kappa,
                mu3: f64::INFINITY,
            }
        }
        Some(pair) => {
            let (g, d, m, moment) = pair_data(pair)?;
            let w = pair.weight_mu();
            let others = decay_sum(sys.lattice(), w) - 1.0;
            let (c1, c1_tilde) = domination(s + others * g, b0);
            AssumptionConstants {
                c1,
                c1_tilde,
                mu1: f64::INFINITY,
                c2: m.max(s + others * d),
                mu2: w,
                c3: moment.max(kappa + others * moment),
                mu3: w,
            }
        }
    };
    spot_check(sys, &consts)?;
    Ok(consts)
}

/// `(C₁, C̃₁)` from `|Σ ∂V| <= b0 + slope |q_x|`.
fn domination(slope: f64, b0: f64) -> (f64, f64) {
    if b0 == 0.0 {
        (slope * slope, 0.0)
    } else {
        (2.0 * slope.max(b0).powi(2), 1.0)
    }
}

fn rate_weight(lat: &crate::lattice::TorusLattice, mu: f64, r: u64) -> f64 {
    if mu.is_infinite() {
        if r == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        DecayProfile::new(mu, lat.nu()).map_or(0.0, |p| p.eval(r as f64))
    }
}

/// Evaluates the lattice-level inequalities at random phase points.
fn spot_check(sys: &AnharmonicSystem, c: &AssumptionConstants) -> Result<()> {
    let lat = sys.lattice();
    let n = lat.len();
    let mut rng = ChaCha8Rng::seed_from_u64(CERT_SEED ^ 0x1a7);
    let pair_w = sys
        .pair_potential()
        .map(|p| DecayProfile::new(p.weight_mu(), lat.nu()).expect("validated rate"));
    for _ in 0..LATTICE_SPOT_CHECKS {
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..=5.0)).collect();
        for x in 0..n {
            let mut grad_sum = sys.site_potential().map_or(0.0, |v| v.d1(q[x]).abs());
            let mut diag = sys.site_potential().map_or(0.0, |v| v.d2(q[x]).abs());
            if let (Some(pair), Some(prof)) = (sys.pair_potential(), &pair_w) {
                for z in (0..n).filter(|&z| z != x) {
                    let wz = prof.eval(lat.distance_idx(x, z) as f64);
                    grad_sum += wz * pair.gradient(q[x], q[z])[0].abs();
                    diag += wz * pair.hessian(q[x], q[z])[0][0].abs();
                    let mixed = wz * pair.hessian(q[x], q[z])[0][1].abs();
                    let rhs = c.c2 * rate_weight(lat, c.mu2, lat.distance_idx(x, z));
                    if !within(mixed, rhs) {
                        return Err(Error::Assumption(format!(
                            "second-derivative bound violated for sites {x}, {z}"
                        )));
                    }
                }
            }
            let rhs1: f64 = (0..n)
                .map(|y| {
                    (q[y] * q[y] + c.c1_tilde) * rate_weight(lat, c.mu1, lat.distance_idx(x, y))
                })
                .sum::<f64>()
                * c.c1;
            if !within(grad_sum * grad_sum, rhs1) {
                return Err(Error::Assumption(format!(
                    "harmonic domination violated at site {x}: {} > {rhs1}",
                    grad_sum * grad_sum
                )));
            }
            if !within(diag, c.c2) {
                return Err(Error::Assumption(format!(
                    "second-derivative bound violated at site {x}: {diag} > {}",
                    c.c2
                )));
            }
        }
    }
    Ok(())
}
