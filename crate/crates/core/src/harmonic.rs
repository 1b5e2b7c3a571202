//! Exact solution of the periodic harmonic lattice.
//!
//! Hamilton's equations for `H_h = Σ_x p_x² + ω² q_x² + Σ_j λ_j (q_x - q_{x+e_j})²`
//! decouple in Fourier variables. The flow is a periodic convolution of the
//! initial data against three real kernels
//!
//! ```text
//! h_t^(m)(x) = |Λ|^{-1} Σ_k e^{i k·x} w_m(k, t),   m ∈ {-1, 0, 1}
//! w_0  =  cos(2γt),   w_-1 = -sin(2γt)/γ,   w_1 = -γ sin(2γt)
//! ```
//!
//! where `γ(k) = sqrt(ω² + 4 Σ_j λ_j sin²(k_j/2))`. Every weight is even in
//! `k`, so the sums are real; the imaginary residue is checked and discarded.
//! Zero modes (`γ(k) = 0`, only possible when `ω = 0`) use the limit
//! `sin(2γt)/γ → 2t`, which at `k = 0` is the `-2t/|Λ|` term of the
//! massless flow.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::lattice::TorusLattice;
use crate::observables::WeylGenerator;

/// Largest imaginary residue tolerated in a kernel sum.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Roundoff allowance when comparing kernels to their decay bounds.
pub const DECAY_ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicParams {
    omega: f64,
    lambda: Vec<f64>,
}

impl HarmonicParams {
    pub fn new(omega: f64, lambda: Vec<f64>) -> Result<Self> {
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::invalid(format!(
                "omega must be finite and >= 0, got {omega}"
            )));
        }
        if lambda.is_empty() {
            return Err(Error::invalid("need one coupling per lattice axis"));
        }
        if let Some(bad) = lambda.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::invalid(format!(
                "couplings must be finite and >= 0, got {bad}"
            )));
        }
        let params = Self { omega, lambda };
        if params.coupling_constant() <= 0.0 {
            return Err(Error::invalid(
                "omega and all couplings are zero; the flow has no spectral gap scale",
            ));
        }
        Ok(params)
    }

    /// Same `λ` on every one of `nu` axes.
    pub fn isotropic(omega: f64, lambda: f64, nu: usize) -> Result<Self> {
        Self::new(omega, vec![lambda; nu])
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// `c_{ω,λ} = sqrt(ω² + 4 Σ_j λ_j)`.
    pub fn coupling_constant(&self) -> f64 {
        (self.omega * self.omega + 4.0 * self.lambda_sum()).sqrt()
    }

    pub(crate) fn check_lattice(&self, lat: &TorusLattice) -> Result<()> {
        if self.lambda.len() != lat.nu() {
            return Err(Error::invalid(format!(
                "{} couplings for a {}-dimensional lattice",
                self.lambda.len(),
                lat.nu()
            )));
        }
        Ok(())
    }
}

/// Positions and momenta, one entry per lattice site.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::invalid(format!(
                "{} positions but {} momenta",
                q.len(),
                p.len()
            )));
        }
        let point = Self { q, p };
        if !point.is_finite() {
            return Err(Error::domain("phase point has non-finite entries"));
        }
        Ok(point)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            q: vec![0.0; n],
            p: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|v| v.is_finite())
    }

    /// Largest componentwise difference.
    pub fn max_abs_diff(&self, other: &PhasePoint) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_len(&self, lat: &TorusLattice) -> Result<()> {
        if self.len() != lat.len() {
            return Err(Error::domain(format!(
                "phase point has {} sites, lattice has {}",
                self.len(),
                lat.len()
            )));
        }
        Ok(())
    }
}

/// `H_h` at a phase point.
pub fn harmonic_energy(lat: &TorusLattice, params: &HarmonicParams, x: &PhasePoint) -> f64 {
    let w2 = params.omega * params.omega;
    (0..lat.len())
        .map(|i| {
            let bonds: f64 = params
                .lambda
                .iter()
                .enumerate()
                .map(|(j, &l)| {
                    let d = x.q[i] - x.q[lat.shifted(i, j, 1)];
                    l * d * d
                })
                .sum();
            x.p[i] * x.p[i] + w2 * x.q[i] * x.q[i] + bonds
        })
        .sum()
}

/// `γ(k)` for a wave vector `k`.
pub fn dispersion(params: &HarmonicParams, k: &[f64]) -> f64 {
    let s: f64 = params
        .lambda
        .iter()
        .zip(k)
        .map(|(l, kj)| {
            let s = (kj / 2.0).sin();
            l * s * s
        })
        .sum();
    (params.omega * params.omega + 4.0 * s).sqrt()
}

/// Dual grid `{xπ/L : x ∈ Λ_L}` with `γ` at each point, indexed like the
/// lattice sites.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    nu: usize,
    half_side: i64,
    kgrid: Vec<f64>,
    gamma: Vec<f64>,
}

impl SpectralTable {
    pub fn new(lat: &TorusLattice, params: &HarmonicParams) -> Result<Self> {
        params.check_lattice(lat)?;
        let scale = PI / lat.half_side() as f64;
        let kgrid: Vec<f64> = lat.sites().flatten().map(|&c| c as f64 * scale).collect();
        let gamma = kgrid
            .chunks_exact(lat.nu())
            .map(|k| dispersion(params, k))
            .collect();
        Ok(Self {
            nu: lat.nu(),
            half_side: lat.half_side(),
            kgrid,
            gamma,
        })
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn k(&self, idx: usize) -> &[f64] {
        &self.kgrid[idx * self.nu..(idx + 1) * self.nu]
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    fn weights(&self, t: f64) -> [Vec<f64>; 3] {
        let n = self.len();
        let mut w_m = Vec::with_capacity(n);
        let mut w_0 = Vec::with_capacity(n);
        let mut w_p = Vec::with_capacity(n);
        for &g in &self.gamma {
            let (s, c) = (2.0 * g * t).sin_cos();
            w_0.push(c);
            w_p.push(-g * s);
            w_m.push(if g == 0.0 { -2.0 * t } else { -s / g });
        }
        [w_m, w_0, w_p]
    }

    fn check_lattice(&self, lat: &TorusLattice) -> Result<()> {
        if lat.nu() != self.nu || lat.half_side() != self.half_side {
            return Err(Error::invalid(
                "spectral table built for a different lattice",
            ));
        }
        Ok(())
    }

    /// Kernels by direct `O(|Λ|²)` summation.
    pub fn kernels(&self, lat: &TorusLattice, t: f64) -> Result<KernelSet> {
        self.check_lattice(lat)?;
        if t == 0.0 {
            return Ok(KernelSet::identity(lat));
        }
        let n = lat.len();
        let side = lat.side();
        // e^{i k·x} = e^{iπ s / L} with s = Σ_j m_j x_j mod 2L
        let phases: Vec<(f64, f64)> = (0..side)
            .map(|s| (PI * s as f64 / lat.half_side() as f64).sin_cos())
            .collect();
        let weights = self.weights(t);
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let norm = 1.0 / n as f64;
        for x in 0..n {
            let xs = lat.site(x);
            let mut re = [0.0; 3];
            let mut im = [0.0; 3];
            for k in 0..n {
                let s: i64 = lat.site(k).iter().zip(xs).map(|(a, b)| a * b).sum();
                let (sin, cos) = phases[s.rem_euclid(side) as usize];
                for m in 0..3 {
                    re[m] += cos * weights[m][k];
                    im[m] += sin * weights[m][k];
                }
            }
            for m in 0..3 {
                let scale = weights[m].iter().fold(1.0f64, |a, w| a.max(w.abs()));
                if (im[m] * norm).abs() > IMAG_RESIDUE_TOL * scale {
                    return Err(Error::Consistency(format!(
                        "kernel m={} at site {:?} has imaginary residue {:e}",
                        m as i32 - 1,
                        xs,
                        im[m] * norm
                    )));
                }
                out[m][x] = re[m] * norm;
            }
        }
        let [h_minus1, h_0, h_plus1] = out;
        Ok(KernelSet {
            t,
            h_minus1,
            h_0,
            h_plus1,
        })
    }

    /// Kernels by FFT; one-dimensional lattices only.
    pub fn kernels_fft(&self, lat: &TorusLattice, t: f64) -> Result<KernelSet> {
        self.check_lattice(lat)?;
        if lat.nu() != 1 {
            return Err(Error::invalid("FFT kernel path supports nu = 1 only"));
        }
        let n = lat.len();
        let side = lat.side();
        let weights = self.weights(t);
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for m in 0..3 {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for k in 0..n {
                let slot = lat.site(k)[0].rem_euclid(side) as usize;
                buf[slot] = Complex64::new(weights[m][k], 0.0);
            }
            fft.process(&mut buf);
            for x in 0..n {
                let slot = lat.site(x)[0].rem_euclid(side) as usize;
                let v = buf[slot] / n as f64;
                if v.im.abs() > IMAG_RESIDUE_TOL {
                    return Err(Error::Consistency(format!(
                        "FFT kernel m={} has imaginary residue {:e}",
                        m as i32 - 1,
                        v.im
                    )));
                }
                out[m][x] = v.re;
            }
        }
        let [h_minus1, h_0, h_plus1] = out;
        Ok(KernelSet {
            t,
            h_minus1,
            h_0,
            h_plus1,
        })
    }
}

/// `h_t^(-1)`, `h_t^(0)`, `h_t^(1)` on every site at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub t: f64,
    pub h_minus1: Vec<f64>,
    pub h_0: Vec<f64>,
    pub h_plus1: Vec<f64>,
}

impl KernelSet {
    fn identity(lat: &TorusLattice) -> Self {
        let n = lat.len();
        let mut h_0 = vec![0.0; n];
        h_0[lat.origin()] = 1.0;
        Self {
            t: 0.0,
            h_minus1: vec![0.0; n],
            h_0,
            h_plus1: vec![0.0; n],
        }
    }

    /// Kernel `m ∈ {-1, 0, 1}`.
    pub fn get(&self, m: i32) -> &[f64] {
        match m {
            -1 => &self.h_minus1,
            0 => &self.h_0,
            1 => &self.h_plus1,
            _ => panic!("kernel order must be -1, 0 or 1, got {m}"),
        }
    }

    /// The flow at time `t` applied to `x0`.
    pub fn apply(&self, lat: &TorusLattice, x0: &PhasePoint) -> PhasePoint {
        let n = lat.len();
        let mut q = vec![0.0; n];
        let mut p = vec![0.0; n];
        for x in 0..n {
            let (mut qx, mut px) = (0.0, 0.0);
            for y in 0..n {
                let d = lat.difference(x, y);
                qx += x0.q[y] * self.h_0[d] - x0.p[y] * self.h_minus1[d];
                px += x0.q[y] * self.h_plus1[d] + x0.p[y] * self.h_0[d];
            }
            q[x] = qx;
            p[x] = px;
        }
        PhasePoint { q, p }
    }
}

pub fn kernels(lat: &TorusLattice, params: &HarmonicParams, t: f64) -> Result<KernelSet> {
    SpectralTable::new(lat, params)?.kernels(lat, t)
}

/// Exact harmonic flow `Φ_t^h(x0)`.
pub fn harmonic_flow(
    lat: &TorusLattice,
    params: &HarmonicParams,
    x0: &PhasePoint,
    t: f64,
) -> Result<PhasePoint> {
    x0.check_len(lat)?;
    if !x0.is_finite() {
        return Err(Error::domain("initial phase point has non-finite entries"));
    }
    if !t.is_finite() {
        return Err(Error::domain(format!("time must be finite, got {t}")));
    }
    Ok(kernels(lat, params, t)?.apply(lat, x0))
}

/// `f_t` with `α_t^h(W(f)) = W(f_t)`, from precomputed kernels.
pub fn evolve_weyl_with(
    lat: &TorusLattice,
    ks: &KernelSet,
    f: &WeylGenerator,
) -> Result<WeylGenerator> {
    f.check_lattice(lat)?;
    let n = lat.len();
    let half_i = Complex64::new(0.0, 0.5);
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (x, out) in values.iter_mut().enumerate() {
        for (y, fy) in f.iter() {
            let d = lat.difference(x, y);
            let direct = Complex64::new(ks.h_0[d], 0.0) + half_i * (ks.h_minus1[d] + ks.h_plus1[d]);
            let conj_part = half_i * (ks.h_plus1[d] - ks.h_minus1[d]);
            *out += fy * direct.conj() + fy.conj() * conj_part;
        }
    }
    WeylGenerator::new(values.into_iter().enumerate())
}

/// `f_t = f * conj(h^(0) + i/2 (h^(-1) + h^(1))) + conj(f) * (i/2 (h^(1) - h^(-1)))`.
pub fn evolve_weyl(
    lat: &TorusLattice,
    params: &HarmonicParams,
    f: &WeylGenerator,
    t: f64,
) -> Result<WeylGenerator> {
    f.check_lattice(lat)?;
    evolve_weyl_with(lat, &kernels(lat, params, t)?, f)
}

/// `v_h(μ) = c max(2/μ, e^{μ/2 + 1})`, without parameter checks.
pub(crate) fn light_cone_velocity(c: f64, mu: f64) -> f64 {
    c * (2.0 / mu).max((mu / 2.0 + 1.0).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMargin {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl KernelMargin {
    pub fn margin(&self) -> f64 {
        self.bound - self.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteMargins {
    pub site: usize,
    pub distance: u64,
    /// Indexed by `m + 1`.
    pub kernels: [KernelMargin; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDecayReport {
    pub t: f64,
    pub mu: f64,
    pub sites: Vec<SiteMargins>,
}

impl KernelDecayReport {
    pub fn all_pass(&self) -> bool {
        self.sites.iter().all(|s| s.kernels.iter().all(|k| k.pass))
    }

    pub fn min_margin(&self) -> f64 {
        self.sites
            .iter()
            .flat_map(|s| s.kernels.iter().map(KernelMargin::margin))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Compares precomputed kernels with
/// `|h_t^(m)(x)| <= P_m e^{-μ(|x| - v_h(μ)|t|)}`, `P = (c^{-1}, 1, c e^{μ/2})`.
pub fn kernel_decay_report_with(
    lat: &TorusLattice,
    params: &HarmonicParams,
    ks: &KernelSet,
    mu: f64,
) -> Result<KernelDecayReport> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain(format!("decay rate must be > 0, got {mu}")));
    }
    let c = params.coupling_constant();
    let v = light_cone_velocity(c, mu);
    let prefactors = [1.0 / c, 1.0, c * (mu / 2.0).exp()];
    let sites = (0..lat.len())
        .map(|x| {
            let distance = lat.norm_idx(x);
            let decay = (-mu * (distance as f64 - v * ks.t.abs())).exp();
            let kernels = [-1, 0, 1].map(|m| {
                let value = ks.get(m)[x].abs();
                let bound = prefactors[(m + 1) as usize] * decay;
                KernelMargin {
                    value,
                    bound,
                    pass: value <= bound + DECAY_ROUNDOFF,
                }
            });
            SiteMargins {
                site: x,
                distance,
                kernels,
            }
        })
        .collect();
    Ok(KernelDecayReport { t: ks.t, mu, sites })
}

pub fn kernel_decay_report(
    lat: &TorusLattice,
    params: &HarmonicParams,
    t: f64,
    mu: f64,
) -> Result<KernelDecayReport> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain(format!("decay rate must be > 0, got {mu}")));
    }
    kernel_decay_report_with(lat, params, &kernels(lat, params, t)?, mu)
}
