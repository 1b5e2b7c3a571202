//! Weyl functions, Poisson brackets, and sampled sup norms.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harmonic::{self, HarmonicParams, PhasePoint};
use crate::lattice::TorusLattice;

/// Default finite-difference width for numeric brackets.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Generator `f` of the Weyl function
/// `W(f)(x) = exp(i Σ_x Re f(x) q_x + Im f(x) p_x)`.
///
/// Stored sparsely as `(site index, value)` pairs sorted by site.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylGenerator {
    entries: Vec<(usize, Complex64)>,
}

impl WeylGenerator {
    pub fn new(entries: impl IntoIterator<Item = (usize, Complex64)>) -> Result<Self> {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("Weyl generator lists a site twice"));
        }
        if entries
            .iter()
            .any(|(_, v)| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("Weyl generator has non-finite values"));
        }
        Ok(Self { entries })
    }

    pub fn zero() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// `value · δ_site`.
    pub fn delta(site: usize, value: Complex64) -> Self {
        Self {
            entries: vec![(site, value)],
        }
    }

    /// Builds a generator from lattice coordinates.
    pub fn from_sites(lat: &TorusLattice, values: &[(Vec<i64>, Complex64)]) -> Result<Self> {
        let entries = values
            .iter()
            .map(|(x, v)| Ok((lat.index_of(x)?, *v)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn value(&self, site: usize) -> Complex64 {
        match self.entries.binary_search_by_key(&site, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `‖f‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(s, v)| (s, v * a)).collect(),
        }
    }

    pub(crate) fn check_len(&self, n_sites: usize) -> Result<()> {
        match self.entries.last() {
            Some(&(s, _)) if s >= n_sites => Err(Error::domain(format!(
                "generator support reaches site {s}, only {n_sites} sites available"
            ))),
            _ => Ok(()),
        }
    }

    pub(crate) fn check_lattice(&self, lat: &TorusLattice) -> Result<()> {
        self.check_len(lat.len())
    }

    /// `Σ_x Re f(x) q_x + Im f(x) p_x`.
    pub(crate) fn phase(&self, x: &PhasePoint) -> f64 {
        self.entries
            .iter()
            .map(|&(s, v)| v.re * x.q[s] + v.im * x.p[s])
            .sum()
    }
}

/// `⟨f, g⟩ = Σ_x conj(f(x)) g(x)`.
pub fn inner(f: &WeylGenerator, g: &WeylGenerator) -> Complex64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = Complex64::new(0.0, 0.0);
    while i < f.entries.len() && j < g.entries.len() {
        let (a, b) = (f.entries[i], g.entries[j]);
        match a.0.cmp(&b.0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a.1.conj() * b.1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

pub fn weyl_eval(f: &WeylGenerator, x: &PhasePoint) -> Result<Complex64> {
    f.check_len(x.len())?;
    Ok(Complex64::from_polar(1.0, f.phase(x)))
}

/// `{W(f), W(g)} = coefficient · W(f) W(g)` with `coefficient = -Im⟨f, g⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylBracket {
    pub coefficient: f64,
    pub f: WeylGenerator,
    pub g: WeylGenerator,
}

impl WeylBracket {
    pub fn eval(&self, x: &PhasePoint) -> Result<Complex64> {
        Ok(self.coefficient * weyl_eval(&self.f, x)? * weyl_eval(&self.g, x)?)
    }

    /// Exact sup norm, `|Im⟨f, g⟩|`.
    pub fn sup_norm(&self) -> f64 {
        self.coefficient.abs()
    }
}

pub fn poisson_bracket_weyl(f: &WeylGenerator, g: &WeylGenerator) -> WeylBracket {
    WeylBracket {
        coefficient: -inner(f, g).im,
        f: f.clone(),
        g: g.clone(),
    }
}

type EvalFn = dyn Fn(&PhasePoint) -> Complex64 + Send + Sync;
type GradFn = dyn Fn(&PhasePoint, usize) -> (Complex64, Complex64) + Send + Sync;

/// A differentiable observable with known support.
///
/// The gradient callback, when given, returns `(∂A/∂q_x, ∂A/∂p_x)`.
#[derive(Clone)]
pub struct SmoothObservable {
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
    support: Vec<usize>,
    dnorm: Option<f64>,
}

impl std::fmt::Debug for SmoothObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothObservable")
            .field("support", &self.support)
            .field("analytic_gradient", &self.grad.is_some())
            .field("dnorm", &self.dnorm)
            .finish()
    }
}

impl SmoothObservable {
    pub fn new(
        support: Vec<usize>,
        eval: impl Fn(&PhasePoint) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        let mut support = support;
        support.sort_unstable();
        support.dedup();
        Self {
            eval: Arc::new(eval),
            grad: None,
            support,
            dnorm: None,
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&PhasePoint, usize) -> (Complex64, Complex64) + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_dnorm(mut self, dnorm: f64) -> Self {
        self.dnorm = Some(dnorm);
        self
    }

    /// `W(f)` with its analytic gradient; `‖∂W(f)‖_∞ = ‖f‖_∞`.
    pub fn weyl(f: WeylGenerator) -> Self {
        let support = f.support();
        let dnorm = f.sup_norm();
        let fe = f.clone();
        Self::new(support, move |x| Complex64::from_polar(1.0, fe.phase(x)))
            .with_gradient(move |x, site| {
                let w = Complex64::from_polar(1.0, f.phase(x));
                let v = f.value(site);
                let i = Complex64::i();
                (i * v.re * w, i * v.im * w)
            })
            .with_dnorm(dnorm)
    }

    pub fn eval(&self, x: &PhasePoint) -> Complex64 {
        (self.eval)(x)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dnorm(&self) -> Option<f64> {
        self.dnorm
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    fn gradient_at(&self, x: &PhasePoint, site: usize, step: f64) -> (Complex64, Complex64) {
        if let Some(g) = &self.grad {
            return g(x, site);
        }
        let mut y = x.clone();
        let central = |y: &mut PhasePoint, use_q: bool| {
            let slot = if use_q {
                &mut y.q[site]
            } else {
                &mut y.p[site]
            };
            let orig = *slot;
            *slot = orig + step;
            let plus = (self.eval)(y);
            let slot = if use_q {
                &mut y.q[site]
            } else {
                &mut y.p[site]
            };
            *slot = orig - step;
            let minus = (self.eval)(y);
            let slot = if use_q {
                &mut y.q[site]
            } else {
                &mut y.p[site]
            };
            *slot = orig;
            (plus - minus) / (2.0 * step)
        };
        let dq = central(&mut y, true);
        let dp = central(&mut y, false);
        (dq, dp)
    }
}

/// `{A, B}(x) = Σ_x ∂_q A ∂_p B - ∂_p A ∂_q B` over the common support.
///
/// Analytic gradients are used when supplied, central differences of width
/// `step` otherwise.
pub fn poisson_bracket_numeric(
    a: &SmoothObservable,
    b: &SmoothObservable,
    x: &PhasePoint,
    step: f64,
) -> Result<Complex64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!("step must be > 0, got {step}")));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for &site in a
        .support
        .iter()
        .filter(|s| b.support.binary_search(s).is_ok())
    {
        if site >= x.len() {
            return Err(Error::domain(format!(
                "observable support site {site} outside phase point"
            )));
        }
        let (aq, ap) = a.gradient_at(x, site, step);
        let (bq, bp) = b.gradient_at(x, site, step);
        acc += aq * bp - ap * bq;
    }
    if !acc.re.is_finite() || !acc.im.is_finite() {
        return Err(Error::Numerical("Poisson bracket is not finite".into()));
    }
    Ok(acc)
}

/// Deterministic phase-point sampler with coordinates uniform in
/// `[-amplitude, amplitude]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampler {
    pub count: usize,
    pub seed: u64,
    pub amplitude: f64,
}

impl Sampler {
    pub fn new(count: usize, seed: u64, amplitude: f64) -> Result<Self> {
        if count < 1 {
            return Err(Error::invalid("sampler count must be >= 1"));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::invalid(format!(
                "sampler amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        Ok(Self {
            count,
            seed,
            amplitude,
        })
    }

    pub fn points(&self, n_sites: usize) -> Vec<PhasePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let a = self.amplitude;
        let draw = |rng: &mut ChaCha8Rng| {
            if a == 0.0 {
                0.0
            } else {
                rng.gen_range(-a..=a)
            }
        };
        (0..self.count)
            .map(|_| {
                let q = (0..n_sites).map(|_| draw(&mut rng)).collect();
                let p = (0..n_sites).map(|_| draw(&mut rng)).collect();
                PhasePoint { q, p }
            })
            .collect()
    }
}

/// Largest `|obs(x)|` over the sampler's points: a lower bound on `‖obs‖_∞`.
pub fn sup_norm_estimate(
    n_sites: usize,
    obs: impl Fn(&PhasePoint) -> Complex64,
    sampler: &Sampler,
) -> f64 {
    sampler
        .points(n_sites)
        .iter()
        .map(|x| obs(x).norm())
        .fold(0.0, f64::max)
}

/// `|Im⟨f_t, g⟩|`, the exact sup norm of `{α_t^h(W(f)), W(g)}`.
pub fn harmonic_bracket_norm(
    lat: &TorusLattice,
    params: &HarmonicParams,
    f: &WeylGenerator,
    g: &WeylGenerator,
    t: f64,
) -> Result<f64> {
    g.check_lattice(lat)?;
    let ft = harmonic::evolve_weyl(lat, params, f, t)?;
    Ok(inner(&ft, g).im.abs())
}
