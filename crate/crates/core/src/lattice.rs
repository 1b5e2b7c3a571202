//! Periodic cubic lattice `(-L, L]^ν`, its torus metric, and the decay
//! functions `F_μ(r) = e^{-μr} / (1 + r)^{ν+1}` used by every envelope.
//!
//! Sites are enumerated row-major over coordinates in `(-L, L]` (the first
//! coordinate varies slowest), so a site index is stable across runs.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Relative tolerance used when a convolution constant is needed implicitly.
pub const DEFAULT_CNU_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusLattice {
    nu: usize,
    half_side: i64,
    coords: Vec<i64>,
}

impl TorusLattice {
    pub fn new(nu: usize, half_side: i64) -> Result<Self> {
        if nu < 1 {
            return Err(Error::invalid(format!("dimension must be >= 1, got {nu}")));
        }
        if half_side < 1 {
            return Err(Error::invalid(format!(
                "half side length must be >= 1, got {half_side}"
            )));
        }
        let side = 2 * half_side;
        let n = (side as usize)
            .checked_pow(nu as u32)
            .ok_or_else(|| Error::invalid("lattice too large"))?;
        let mut coords = Vec::with_capacity(n * nu);
        for idx in 0..n {
            let mut rem = idx;
            let start = coords.len();
            coords.resize(start + nu, 0);
            for j in (0..nu).rev() {
                coords[start + j] = (rem % side as usize) as i64 - half_side + 1;
                rem /= side as usize;
            }
        }
        Ok(Self {
            nu,
            half_side,
            coords,
        })
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    /// `L` in `(-L, L]^ν`.
    pub fn half_side(&self) -> i64 {
        self.half_side
    }

    /// Period `2L` along each axis.
    pub fn side(&self) -> i64 {
        2 * self.half_side
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.nu
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn site(&self, idx: usize) -> &[i64] {
        &self.coords[idx * self.nu..(idx + 1) * self.nu]
    }

    pub fn sites(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.coords.chunks_exact(self.nu)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.nu
            && x.iter()
                .all(|&c| c > -self.half_side && c <= self.half_side)
    }

    pub fn index_of(&self, x: &[i64]) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::domain(format!(
                "site {x:?} is not in (-{L}, {L}]^{nu}",
                L = self.half_side,
                nu = self.nu
            )));
        }
        Ok(self.index_unchecked(x.iter().copied()))
    }

    fn index_unchecked(&self, x: impl Iterator<Item = i64>) -> usize {
        let side = self.side();
        x.fold(0usize, |acc, c| {
            acc * side as usize + (c + self.half_side - 1).rem_euclid(side) as usize
        })
    }

    /// Index of the origin.
    pub fn origin(&self) -> usize {
        self.index_unchecked(std::iter::repeat_n(0, self.nu))
    }

    /// Index of `x_i - x_j`, wrapped back into the lattice.
    pub fn difference(&self, i: usize, j: usize) -> usize {
        let (a, b) = (self.site(i), self.site(j));
        self.index_unchecked(a.iter().zip(b).map(|(x, y)| x - y))
    }

    /// Index of `x_i + step * e_axis`, wrapped.
    pub fn shifted(&self, i: usize, axis: usize, step: i64) -> usize {
        let x = self.site(i);
        self.index_unchecked(
            x.iter()
                .enumerate()
                .map(|(j, &c)| if j == axis { c + step } else { c }),
        )
    }

    /// Index of `-x_i`, wrapped.
    pub fn reflected(&self, i: usize) -> usize {
        self.index_unchecked(self.site(i).iter().map(|c| -c))
    }

    fn axis_distance(&self, a: i64, b: i64) -> u64 {
        let side = self.side();
        let r = (a - b).rem_euclid(side);
        r.min(side - r) as u64
    }

    /// Torus distance between two site indices.
    pub fn distance_idx(&self, i: usize, j: usize) -> u64 {
        self.site(i)
            .iter()
            .zip(self.site(j))
            .map(|(&a, &b)| self.axis_distance(a, b))
            .sum()
    }

    /// Torus distance of a site index to the origin.
    pub fn norm_idx(&self, i: usize) -> u64 {
        self.site(i).iter().map(|&a| self.axis_distance(a, 0)).sum()
    }

    /// Minimum torus distance between two index sets.
    pub fn set_distance(&self, xs: &[usize], ys: &[usize]) -> Option<u64> {
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
            .map(|(x, y)| self.distance_idx(x, y))
            .min()
    }
}

/// `d(x, y) = Σ_j min_η |x_j - y_j + 2Lη|`.
pub fn torus_distance(lat: &TorusLattice, x: &[i64], y: &[i64]) -> Result<u64> {
    let i = lat.index_of(x)?;
    let j = lat.index_of(y)?;
    Ok(lat.distance_idx(i, j))
}

/// The decay function `F_μ` in dimension `ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProfile {
    mu: f64,
    nu: usize,
}

impl DecayProfile {
    pub fn new(mu: f64, nu: usize) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::invalid(format!(
                "decay rate must be finite and >= 0, got {mu}"
            )));
        }
        if nu < 1 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        Ok(Self { mu, nu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    /// `F_μ(r)`; `r` must be nonnegative.
    pub fn eval(&self, r: f64) -> f64 {
        (-self.mu * r).exp() / (1.0 + r).powi(self.nu as i32 + 1)
    }
}

pub fn f_mu(profile: &DecayProfile, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("F_mu needs r >= 0, got {r}")));
    }
    Ok(profile.eval(r))
}

/// `Σ_x F_μ(d(0, x))` over the lattice.
///
/// An infinite rate stands for purely on-site terms: only `x = 0`
/// contributes and the sum is 1.
pub fn decay_sum(lat: &TorusLattice, mu: f64) -> f64 {
    if mu.is_infinite() {
        return 1.0;
    }
    let profile = DecayProfile { mu, nu: lat.nu() };
    (0..lat.len())
        .map(|i| profile.eval(lat.norm_idx(i) as f64))
        .sum()
}

/// Number of points of `ℤ^ν` with `|z|_1 = n`.
fn shell_count(nu: usize, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    // Σ_k 2^k C(ν,k) C(n-1,k-1)
    let mut total = 0.0;
    let mut c_nu_k = 1.0; // C(ν, k)
    let mut c_n_k = 1.0; // C(n-1, k-1)
    for k in 1..=nu.min(n as usize) {
        c_nu_k = c_nu_k * (nu - k + 1) as f64 / k as f64;
        if k > 1 {
            c_n_k = c_n_k * (n as f64 - (k - 1) as f64) / (k - 1) as f64;
        }
        total += 2f64.powi(k as i32) * c_nu_k * c_n_k;
    }
    total
}

/// Upper bound on `Σ_{n > R} N_ν(n) / (1 + n)^{ν+1}`.
///
/// Uses `N_ν(n) <= 2^ν (n+ν-1)^{ν-1} / (ν-1)!` and
/// `Σ_{m >= R+2} m^{-2} <= 1 / (R+1)`.
fn shell_tail_bound(nu: usize, r: u64) -> f64 {
    let rho = ((r + nu as u64) as f64 / (r + 2) as f64).max(1.0);
    let fact: f64 = (1..nu).map(|k| k as f64).product();
    2f64.powi(nu as i32) * rho.powi(nu as i32 - 1) / fact / (r + 1) as f64
}

/// `C_ν = 2^{ν+1} Σ_{z ∈ ℤ^ν} (1 + |z|)^{-(ν+1)}`.
///
/// Summed shell by shell up to a radius at which the analytic tail bound is
/// below `rel_tol` times the partial sum. The returned value includes the
/// tail bound, so it is an upper bound on `C_ν` within `rel_tol`.
pub fn convolution_constant(nu: usize, rel_tol: f64) -> Result<f64> {
    if nu < 1 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::invalid(format!(
            "rel_tol must be > 0, got {rel_tol}"
        )));
    }
    let exponent = nu as i32 + 1;
    let mut partial = 0.0;
    let mut next = 0u64;
    let mut radius = 1024u64;
    loop {
        while next <= radius {
            partial += shell_count(nu, next) / (1.0 + next as f64).powi(exponent);
            next += 1;
        }
        let tail = shell_tail_bound(nu, radius);
        if tail <= rel_tol * partial {
            return Ok(2f64.powi(exponent) * (partial + tail));
        }
        // tail ~ a / R, so jump straight to the radius that should suffice
        let needed = (tail * radius as f64 / (rel_tol * partial)).ceil() as u64;
        radius = needed.max(radius * 2);
    }
}

/// `C_ν` at [`DEFAULT_CNU_REL_TOL`], computed once per dimension.
pub fn default_convolution_constant(nu: usize) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().unwrap().get(&nu) {
        return Ok(c);
    }
    let c = convolution_constant(nu, DEFAULT_CNU_REL_TOL)?;
    cache.lock().unwrap().insert(nu, c);
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `Σ_z F_μ(d(x,z)) F_μ(d(z,y)) <= C_ν F_μ(d(x,y))` on the torus.
pub fn verify_f_convolution(
    lat: &TorusLattice,
    profile: &DecayProfile,
    x: &[i64],
    y: &[i64],
) -> Result<ConvolutionReport> {
    let cnu = default_convolution_constant(lat.nu())?;
    verify_f_convolution_with(lat, profile, cnu, x, y)
}

/// As [`verify_f_convolution`] with a caller-supplied `C_ν`.
pub fn verify_f_convolution_with(
    lat: &TorusLattice,
    profile: &DecayProfile,
    cnu: f64,
    x: &[i64],
    y: &[i64],
) -> Result<ConvolutionReport> {
    let i = lat.index_of(x)?;
    let j = lat.index_of(y)?;
    Ok(convolution_report_idx(lat, profile, cnu, i, j))
}

pub(crate) fn convolution_report_idx(
    lat: &TorusLattice,
    profile: &DecayProfile,
    cnu: f64,
    i: usize,
    j: usize,
) -> ConvolutionReport {
    let lhs: f64 = (0..lat.len())
        .map(|z| {
            profile.eval(lat.distance_idx(i, z) as f64)
                * profile.eval(lat.distance_idx(z, j) as f64)
        })
        .sum();
    let rhs = cnu * profile.eval(lat.distance_idx(i, j) as f64);
    ConvolutionReport {
        lhs,
        rhs,
        pass: lhs <= rhs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lattices_enumerate_expected_sites() {
        let lat = TorusLattice::new(1, 2).unwrap();
        let sites: Vec<i64> = lat.sites().map(|s| s[0]).collect();
        assert_eq!(sites, vec![-1, 0, 1, 2]);

        let lat = TorusLattice::new(2, 1).unwrap();
        let sites: Vec<Vec<i64>> = lat.sites().map(|s| s.to_vec()).collect();
        assert_eq!(sites, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);

        assert_eq!(TorusLattice::new(3, 4).unwrap().len(), 512);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            TorusLattice::new(0, 2),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            TorusLattice::new(1, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn index_round_trips() {
        let lat = TorusLattice::new(2, 3).unwrap();
        for i in 0..lat.len() {
            assert_eq!(lat.index_of(lat.site(i)).unwrap(), i);
        }
        assert!(lat.index_of(&[-3, 0]).is_err());
        assert!(lat.index_of(&[0]).is_err());
    }

    #[test]
    fn distance_examples() {
        let lat = TorusLattice::new(1, 2).unwrap();
        assert_eq!(torus_distance(&lat, &[2], &[-1]).unwrap(), 1);
        assert_eq!(torus_distance(&lat, &[1], &[1]).unwrap(), 0);
        assert!(matches!(
            torus_distance(&lat, &[3], &[0]),
            Err(Error::Domain(_))
        ));

        let lat = TorusLattice::new(2, 4).unwrap();
        assert_eq!(torus_distance(&lat, &[3, -2], &[-1, 1]).unwrap(), 7);
    }

    #[test]
    fn shifts_and_differences_wrap() {
        let lat = TorusLattice::new(1, 2).unwrap();
        let two = lat.index_of(&[2]).unwrap();
        assert_eq!(lat.site(lat.shifted(two, 0, 1)), &[-1]);
        let m1 = lat.index_of(&[-1]).unwrap();
        assert_eq!(lat.site(lat.difference(m1, two)), &[1]);
        assert_eq!(lat.site(lat.reflected(two)), &[2]);
    }

    #[test]
    fn f_mu_examples() {
        let p = DecayProfile::new(3.7, 2).unwrap();
        assert_eq!(f_mu(&p, 0.0).unwrap(), 1.0);
        let p = DecayProfile::new(0.0, 1).unwrap();
        assert_eq!(f_mu(&p, 1.0).unwrap(), 0.25);
        let p = DecayProfile::new(1.0, 1).unwrap();
        assert!((f_mu(&p, 1.0).unwrap() - (-1f64).exp() / 4.0).abs() < 1e-16);
        assert!(matches!(f_mu(&p, -0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn shell_counts_match_enumeration() {
        for nu in 1..=3usize {
            let m = 6i64;
            let mut counts = vec![0u64; (m as usize) + 1];
            let side = 2 * m + 1;
            for idx in 0..(side as usize).pow(nu as u32) {
                let mut rem = idx;
                let mut norm = 0i64;
                for _ in 0..nu {
                    norm += ((rem % side as usize) as i64 - m).abs();
                    rem /= side as usize;
                }
                if norm <= m {
                    counts[norm as usize] += 1;
                }
            }
            for (n, &c) in counts.iter().enumerate() {
                assert_eq!(shell_count(nu, n as u64), c as f64, "nu={nu} n={n}");
            }
        }
    }

    #[test]
    fn convolution_constant_lower_bound() {
        for nu in 1..=3 {
            let c = convolution_constant(nu, 1e-4).unwrap();
            assert!(c >= 2f64.powi(nu as i32 + 1));
        }
        assert!(convolution_constant(1, 0.0).is_err());
    }

    #[test]
    fn decay_sum_infinite_rate_is_on_site() {
        let lat = TorusLattice::new(1, 4).unwrap();
        assert_eq!(decay_sum(&lat, f64::INFINITY), 1.0);
        assert!(decay_sum(&lat, 0.5) > 1.0);
    }
}
