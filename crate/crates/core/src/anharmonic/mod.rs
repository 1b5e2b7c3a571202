//! Anharmonic perturbations of the harmonic lattice.
//!
//! The Hamiltonian is `H = H_h + Σ_z V(q_z) + Σ_{z₁<z₂} F_μ(d(z₁,z₂)) V(q_{z₁}, q_{z₂})`
//! with either potential optional. It is separable, `H = Σ p² + U(q)`, so
//! Hamilton's equations read `q̇ = 2p`, `ṗ = -∇U(q)`.

mod apriori;
mod constants;
mod flow;
mod potential;

use std::sync::Arc;

pub use apriori::{
    apriori_solution_bound, bracket_apriori_bound, jacobian_bound, JacobianBound, SolutionBound,
};
pub use constants::{
    assumption_constants, AssumptionConstants, CERT_GRID_STEP, CERT_RANDOM_POINTS,
};
pub use flow::{
    bracket_pointwise, bracket_pointwise_schedule, integrate_flow, integrate_flow_schedule,
    integrate_tangent, integrate_tangent_schedule, Scheme, TangentFlow, MAX_STEPS,
};
pub use potential::{
    fourier_d1_abs, kappa_quadrature, GaussianSite, PairPotential, SitePotential, Q_RANGE,
};

use crate::error::{Error, Result};
use crate::harmonic::{harmonic_energy, HarmonicParams, PhasePoint};
use crate::lattice::{DecayProfile, TorusLattice};

/// A weighted pair `(z₁, z₂, F_μ(d(z₁, z₂)))` with `z₁ < z₂`.
type WeightedPair = (usize, usize, f64);

#[derive(Debug, Clone)]
pub struct AnharmonicSystem {
    lattice: TorusLattice,
    params: HarmonicParams,
    site: Option<Arc<dyn SitePotential>>,
    pair: Option<PairPotential>,
    pairs: Vec<WeightedPair>,
    /// `neighbors[x][j] = (x + e_j, x - e_j)`.
    neighbors: Vec<Vec<(usize, usize)>>,
}

impl AnharmonicSystem {
    pub fn new(lattice: TorusLattice, params: HarmonicParams) -> Result<Self> {
        params.check_lattice(&lattice)?;
        let neighbors = (0..lattice.len())
            .map(|x| {
                (0..lattice.nu())
                    .map(|j| (lattice.shifted(x, j, 1), lattice.shifted(x, j, -1)))
                    .collect()
            })
            .collect();
        Ok(Self {
            lattice,
            params,
            site: None,
            pair: None,
            pairs: Vec::new(),
            neighbors,
        })
    }

    pub fn with_site(mut self, pot: impl SitePotential + 'static) -> Self {
        self.site = Some(Arc::new(pot));
        self
    }

    pub fn with_site_arc(mut self, pot: Arc<dyn SitePotential>) -> Self {
        self.site = Some(pot);
        self
    }

    pub fn with_pair(mut self, pair: PairPotential) -> Self {
        let profile = DecayProfile::new(pair.weight_mu(), self.lattice.nu())
            .expect("pair weight rate validated on construction");
        let n = self.lattice.len();
        self.pairs = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .map(|(a, b)| (a, b, profile.eval(self.lattice.distance_idx(a, b) as f64)))
            .collect();
        self.pair = Some(pair);
        self
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn params(&self) -> &HarmonicParams {
        &self.params
    }

    pub fn site_potential(&self) -> Option<&dyn SitePotential> {
        self.site.as_deref()
    }

    pub fn pair_potential(&self) -> Option<&PairPotential> {
        self.pair.as_ref()
    }

    pub fn is_harmonic(&self) -> bool {
        self.site.is_none() && self.pair.is_none()
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// `∇U(q)`.
    pub(crate) fn force_gradient(&self, q: &[f64], out: &mut [f64]) {
        let w2 = self.params.omega() * self.params.omega();
        let lambda = self.params.lambda();
        for x in 0..q.len() {
            let mut g = 2.0 * w2 * q[x];
            for (j, &(up, down)) in self.neighbors[x].iter().enumerate() {
                g += 2.0 * lambda[j] * (2.0 * q[x] - q[up] - q[down]);
            }
            if let Some(v) = &self.site {
                g += v.d1(q[x]);
            }
            out[x] = g;
        }
        if let Some(v) = &self.pair {
            for &(a, b, w) in &self.pairs {
                let [ga, gb] = v.gradient(q[a], q[b]);
                out[a] += w * ga;
                out[b] += w * gb;
            }
        }
    }

    /// Hessian of `U` at `q`, ready to be applied to tangent vectors.
    pub(crate) fn hessian_at(&self, q: &[f64]) -> Hessian<'_> {
        let w2 = self.params.omega() * self.params.omega();
        let lsum = self.params.lambda_sum();
        let mut diag = vec![2.0 * w2 + 4.0 * lsum; q.len()];
        if let Some(v) = &self.site {
            for (d, &qx) in diag.iter_mut().zip(q) {
                *d += v.d2(qx);
            }
        }
        let mut mixed = Vec::new();
        if let Some(v) = &self.pair {
            mixed.reserve(self.pairs.len());
            for &(a, b, w) in &self.pairs {
                let h = v.hessian(q[a], q[b]);
                diag[a] += w * h[0][0];
                diag[b] += w * h[1][1];
                mixed.push((a, b, w * h[0][1]));
            }
        }
        Hessian {
            sys: self,
            diag,
            mixed,
        }
    }

    pub(crate) fn check_point(&self, x: &PhasePoint) -> Result<()> {
        x.check_len(&self.lattice)?;
        if !x.is_finite() {
            return Err(Error::domain("phase point has non-finite entries"));
        }
        Ok(())
    }
}

/// Dense-diagonal plus sparse coupling form of `∇²U(q)`.
pub(crate) struct Hessian<'a> {
    sys: &'a AnharmonicSystem,
    diag: Vec<f64>,
    mixed: Vec<WeightedPair>,
}

impl Hessian<'_> {
    /// `out = ∇²U v`.
    pub(crate) fn apply(&self, v: &[f64], out: &mut [f64]) {
        let lambda = self.sys.params.lambda();
        for x in 0..v.len() {
            let mut acc = self.diag[x] * v[x];
            for (j, &(up, down)) in self.sys.neighbors[x].iter().enumerate() {
                acc -= 2.0 * lambda[j] * (v[up] + v[down]);
            }
            out[x] = acc;
        }
        for &(a, b, h) in &self.mixed {
            out[a] += h * v[b];
            out[b] += h * v[a];
        }
    }
}

/// `H(x)` with every configured term.
pub fn hamiltonian_eval(sys: &AnharmonicSystem, x: &PhasePoint) -> Result<f64> {
    x.check_len(&sys.lattice)?;
    let mut h = harmonic_energy(&sys.lattice, &sys.params, x);
    if let Some(v) = &sys.site {
        h += x.q.iter().map(|&q| v.value(q)).sum::<f64>();
    }
    if let Some(v) = &sys.pair {
        h += sys
            .pairs
            .iter()
            .map(|&(a, b, w)| w * v.value(x.q[a], x.q[b]))
            .sum::<f64>();
    }
    if !h.is_finite() {
        return Err(Error::Numerical("Hamiltonian is not finite".into()));
    }
    Ok(h)
}

/// Right-hand side of Hamilton's equations, `(q̇, ṗ) = (2p, -∇U(q))`.
pub fn vector_field(sys: &AnharmonicSystem, x: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
    sys.check_point(x)?;
    let dq = x.p.iter().map(|p| 2.0 * p).collect();
    let mut dp = vec![0.0; x.len()];
    sys.force_gradient(&x.q, &mut dp);
    dp.iter_mut().for_each(|g| *g = -*g);
    Ok((dq, dp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(l: i64) -> AnharmonicSystem {
        AnharmonicSystem::new(
            TorusLattice::new(1, l).unwrap(),
            HarmonicParams::new(1.0, vec![1.0]).unwrap(),
        )
        .unwrap()
    }

    fn point(n: usize, seed: f64) -> PhasePoint {
        let q = (0..n).map(|i| (seed * (i as f64 + 1.0)).sin()).collect();
        let p = (0..n).map(|i| (seed * (i as f64 + 2.0)).cos()).collect();
        PhasePoint::new(q, p).unwrap()
    }

    #[test]
    fn gaussian_energy_at_origin_counts_sites() {
        let sys = system(2).with_site(GaussianSite::new(1.0, 1.0).unwrap());
        assert_eq!(hamiltonian_eval(&sys, &PhasePoint::zeros(4)).unwrap(), 4.0);
    }

    #[test]
    fn zero_point_is_fixed() {
        let sys = system(3)
            .with_site(GaussianSite::new(1.0, 1.0).unwrap())
            .with_pair(PairPotential::new(0.5, 1.0, 1.0).unwrap());
        let (dq, dp) = vector_field(&sys, &PhasePoint::zeros(6)).unwrap();
        assert!(dq.iter().chain(&dp).all(|&v| v == 0.0));
    }

    #[test]
    fn field_is_gradient_of_hamiltonian() {
        let sys = system(3)
            .with_site(GaussianSite::new(1.2, 0.9).unwrap())
            .with_pair(PairPotential::new(0.5, 1.1, 0.7).unwrap());
        let x = point(6, 0.37);
        let (dq, dp) = vector_field(&sys, &x).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let mut a = x.clone();
            let mut b = x.clone();
            a.q[i] += h;
            b.q[i] -= h;
            let dhdq = (hamiltonian_eval(&sys, &a).unwrap() - hamiltonian_eval(&sys, &b).unwrap())
                / (2.0 * h);
            let mut a = x.clone();
            let mut b = x.clone();
            a.p[i] += h;
            b.p[i] -= h;
            let dhdp = (hamiltonian_eval(&sys, &a).unwrap() - hamiltonian_eval(&sys, &b).unwrap())
                / (2.0 * h);
            assert!((dp[i] + dhdq).abs() < 1e-6);
            assert!((dq[i] - dhdp).abs() < 1e-6);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let sys = system(2)
            .with_site(GaussianSite::new(0.8, 1.3).unwrap())
            .with_pair(PairPotential::new(0.6, 0.9, 0.5).unwrap());
        let x = point(4, 0.81);
        let hess = sys.hessian_at(&x.q);
        let h = 1e-6;
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            let mut col = vec![0.0; 4];
            hess.apply(&e, &mut col);
            let (mut gp, mut gm) = (vec![0.0; 4], vec![0.0; 4]);
            let mut qp = x.q.clone();
            let mut qm = x.q.clone();
            qp[j] += h;
            qm[j] -= h;
            sys.force_gradient(&qp, &mut gp);
            sys.force_gradient(&qm, &mut gm);
            for i in 0..4 {
                assert!(((gp[i] - gm[i]) / (2.0 * h) - col[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn harmonic_reduction() {
        let sys = system(3);
        let lat = TorusLattice::new(1, 3).unwrap();
        let x = point(6, 1.1);
        let h = harmonic_energy(&lat, sys.params(), &x);
        assert_eq!(hamiltonian_eval(&sys, &x).unwrap(), h);
    }
}
