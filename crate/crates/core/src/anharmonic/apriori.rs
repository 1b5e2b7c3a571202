//! A priori bounds on trajectories, Jacobians and brackets.
//!
//! All bounds are stated for `t >= 0` and are applied to `|t|`; the flow
//! reversed in time is the flow of the same Hamiltonian with `p ↦ -p`.

use super::{AnharmonicSystem, AssumptionConstants};
use crate::error::Result;
use crate::harmonic::PhasePoint;
use crate::lattice::decay_sum;
use crate::observables::WeylGenerator;

/// `max_x max(|q_x(t)|, |p_x(t)|) <= K1 e^{K2 t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionBound {
    pub k1: f64,
    pub k2: f64,
}

impl SolutionBound {
    pub fn at(&self, t: f64) -> f64 {
        self.k1 * (self.k2 * t.abs()).exp()
    }
}

/// Bounds on the Jacobian blocks at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianBound {
    pub t: f64,
    /// Bound on `|∂q_x(t)/∂q_y|` and `|∂q_x(t)/∂p_y|`.
    pub q_rows: f64,
    /// Bound on `|∂p_x(t)/∂q_y|` and `|∂p_x(t)/∂p_y|`.
    pub p_rows: f64,
    pub k: f64,
}

pub fn apriori_solution_bound(
    sys: &AnharmonicSystem,
    constants: &AssumptionConstants,
    x0: &PhasePoint,
) -> Result<SolutionBound> {
    sys.check_point(x0)?;
    let params = sys.params();
    let lsum = params.lambda_sum();
    let w2 = params.omega() * params.omega();
    let k1 =
        x0.q.iter()
            .zip(&x0.p)
            .map(|(q, p)| p * p + q * q + constants.c1_tilde)
            .fold(0.0, f64::max)
            .sqrt();
    let k2 = (w2 + 2.0 * lsum - 1.0).abs()
        + 4.0 * lsum
        + 0.5
        + 0.5 * constants.c1 * decay_sum(sys.lattice(), constants.mu1);
    Ok(SolutionBound { k1, k2 })
}

pub fn jacobian_bound(
    sys: &AnharmonicSystem,
    constants: &AssumptionConstants,
    t: f64,
) -> JacobianBound {
    let params = sys.params();
    let lsum = params.lambda_sum();
    let w2 = params.omega() * params.omega();
    let k = 2.0 * w2 + 8.0 * lsum + constants.c2 * decay_sum(sys.lattice(), constants.mu2);
    let s = t.abs();
    let q_rows = (2.0 * s).max(1.0) * (k * s * s).exp();
    let p_rows = 1.0 + s * (k + 2.0 * lsum) * q_rows;
    JacobianBound {
        t,
        q_rows,
        p_rows,
        k,
    }
}

/// `4 |X| |Y| ‖f‖_∞ ‖g‖_∞ max(q_rows, p_rows)`.
pub fn bracket_apriori_bound(
    sys: &AnharmonicSystem,
    constants: &AssumptionConstants,
    f: &WeylGenerator,
    g: &WeylGenerator,
    t: f64,
) -> Result<f64> {
    f.check_lattice(sys.lattice())?;
    g.check_lattice(sys.lattice())?;
    let jb = jacobian_bound(sys, constants, t);
    let cards = (f.support().len() * g.support().len()) as f64;
    Ok(4.0 * cards * f.sup_norm() * g.sup_norm() * jb.q_rows.max(jb.p_rows))
}
