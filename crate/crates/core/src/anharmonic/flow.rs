//! Numerical flow and tangent flow.
//!
//! A run to time `t` takes `n = ceil(|t| / dt)` steps of signed size `t / n`.
//! The tangent flow is propagated by the derivative of the same one-step
//! map, so with leapfrog the computed Jacobian is exactly symplectic up to
//! roundoff.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::AnharmonicSystem;
use crate::error::{Error, Result};
use crate::harmonic::PhasePoint;
use crate::observables::{weyl_eval, WeylGenerator};

/// Largest number of steps a single run may take.
pub const MAX_STEPS: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Kick-drift-kick Störmer-Verlet.
    #[default]
    Leapfrog,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leapfrog" => Ok(Scheme::Leapfrog),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(Error::invalid(format!(
                "unknown scheme `{other}` (expected leapfrog or rk4)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Leapfrog => "leapfrog",
            Scheme::Rk4 => "rk4",
        })
    }
}

/// Jacobian of the flow with respect to the initial point, `∂(q(t), p(t)) / ∂(q(0), p(0))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFlow {
    pub t: f64,
    /// The base point `Φ_t(x0)`.
    pub state: PhasePoint,
    pub dq_dq0: DMatrix<f64>,
    pub dq_dp0: DMatrix<f64>,
    pub dp_dq0: DMatrix<f64>,
    pub dp_dp0: DMatrix<f64>,
}

impl TangentFlow {
    /// Full `2N × 2N` Jacobian in `(q, p)` block layout.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let n = self.dq_dq0.nrows();
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        j.view_mut((0, 0), (n, n)).copy_from(&self.dq_dq0);
        j.view_mut((0, n), (n, n)).copy_from(&self.dq_dp0);
        j.view_mut((n, 0), (n, n)).copy_from(&self.dp_dq0);
        j.view_mut((n, n), (n, n)).copy_from(&self.dp_dp0);
        j
    }

    /// `max |JᵀΩJ - Ω|` with `Ω = [[0, I], [-I, 0]]`.
    pub fn symplectic_defect(&self) -> f64 {
        let n = self.dq_dq0.nrows();
        let j = self.jacobian();
        let mut omega = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            omega[(i, n + i)] = 1.0;
            omega[(n + i, i)] = -1.0;
        }
        (j.transpose() * &omega * &j - omega).amax()
    }

    /// Largest entry of the `q` rows, `max |∂q_x(t)/∂(q_y, p_y)|`.
    pub fn max_abs_q_rows(&self) -> f64 {
        self.dq_dq0.amax().max(self.dq_dp0.amax())
    }

    /// Largest entry of the `p` rows.
    pub fn max_abs_p_rows(&self) -> f64 {
        self.dp_dq0.amax().max(self.dp_dp0.amax())
    }
}

/// Tangent vectors stored column-major, `n` rows by `cols` columns.
struct Tangent {
    cols: usize,
    dq: Vec<f64>,
    dp: Vec<f64>,
}

impl Tangent {
    /// Columns `∂/∂q_y` for each `y` in `sites`, then `∂/∂p_y`.
    fn seeded(n: usize, sites: &[usize]) -> Self {
        let m = sites.len();
        let mut dq = vec![0.0; n * 2 * m];
        let mut dp = vec![0.0; n * 2 * m];
        for (k, &y) in sites.iter().enumerate() {
            dq[k * n + y] = 1.0;
            dp[(m + k) * n + y] = 1.0;
        }
        Self {
            cols: 2 * m,
            dq,
            dp,
        }
    }

    fn is_finite(&self) -> bool {
        self.dq.iter().chain(&self.dp).all(|v| v.is_finite())
    }
}

struct Stepper<'a> {
    sys: &'a AnharmonicSystem,
    scheme: Scheme,
    grad: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(sys: &'a AnharmonicSystem, scheme: Scheme) -> Self {
        let n = sys.len();
        Self {
            sys,
            scheme,
            grad: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, q: &mut [f64], p: &mut [f64], tan: Option<&mut Tangent>, h: f64) {
        match self.scheme {
            Scheme::Leapfrog => self.leapfrog(q, p, tan, h),
            Scheme::Rk4 => self.rk4(q, p, tan, h),
        }
    }

    fn kick(&mut self, q: &[f64], p: &mut [f64], tan: Option<&mut Tangent>, h: f64) {
        self.sys.force_gradient(q, &mut self.grad);
        for (pi, g) in p.iter_mut().zip(&self.grad) {
            *pi -= h * g;
        }
        if let Some(tan) = tan {
            let n = q.len();
            let hess = self.sys.hessian_at(q);
            for c in 0..tan.cols {
                hess.apply(&tan.dq[c * n..(c + 1) * n], &mut self.tmp);
                for (d, t) in tan.dp[c * n..(c + 1) * n].iter_mut().zip(&self.tmp) {
                    *d -= h * t;
                }
            }
        }
    }

    fn leapfrog(&mut self, q: &mut [f64], p: &mut [f64], mut tan: Option<&mut Tangent>, h: f64) {
        self.kick(q, p, tan.as_deref_mut(), 0.5 * h);
        for (qi, pi) in q.iter_mut().zip(p.iter()) {
            *qi += 2.0 * h * pi;
        }
        if let Some(t) = tan.as_deref_mut() {
            for (a, b) in t.dq.iter_mut().zip(&t.dp) {
                *a += 2.0 * h * b;
            }
        }
        self.kick(q, p, tan, 0.5 * h);
    }

    /// Derivative of the full (base plus tangent) state.
    fn deriv(
        &mut self,
        q: &[f64],
        p: &[f64],
        tq: &[f64],
        tp: &[f64],
        cols: usize,
    ) -> [Vec<f64>; 4] {
        let n = q.len();
        let dq: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        self.sys.force_gradient(q, &mut self.grad);
        let dp: Vec<f64> = self.grad.iter().map(|g| -g).collect();
        let dtq: Vec<f64> = tp.iter().map(|v| 2.0 * v).collect();
        let mut dtp = vec![0.0; tq.len()];
        if cols > 0 {
            let hess = self.sys.hessian_at(q);
            for c in 0..cols {
                hess.apply(&tq[c * n..(c + 1) * n], &mut dtp[c * n..(c + 1) * n]);
            }
            dtp.iter_mut().for_each(|v| *v = -*v);
        }
        [dq, dp, dtq, dtp]
    }

    fn rk4(&mut self, q: &mut [f64], p: &mut [f64], tan: Option<&mut Tangent>, h: f64) {
        let mut empty = Tangent {
            cols: 0,
            dq: Vec::new(),
            dp: Vec::new(),
        };
        let tan = tan.unwrap_or(&mut empty);
        let cols = tan.cols;
        let shifted = |base: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            base.iter().zip(k).map(|(b, d)| b + s * d).collect()
        };
        let k1 = self.deriv(q, p, &tan.dq, &tan.dp, cols);
        let k2 = self.deriv(
            &shifted(q, &k1[0], 0.5 * h),
            &shifted(p, &k1[1], 0.5 * h),
            &shifted(&tan.dq, &k1[2], 0.5 * h),
            &shifted(&tan.dp, &k1[3], 0.5 * h),
            cols,
        );
        let k3 = self.deriv(
            &shifted(q, &k2[0], 0.5 * h),
            &shifted(p, &k2[1], 0.5 * h),
            &shifted(&tan.dq, &k2[2], 0.5 * h),
            &shifted(&tan.dp, &k2[3], 0.5 * h),
            cols,
        );
        let k4 = self.deriv(
            &shifted(q, &k3[0], h),
            &shifted(p, &k3[1], h),
            &shifted(&tan.dq, &k3[2], h),
            &shifted(&tan.dp, &k3[3], h),
            cols,
        );
        let targets: [&mut [f64]; 4] = [q, p, &mut tan.dq, &mut tan.dp];
        for (c, target) in targets.into_iter().enumerate() {
            for (i, v) in target.iter_mut().enumerate() {
                *v += h / 6.0 * (k1[c][i] + 2.0 * k2[c][i] + 2.0 * k3[c][i] + k4[c][i]);
            }
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!(
            "dt must be finite and > 0, got {dt}"
        )));
    }
    Ok(())
}

/// Number of steps and signed step size for a span.
fn steps_for(span: f64, dt: f64) -> Result<(usize, f64)> {
    if !span.is_finite() {
        return Err(Error::invalid(format!("time must be finite, got {span}")));
    }
    let n = (span.abs() / dt).ceil();
    if n > MAX_STEPS {
        return Err(Error::invalid(format!(
            "|t|/dt = {n} exceeds the limit of {MAX_STEPS} steps"
        )));
    }
    let n = n as usize;
    Ok((n, if n == 0 { 0.0 } else { span / n as f64 }))
}

/// Runs the flow through every time in `times` (any order, any sign),
/// calling `emit(index, q, p, tangent)` at each.
///
/// Nonnegative times are visited in increasing order from `t = 0`,
/// negative ones in decreasing order, so each output is reached by a
/// single chain of steps.
fn run_schedule(
    sys: &AnharmonicSystem,
    x0: &PhasePoint,
    times: &[f64],
    dt: f64,
    scheme: Scheme,
    tangent_sites: Option<&[usize]>,
    mut emit: impl FnMut(usize, &[f64], &[f64], Option<&Tangent>),
) -> Result<()> {
    sys.check_point(x0)?;
    check_dt(dt)?;
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid(format!("time must be finite, got {t}")));
    }
    let n = sys.len();
    let mut forward: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= 0.0).collect();
    let mut backward: Vec<usize> = (0..times.len()).filter(|&i| times[i] < 0.0).collect();
    forward.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    backward.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut stepper = Stepper::new(sys, scheme);
    for chain in [forward, backward] {
        let mut q = x0.q.clone();
        let mut p = x0.p.clone();
        let mut tan = tangent_sites.map(|s| Tangent::seeded(n, s));
        let mut now = 0.0;
        let mut taken = 0usize;
        for idx in chain {
            let (steps, h) = steps_for(times[idx] - now, dt)?;
            for k in 0..steps {
                stepper.step(&mut q, &mut p, tan.as_mut(), h);
                let finite = q.iter().chain(&p).all(|v| v.is_finite())
                    && tan.as_ref().is_none_or(Tangent::is_finite);
                if !finite {
                    return Err(Error::Divergence {
                        step: taken + k + 1,
                        time: now + (k + 1) as f64 * h,
                    });
                }
            }
            taken += steps;
            now = times[idx];
            emit(idx, &q, &p, tan.as_ref());
        }
    }
    Ok(())
}

/// `Φ_t(x0)` by numerical integration.
pub fn integrate_flow(
    sys: &AnharmonicSystem,
    x0: &PhasePoint,
    t: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<PhasePoint> {
    Ok(integrate_flow_schedule(sys, x0, &[t], dt, scheme)?.remove(0))
}

/// `Φ_t(x0)` for every `t` in `times`, in input order.
pub fn integrate_flow_schedule(
    sys: &AnharmonicSystem,
    x0: &PhasePoint,
    times: &[f64],
    dt: f64,
    scheme: Scheme,
) -> Result<Vec<PhasePoint>> {
    let mut out = vec![None; times.len()];
    run_schedule(sys, x0, times, dt, scheme, None, |i, q, p, _| {
        out[i] = Some(PhasePoint {
            q: q.to_vec(),
            p: p.to_vec(),
        });
    })?;
    Ok(out
        .into_iter()
        .map(|x| x.expect("every time visited"))
        .collect())
}

/// Full Jacobian of the flow at time `t`.
pub fn integrate_tangent(
    sys: &AnharmonicSystem,
    x0: &PhasePoint,
    t: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<TangentFlow> {
    Ok(integrate_tangent_schedule(sys, x0, &[t], dt, scheme)?.remove(0))
}

pub fn integrate_tangent_schedule(
    sys: &AnharmonicSystem,
    x0: &PhasePoint,
    times: &[f64],
    dt: f64,
    scheme: Scheme,
) -> Result<Vec<TangentFlow>> {
    let n = sys.len();
    let sites: Vec<usize> = (0..n).collect();
    let mut out = vec![None; times.len()];
    run_schedule(sys, x0, times, dt, scheme, Some(&sites), |i, q, p, tan| {
        let tan = tan.expect("tangent requested");
        let tq = DMatrix::from_column_slice(n, 2 * n, &tan.dq);
        let tp = DMatrix::from_column_slice(n, 2 * n, &tan.dp);
        out[i] = Some(TangentFlow {
            t: times[i],
            state: PhasePoint {
                q: q.to_vec(),
                p: p.to_vec(),
            },
            dq_dq0: tq.columns(0, n).into_owned(),
            dq_dp0: tq.columns(n, n).into_owned(),
            dp_dq0: tp.columns(0, n).into_owned(),
            dp_dp0: tp.columns(n, n).into_owned(),
        });
    })?;
    Ok(out
        .into_iter()
        .map(|x| x.expect("every time visited"))
        .collect())
}

/// `{α_t(W(f)), W(g)}(x0)` from the chain rule.
///
/// With `a_y = Σ_x Re f(x) ∂q_x(t)/∂q_y + Im f(x) ∂p_x(t)/∂q_y` and `b_y`
/// the same with `∂/∂p_y`, the bracket is
/// `-Σ_y (a_y Im g(y) - b_y Re g(y)) · W(f)(Φ_t x0) · W(g)(x0)`.
pub fn bracket_pointwise(
    sys: &AnharmonicSystem,
    f: &WeylGenerator,
    g: &WeylGenerator,
    x0: &PhasePoint,
    t: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Complex64> {
    Ok(bracket_pointwise_schedule(sys, f, g, x0, &[t], dt, scheme)?[0])
}

/// As [`bracket_pointwise`] at every time in `times`, propagating only the
/// tangent columns for the support of `g`.
pub fn bracket_pointwise_schedule(
    sys: &AnharmonicSystem,
    f: &WeylGenerator,
    g: &WeylGenerator,
    x0: &PhasePoint,
    times: &[f64],
    dt: f64,
    scheme: Scheme,
) -> Result<Vec<Complex64>> {
    let n = sys.len();
    f.check_lattice(sys.lattice())?;
    g.check_lattice(sys.lattice())?;
    let ys = g.support();
    let m = ys.len();
    let wg = weyl_eval(g, x0)?;
    let mut out = vec![Complex64::new(0.0, 0.0); times.len()];
    run_schedule(sys, x0, times, dt, scheme, Some(&ys), |i, q, p, tan| {
        let tan = tan.expect("tangent requested");
        let mut coeff = 0.0;
        for (k, gy) in g.iter().map(|(_, v)| v).enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for (x, fx) in f.iter() {
                a += fx.re * tan.dq[k * n + x] + fx.im * tan.dp[k * n + x];
                b += fx.re * tan.dq[(m + k) * n + x] + fx.im * tan.dp[(m + k) * n + x];
            }
            coeff += a * gy.im - b * gy.re;
        }
        let phase: f64 = f.iter().map(|(x, v)| v.re * q[x] + v.im * p[x]).sum();
        out[i] = -coeff * Complex64::from_polar(1.0, phase) * wg;
    })?;
    Ok(out)
}
