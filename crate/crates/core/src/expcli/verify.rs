//! The `verify` suite: named checks run in a fixed order.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::config::ExperimentConfig;
use crate::anharmonic::{
    apriori_solution_bound, assumption_constants, bracket_apriori_bound,
    bracket_pointwise_schedule, hamiltonian_eval, integrate_flow, integrate_flow_schedule,
    integrate_tangent, integrate_tangent_schedule, jacobian_bound, AnharmonicSystem,
    AssumptionConstants,
};
use crate::error::Result;
use crate::harmonic::{
    evolve_weyl, harmonic_flow, kernel_decay_report_with, PhasePoint, SpectralTable,
};
use crate::lattice::{default_convolution_constant, verify_f_convolution_with, DecayProfile};
use crate::observables::{
    inner, poisson_bracket_numeric, weyl_eval, Sampler, SmoothObservable, WeylGenerator,
    DEFAULT_FD_STEP,
};

/// Relative energy drift tolerated along a trajectory.
pub const ENERGY_TOL: f64 = 1e-4;
const GROUP_LAW_TOL: f64 = 1e-9;
const REVERSIBILITY_TOL: f64 = 1e-6;
const SYMPLECTIC_TOL: f64 = 1e-6;
const KERNEL_SUM_TOL: f64 = 1e-10;
const KERNEL_DERIV_TOL: f64 = 1e-6;
const KERNEL_FD_STEP: f64 = 1e-5;
const WEYL_TOL: f64 = 1e-6;
const WEYL_POINTS: usize = 100;
const TRAJECTORIES: usize = 20;
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status} {}: {}", c.name, c.detail);
        }
        let failed = self.failed().count();
        let _ = writeln!(out, "{} checks, {failed} failed", self.checks.len());
        out
    }
}

/// Outcome of one check: `Ok((pass, detail))`, or an error that counts as a failure.
type Check = Result<(bool, String)>;
type CheckFn = fn(&Context) -> Check;

fn within(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + BOUND_SLACK) + BOUND_SLACK
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    sys: AnharmonicSystem,
    f: WeylGenerator,
    g: WeylGenerator,
    times: Vec<f64>,
    points: Vec<PhasePoint>,
}

impl Context<'_> {
    fn trajectories(&self, n: usize) -> &[PhasePoint] {
        &self.points[..n.min(self.points.len())]
    }
}

fn kernel_decay(ctx: &Context) -> Check {
    let (lat, params) = (ctx.sys.lattice(), ctx.sys.params());
    let table = SpectralTable::new(lat, params)?;
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for &t in &ctx.times {
        let report = kernel_decay_report_with(lat, params, &table.kernels(lat, t)?, ctx.cfg.mu)?;
        pass &= report.all_pass();
        worst = worst.min(report.min_margin());
    }
    Ok((
        pass,
        format!("min margin {worst} over {} times", ctx.times.len()),
    ))
}

fn kernel_identities(ctx: &Context) -> Check {
    let (lat, params) = (ctx.sys.lattice(), ctx.sys.params());
    let table = SpectralTable::new(lat, params)?;
    let omega = params.omega();
    let (mut parity, mut sum, mut deriv) = (0.0f64, 0.0f64, 0.0f64);
    for &t in &ctx.times {
        let k = table.kernels(lat, t)?;
        let r = table.kernels(lat, -t)?;
        for x in 0..lat.len() {
            parity = parity
                .max((k.h_0[x] - r.h_0[x]).abs())
                .max((k.h_minus1[x] + r.h_minus1[x]).abs())
                .max((k.h_plus1[x] + r.h_plus1[x]).abs());
        }
        let total: f64 = k.h_0.iter().sum();
        sum = sum.max((total - (2.0 * omega * t).cos()).abs());
        let up = table.kernels(lat, t + KERNEL_FD_STEP)?;
        let down = table.kernels(lat, t - KERNEL_FD_STEP)?;
        let d = |a: &[f64], b: &[f64], x: usize| (a[x] - b[x]) / (2.0 * KERNEL_FD_STEP);
        for x in 0..lat.len() {
            deriv = deriv
                .max((d(&up.h_minus1, &down.h_minus1, x) + 2.0 * k.h_0[x]).abs())
                .max((d(&up.h_0, &down.h_0, x) - 2.0 * k.h_plus1[x]).abs());
        }
    }
    let pass = parity <= 1e-12 && sum <= KERNEL_SUM_TOL && deriv <= KERNEL_DERIV_TOL;
    Ok((
        pass,
        format!("parity {parity}, sum rule {sum}, derivative relations {deriv}"),
    ))
}

fn flow_group_law(ctx: &Context) -> Check {
    let (lat, params) = (ctx.sys.lattice(), ctx.sys.params());
    let t = ctx.cfg.schedule.t_max;
    let (mut group, mut reverse) = (0.0f64, 0.0f64);
    for x0 in ctx.trajectories(5) {
        let half = harmonic_flow(lat, params, x0, 0.5 * t)?;
        let composed = harmonic_flow(lat, params, &half, 0.5 * t)?;
        let direct = harmonic_flow(lat, params, x0, t)?;
        group = group.max(composed.max_abs_diff(&direct));
        let there = integrate_flow(&ctx.sys, x0, t, ctx.cfg.dt, ctx.cfg.scheme)?;
        let back = integrate_flow(&ctx.sys, &there, -t, ctx.cfg.dt, ctx.cfg.scheme)?;
        let scale = x0.q.iter().chain(&x0.p).fold(1.0f64, |m, v| m.max(v.abs()));
        reverse = reverse.max(back.max_abs_diff(x0) / scale);
    }
    Ok((
        group <= GROUP_LAW_TOL && reverse <= REVERSIBILITY_TOL,
        format!("harmonic composition error {group}, numerical reversibility error {reverse}"),
    ))
}

fn energy_conservation(ctx: &Context) -> Check {
    let mut worst = 0.0f64;
    for x0 in ctx.trajectories(10) {
        let h0 = hamiltonian_eval(&ctx.sys, x0)?;
        let states = integrate_flow_schedule(&ctx.sys, x0, &ctx.times, ctx.cfg.dt, ctx.cfg.scheme)?;
        for x in &states {
            let drift = (hamiltonian_eval(&ctx.sys, x)? - h0).abs() / h0.abs().max(1.0);
            worst = worst.max(drift);
        }
    }
    Ok((worst <= ENERGY_TOL, format!("max relative drift {worst}")))
}

fn weyl_relation(ctx: &Context) -> Check {
    let lat = ctx.sys.lattice();
    let ft = evolve_weyl(lat, ctx.sys.params(), &ctx.f, ctx.cfg.schedule.t_max)?;
    let coefficient = -inner(&ft, &ctx.g).im;
    let numeric = |gen: &WeylGenerator| {
        let gen = gen.clone();
        SmoothObservable::new(gen.support(), move |x| {
            weyl_eval(&gen, x).unwrap_or(Complex64::new(f64::NAN, 0.0))
        })
    };
    let (a, b) = (numeric(&ft), numeric(&ctx.g));
    let sampler = Sampler::new(WEYL_POINTS, ctx.cfg.seed ^ 0x3e71, ctx.cfg.sample_amplitude)?;
    let mut worst = 0.0f64;
    for x in sampler.points(lat.len()) {
        let fd = poisson_bracket_numeric(&a, &b, &x, DEFAULT_FD_STEP)?;
        let exact = coefficient * weyl_eval(&ft, &x)? * weyl_eval(&ctx.g, &x)?;
        worst = worst.max((fd - exact).norm());
    }
    Ok((
        worst <= WEYL_TOL,
        format!("max error {worst} at {WEYL_POINTS} points, coefficient {coefficient}"),
    ))
}

fn symplecticity(ctx: &Context) -> Check {
    let t = ctx.cfg.schedule.t_max;
    let mut worst = 0.0f64;
    for x0 in ctx.trajectories(3) {
        let tan = integrate_tangent(&ctx.sys, x0, t, ctx.cfg.dt, ctx.cfg.scheme)?;
        worst = worst.max(tan.symplectic_defect());
    }
    Ok((
        worst <= SYMPLECTIC_TOL,
        format!("max defect {worst} at t = {t}"),
    ))
}

fn constants(ctx: &Context) -> Result<AssumptionConstants> {
    assumption_constants(&ctx.sys)
}

fn assumption_check(ctx: &Context) -> Check {
    let k = constants(ctx)?;
    Ok((
        true,
        format!(
            "C1 = {}, C1~ = {}, mu1 = {}, C2 = {}, mu2 = {}, C3 = {}, mu3 = {}",
            k.c1, k.c1_tilde, k.mu1, k.c2, k.mu2, k.c3, k.mu3
        ),
    ))
}

fn apriori_bounds(ctx: &Context) -> Check {
    let k = constants(ctx)?;
    let (mut sol, mut jac, mut br) = (0.0f64, 0.0f64, 0.0f64);
    let mut pass = true;
    for x0 in ctx.trajectories(TRAJECTORIES) {
        let sb = apriori_solution_bound(&ctx.sys, &k, x0)?;
        let flows =
            integrate_tangent_schedule(&ctx.sys, x0, &ctx.times, ctx.cfg.dt, ctx.cfg.scheme)?;
        let brackets = bracket_pointwise_schedule(
            &ctx.sys,
            &ctx.f,
            &ctx.g,
            x0,
            &ctx.times,
            ctx.cfg.dt,
            ctx.cfg.scheme,
        )?;
        for (tan, b) in flows.iter().zip(&brackets) {
            let t = tan.t;
            let size = tan
                .state
                .q
                .iter()
                .chain(&tan.state.p)
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let bound = sb.at(t);
            pass &= within(size, bound);
            sol = sol.max(size / bound);
            let jb = jacobian_bound(&ctx.sys, &k, t);
            pass &=
                within(tan.max_abs_q_rows(), jb.q_rows) && within(tan.max_abs_p_rows(), jb.p_rows);
            jac = jac.max((tan.max_abs_q_rows() / jb.q_rows).max(tan.max_abs_p_rows() / jb.p_rows));
            let bb = bracket_apriori_bound(&ctx.sys, &k, &ctx.f, &ctx.g, t)?;
            pass &= within(b.norm(), bb);
            br = br.max(b.norm() / bb);
        }
    }
    Ok((
        pass,
        format!("max ratio to bound: solution {sol}, Jacobian {jac}, bracket {br}"),
    ))
}

fn f_convolution(ctx: &Context) -> Check {
    let lat = ctx.sys.lattice();
    let profile = DecayProfile::new(ctx.cfg.mu, lat.nu())?;
    let cnu = default_convolution_constant(lat.nu())?;
    let origin = lat.site(lat.origin()).to_vec();
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for y in 0..lat.len() {
        let r = verify_f_convolution_with(lat, &profile, cnu, &origin, lat.site(y))?;
        pass &= r.pass;
        worst = worst.min(r.rhs / r.lhs);
    }
    Ok((pass, format!("min rhs/lhs {worst} with C_nu = {cnu}")))
}

/// Runs every check in order. Setup errors are returned; errors inside a
/// check, including divergence, are reported as that check failing.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let sys = cfg.system()?;
    let (f, g) = cfg.generators(sys.lattice())?;
    let points = cfg.sampler()?.points(sys.len());
    let ctx = Context {
        cfg,
        times: cfg.times(),
        points,
        sys,
        f,
        g,
    };
    let suite: [(&'static str, CheckFn); 9] = [
        ("kernel_decay", kernel_decay),
        ("kernel_identities", kernel_identities),
        ("flow_group_law", flow_group_law),
        ("energy_conservation", energy_conservation),
        ("weyl_relation", weyl_relation),
        ("symplecticity", symplecticity),
        ("assumption_constants", assumption_check),
        ("apriori_bounds", apriori_bounds),
        ("f_convolution", f_convolution),
    ];
    let checks = suite
        .iter()
        .map(|(name, check)| {
            let (pass, detail) = check(&ctx).unwrap_or_else(|e| (false, e.to_string()));
            CheckOutcome { name, pass, detail }
        })
        .collect();
    Ok(VerifyReport { checks })
}
