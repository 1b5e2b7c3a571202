//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::*;
use lrl::anharmonic::{
    assumption_constants, bracket_pointwise_schedule, integrate_flow, integrate_tangent,
    integrate_tangent_schedule, AnharmonicSystem, GaussianSite, Scheme, SitePotential,
};
use lrl::bounds::{harmonic_velocity, kappa_v, optimal_mu};
use lrl::expcli::{parse_config, run_sweep, SweepMode, SweepRecord};
use lrl::harmonic::{harmonic_flow, kernel_decay_report, kernels, HarmonicParams};
use lrl::lattice::{default_convolution_constant, TorusLattice};
use lrl::observables::{inner, weyl_eval, Sampler, WeylGenerator};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn chain8() -> (TorusLattice, HarmonicParams) {
    (
        TorusLattice::new(1, 8).unwrap(),
        HarmonicParams::isotropic(1.0, 1.0, 1).unwrap(),
    )
}

fn sweep_times() -> Vec<f64> {
    (0..21).map(|i| i as f64 * 0.1).collect()
}

fn exact_flow_oracle() -> Outcome {
    let (lat, params) = chain8();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let x0 = random_point(lat.len(), 2.0, seed);
        let exact = harmonic_flow(&lat, &params, &x0, 1.0).map_err(|e| e.to_string())?;
        let reference = dopri5(
            hamilton_rhs(&lat, 1.0, &[1.0], |_| 0.0),
            &flat(&x0),
            1.0,
            1e-12,
        );
        worst = worst.max(max_abs_diff(&flat(&exact), &reference));
    }
    ensure(worst <= 1e-6, || format!("max error {worst:e}"))?;
    Ok(format!("max error {worst:.2e} over 5 initial conditions"))
}

fn kernel_certification() -> Outcome {
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    for (nu, l) in [(1, 8), (2, 4)] {
        let lat = TorusLattice::new(nu, l).unwrap();
        let params = HarmonicParams::isotropic(1.0, 1.0, nu).unwrap();
        let lsum = nu as f64;
        let c = (1.0 + 4.0 * lsum).sqrt();
        for mu in [0.5f64, 1.0, 2.0] {
            let v = c * (2.0 / mu).max((mu / 2.0 + 1.0).exp());
            let prefactor = [1.0 / c, 1.0, c * (mu / 2.0).exp()];
            for t in [0.0, 0.25, 0.5, 1.0, 2.0] {
                let report =
                    kernel_decay_report(&lat, &params, t, mu).map_err(|e| e.to_string())?;
                ensure(report.all_pass(), || {
                    format!("library margin fails nu={nu} mu={mu} t={t}")
                })?;
                for x in 0..lat.len() {
                    let naive = naive_kernels(&lat, 1.0, &vec![1.0; nu], t, x);
                    let dist: i64 = lat.site(x).iter().map(|c| c.abs()).sum();
                    let decay = (-mu * (dist as f64 - v * t)).exp();
                    for m in 0..3 {
                        let margin = prefactor[m] * decay - naive[m].abs();
                        min_margin = min_margin.min(margin);
                        ensure(margin >= -1e-12, || {
                            format!(
                                "nu={nu} mu={mu} t={t} x={:?} m={}: margin {margin:e}",
                                lat.site(x),
                                m as i32 - 1
                            )
                        })?;
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(format!(
        "{checked} kernel bounds, min margin {min_margin:.3e}"
    ))
}

fn kernel_identities() -> Outcome {
    let h = 1e-5;
    let mut worst_fd: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for (nu, l, omega, lambda) in [
        (1, 8, 1.0, vec![1.0]),
        (2, 4, 0.5, vec![1.0, 0.3]),
        (1, 5, 0.0, vec![0.7]),
    ] {
        let lat = TorusLattice::new(nu, l).unwrap();
        let params = HarmonicParams::new(omega, lambda).unwrap();
        let k = |t: f64| kernels(&lat, &params, t).unwrap();
        for t in [0.0, 0.3, 1.0, 1.7, -0.8] {
            let (now, back) = (k(t), k(-t));
            let (up, down) = (k(t + h), k(t - h));
            for x in 0..lat.len() {
                ensure(
                    now.h_0[x] == back.h_0[x] || (now.h_0[x] - back.h_0[x]).abs() <= 1e-14,
                    || format!("h0 not even at t={t}"),
                )?;
                ensure((now.h_minus1[x] + back.h_minus1[x]).abs() <= 1e-14, || {
                    format!("h-1 not odd at t={t}")
                })?;
                ensure((now.h_plus1[x] + back.h_plus1[x]).abs() <= 1e-14, || {
                    format!("h1 not odd at t={t}")
                })?;
                let d_minus1 = (up.h_minus1[x] - down.h_minus1[x]) / (2.0 * h);
                let d_0 = (up.h_0[x] - down.h_0[x]) / (2.0 * h);
                worst_fd = worst_fd
                    .max((d_minus1 + 2.0 * now.h_0[x]).abs())
                    .max((d_0 - 2.0 * now.h_plus1[x]).abs());
            }
            let total: f64 = now.h_0.iter().sum();
            worst_sum = worst_sum.max((total - (2.0 * omega * t).cos()).abs());
        }
    }
    ensure(worst_fd <= 1e-6, || {
        format!("derivative relation error {worst_fd:e}")
    })?;
    ensure(worst_sum <= 1e-10, || {
        format!("sum rule error {worst_sum:e}")
    })?;
    Ok(format!(
        "derivative error {worst_fd:.2e}, sum rule error {worst_sum:.2e}"
    ))
}

fn weyl_relation() -> Outcome {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let gen = |rng: &mut ChaCha8Rng| {
        let mut entries: Vec<(usize, Complex64)> = (0..3)
            .map(|_| {
                (
                    rng.gen_range(0..n),
                    Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)),
                )
            })
            .collect();
        entries.sort_by_key(|e| e.0);
        entries.dedup_by_key(|e| e.0);
        WeylGenerator::new(entries).unwrap()
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for point in 0..100 {
        let (f, g) = (gen(&mut rng), gen(&mut rng));
        let x = random_point(n, 5.0, 1000 + point);
        let partial = |obs: &WeylGenerator, site: usize, q: bool| {
            let (mut a, mut b) = (x.clone(), x.clone());
            let (ca, cb) = if q {
                (&mut a.q, &mut b.q)
            } else {
                (&mut a.p, &mut b.p)
            };
            ca[site] += h;
            cb[site] -= h;
            (weyl_eval(obs, &a).unwrap() - weyl_eval(obs, &b).unwrap()) / (2.0 * h)
        };
        let fd: Complex64 = (0..n)
            .map(|s| {
                partial(&f, s, true) * partial(&g, s, false)
                    - partial(&f, s, false) * partial(&g, s, true)
            })
            .sum();
        let exact = -inner(&f, &g).im * weyl_eval(&f, &x).unwrap() * weyl_eval(&g, &x).unwrap();
        worst = worst.max((fd - exact).norm());
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e} at 100 points"))
}

fn optimal_velocity() -> Outcome {
    let opt = optimal_mu();
    let mu0 = opt.mu0;
    let residual = (2.0 / mu0 - (mu0 / 2.0 + 1.0).exp()).abs();
    ensure(mu0 > 0.5 && mu0 < 1.0, || format!("mu0 = {mu0}"))?;
    ensure(residual <= 1e-10, || format!("residual {residual:e}"))?;
    for (omega, lambda) in [(1.0, vec![1.0]), (0.0, vec![0.5, 2.0]), (3.0, vec![0.1])] {
        let params = HarmonicParams::new(omega, lambda.clone()).unwrap();
        let c = (omega * omega + 4.0 * lambda.iter().sum::<f64>()).sqrt();
        let v = harmonic_velocity(mu0, &params).map_err(|e| e.to_string())?;
        ensure(v <= 4.0 * c, || {
            format!("v_h(mu0) = {v} > 4c = {}", 4.0 * c)
        })?;
        ensure((v - 2.0 * c / mu0).abs() <= 1e-9 * c, || {
            format!("v_h(mu0) = {v} is not 2c/mu0")
        })?;
    }
    Ok(format!(
        "mu0 = {mu0:.8}, v_h(mu0)/c = {:.6}, residual {residual:.1e}",
        2.0 / mu0
    ))
}

fn sweep_config(extra: &str, d: i64, mu: f64) -> String {
    format!(
        "lattice.nu = 1\nlattice.L = 8\nharmonic.omega = 1\nharmonic.lambda = 1\n\
         observables.f_sites = 0\nobservables.f_values = 1\n\
         observables.g_sites = {d}\nobservables.g_values = 1i\n\
         schedule.t_min = 0\nschedule.t_max = 2\nschedule.t_steps = 21\n\
         rates.mu = {mu}\n{extra}"
    )
}

fn check_rows(
    rows: &[SweepRecord],
    label: &str,
    envelope: impl Fn(f64) -> f64,
) -> Result<(), String> {
    ensure(rows.len() == 21, || format!("{label}: {} rows", rows.len()))?;
    for (row, t) in rows.iter().zip(sweep_times()) {
        ensure((row.t - t).abs() <= 1e-12, || {
            format!("{label}: unexpected time {}", row.t)
        })?;
        ensure(row.pass, || {
            format!("{label} t={}: row fails, margin {:e}", row.t, row.margin)
        })?;
        let bound = envelope(row.t);
        ensure(row.measured <= bound, || {
            format!("{label} t={}: {} > {bound}", row.t, row.measured)
        })?;
    }
    Ok(())
}

fn harmonic_light_cone() -> Outcome {
    let (lat, params) = chain8();
    let sys = AnharmonicSystem::new(lat.clone(), params).unwrap();
    let c = 5f64.sqrt();
    let mut rows_checked = 0;
    let mut worst_cross: f64 = 0.0;
    for mu in [0.5f64, 1.0] {
        let v = c * (2.0 / mu).max((mu / 2.0 + 1.0).exp());
        for d in 2..=7 {
            let cfg = parse_config(&sweep_config("", d, mu)).map_err(|e| e.to_string())?;
            let rows = run_sweep(&cfg, SweepMode::Harmonic).map_err(|e| e.to_string())?;
            let envelope =
                |t: f64| (1.0 + c * (mu / 2.0).exp() + 1.0 / c) * (-mu * (d as f64 - v * t)).exp();
            check_rows(&rows, &format!("mu={mu} d={d}"), envelope)?;
            let (f, g) = cfg.generators(&lat).map_err(|e| e.to_string())?;
            let x0 = random_point(lat.len(), 1.0, d as u64);
            let pointwise =
                bracket_pointwise_schedule(&sys, &f, &g, &x0, &sweep_times(), 1e-3, Scheme::Rk4)
                    .map_err(|e| e.to_string())?;
            for (row, b) in rows.iter().zip(pointwise) {
                worst_cross = worst_cross.max((row.measured - b.norm()).abs());
            }
            rows_checked += rows.len();
        }
    }
    ensure(worst_cross <= 1e-8, || {
        format!("exact norm vs integrated bracket differ by {worst_cross:e}")
    })?;
    Ok(format!(
        "{rows_checked} rows pass, integrated bracket agrees to {worst_cross:.1e}"
    ))
}

fn anharmonic_light_cone() -> Outcome {
    let (_, params) = chain8();
    let g = GaussianSite::new(1.0, 1.0).unwrap();
    let transform = |r: f64| r.abs() * (-r * r / 4.0).exp() / (2.0 * PI.sqrt());
    let kappa = 2.0 * simpson(|r| r * transform(r), 0.0, 40.0, 40_000);
    let kappa_lib = kappa_v(&g, 1e-10).map_err(|e| e.to_string())?;
    ensure((kappa_lib - kappa).abs() <= 1e-8, || {
        format!("kappa {kappa_lib} vs {kappa}")
    })?;
    let cnu = 4.0 * (PI * PI / 3.0 - 1.0);
    let cnu_lib = default_convolution_constant(1).map_err(|e| e.to_string())?;
    ensure(cnu_lib >= cnu && cnu_lib <= cnu * (1.0 + 2e-6), || {
        format!("C_nu {cnu_lib} vs {cnu}")
    })?;
    ensure((g.value(0.7) - (-0.49f64).exp()).abs() < 1e-15, || {
        "potential is not e^{-q^2}".into()
    })?;

    let (mu, eps) = (0.5, 0.5);
    let c = params.coupling_constant();
    let rate = mu + eps;
    let s = (2.0 / eps - 1.0f64).max(0.0);
    let big_c = (1.0 + c * (rate / 2.0).exp() + 1.0 / c) * (1.0 + s).powi(2) * (-eps * s).exp();
    let delta = rate * c * (2.0 / rate).max((rate / 2.0 + 1.0).exp()) + big_c * cnu * kappa;
    let extra = "potential.kind = gaussian_site\npotential.amplitude = 1\npotential.width = 1\n\
                 rates.epsilon = 0.5\nintegrator.dt = 1e-3\nsampling.count = 50\nsampling.amplitude = 5\nsampling.seed = 7\n";
    let mut rows_checked = 0;
    let mut largest_ratio: f64 = 0.0;
    for d in 2..=7 {
        let cfg = parse_config(&sweep_config(extra, d, mu)).map_err(|e| e.to_string())?;
        ensure(cfg.sample_count == 50 && cfg.dt == 1e-3, || {
            "sweep settings not applied".into()
        })?;
        let rows = run_sweep(&cfg, SweepMode::Anharmonic).map_err(|e| e.to_string())?;
        let decay = (-mu * d as f64).exp() / (1.0 + d as f64).powi(2);
        let envelope = |t: f64| big_c * (delta * t).exp() * decay;
        check_rows(&rows, &format!("d={d}"), envelope)?;
        for row in &rows {
            ensure(row.envelope >= envelope(row.t) * (1.0 - 1e-12), || {
                format!("d={d} t={}: library envelope below oracle envelope", row.t)
            })?;
            largest_ratio = largest_ratio.max(row.measured / envelope(row.t));
        }
        rows_checked += rows.len();
    }
    Ok(format!(
        "{rows_checked} rows pass, kappa = {kappa:.10}, delta = {delta:.3}, max measured/envelope {largest_ratio:.2e}"
    ))
}

fn apriori_inequalities() -> Outcome {
    let (lat, params) = chain8();
    let pot = GaussianSite::new(1.0, 1.0).unwrap();
    let sys = AnharmonicSystem::new(lat.clone(), params)
        .unwrap()
        .with_site(pot);
    let constants = assumption_constants(&sys).map_err(|e| e.to_string())?;
    // V = e^{-q²}: sup|V''| = 2 at q = 0 and V'(0) = 0, so |V'(q)| <= 2|q|
    let sup_d2 = (0..=200_000)
        .map(|i| pot.d2(-50.0 + i as f64 * 5e-4).abs())
        .fold(0.0, f64::max);
    ensure((sup_d2 - 2.0).abs() < 1e-12, || {
        format!("sup |V''| = {sup_d2}")
    })?;
    let (c1, c1_tilde, c2) = (sup_d2 * sup_d2, 0.0, sup_d2);
    ensure(
        constants.c1 >= c1 && constants.c1_tilde >= c1_tilde && constants.c2 >= c2,
        || format!("library constants {constants:?} below the direct values"),
    )?;
    let (omega2, lsum) = (1.0, 1.0);
    let k2 = (omega2 + 2.0 * lsum - 1.0f64).abs() + 4.0 * lsum + 0.5 + constants.c1 / 2.0;
    let k = 2.0 * omega2 + 8.0 * lsum + constants.c2;
    let f = WeylGenerator::delta(lat.origin(), Complex64::new(1.0, 0.0));
    let g = WeylGenerator::delta(lat.index_of(&[4]).unwrap(), Complex64::new(0.0, 1.0));
    let times = sweep_times();
    let sampler = Sampler::new(20, 2024, 2.0).unwrap();
    let mut worst = [0.0f64; 4];
    for x0 in sampler.points(lat.len()) {
        let k1 =
            x0.q.iter()
                .zip(&x0.p)
                .map(|(q, p)| q * q + p * p + constants.c1_tilde)
                .fold(0.0, f64::max)
                .sqrt();
        let tangents = integrate_tangent_schedule(&sys, &x0, &times, 1e-3, Scheme::Rk4)
            .map_err(|e| e.to_string())?;
        let brackets = bracket_pointwise_schedule(&sys, &f, &g, &x0, &times, 1e-3, Scheme::Rk4)
            .map_err(|e| e.to_string())?;
        for ((tan, bracket), &t) in tangents.iter().zip(&brackets).zip(&times) {
            let q_rows = (2.0 * t).max(1.0) * (k * t * t).exp();
            let p_rows = 1.0 + t * (k + 2.0 * lsum) * q_rows;
            let solution = tan
                .state
                .q
                .iter()
                .chain(&tan.state.p)
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let ratios = [
                solution / (k1 * (k2 * t).exp()),
                tan.max_abs_q_rows() / q_rows,
                tan.max_abs_p_rows() / p_rows,
                bracket.norm() / (4.0 * q_rows.max(p_rows)),
            ];
            for (w, r) in worst.iter_mut().zip(ratios) {
                *w = w.max(r);
            }
        }
    }
    let names = ["solution", "q Jacobian", "p Jacobian", "bracket"];
    for (name, w) in names.iter().zip(worst) {
        ensure(w <= 1.0, || format!("{name} bound violated, ratio {w}"))?;
    }
    Ok(format!(
        "20 trajectories, worst ratios: solution {:.2e}, dq {:.2e}, dp {:.2e}, bracket {:.2e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn tangent_flow() -> Outcome {
    let lat = TorusLattice::new(1, 4).unwrap();
    let params = HarmonicParams::isotropic(1.0, 1.0, 1).unwrap();
    let sys = AnharmonicSystem::new(lat.clone(), params)
        .unwrap()
        .with_site(GaussianSite::new(1.0, 1.0).unwrap());
    let n = lat.len();
    let (t, dt, h) = (1.0, 1e-3, 1e-5);
    let mut worst_fd: f64 = 0.0;
    let mut worst_defect: f64 = 0.0;
    for seed in 0..3 {
        let x0 = random_point(n, 2.0, 300 + seed);
        for scheme in [Scheme::Rk4, Scheme::Leapfrog] {
            let tan = integrate_tangent(&sys, &x0, t, dt, scheme).map_err(|e| e.to_string())?;
            worst_defect = worst_defect.max(tan.symplectic_defect());
            let jac = tan.jacobian();
            for col in 0..2 * n {
                let shift = |sign: f64| {
                    let mut x = x0.clone();
                    if col < n {
                        x.q[col] += sign * h;
                    } else {
                        x.p[col - n] += sign * h;
                    }
                    flat(&integrate_flow(&sys, &x, t, dt, scheme).unwrap())
                };
                let (a, b) = (shift(1.0), shift(-1.0));
                for row in 0..2 * n {
                    worst_fd =
                        worst_fd.max(((a[row] - b[row]) / (2.0 * h) - jac[(row, col)]).abs());
                }
            }
        }
    }
    ensure(worst_fd <= 1e-4, || format!("Jacobian error {worst_fd:e}"))?;
    ensure(worst_defect <= 1e-6, || {
        format!("symplectic defect {worst_defect:e}")
    })?;
    Ok(format!(
        "Jacobian error {worst_fd:.2e}, symplectic defect {worst_defect:.2e}"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/anharmonic.cfg");
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_lrl"))
            .args(["sweep", "--mode", "anharmonic", "--seed", "99", "--out"])
            .arg(&out)
            .arg(config)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("lrl exited with {}", status.status)
        })?;
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a.csv")?, run("b.csv")?);
    ensure(a == b, || "CSV output differs between runs".into())?;
    ensure(a.starts_with(b"t,"), || "missing CSV header".into())?;
    let lines = a.iter().filter(|&&c| c == b'\n').count();
    Ok(format!(
        "two runs, {} bytes, {lines} lines, identical",
        a.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("exact-flow oracle", exact_flow_oracle),
        ("kernel certification", kernel_certification),
        ("kernel identities", kernel_identities),
        ("Weyl relation", weyl_relation),
        ("optimal velocity", optimal_velocity),
        ("harmonic light cone", harmonic_light_cone),
        ("anharmonic light cone", anharmonic_light_cone),
        ("a priori inequalities", apriori_inequalities),
        ("tangent flow", tangent_flow),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
