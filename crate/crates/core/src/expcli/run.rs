//! Kernel tables, bracket-versus-envelope sweeps and the constants table.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ExperimentConfig, PotentialKind};
use crate::anharmonic::{
    assumption_constants, bracket_pointwise_schedule, AnharmonicSystem, GaussianSite,
};
use crate::bounds::{
    anharmonic_envelope, anharmonic_velocity, harmonic_envelope, harmonic_velocity, kappa_v,
    multisite_envelope, optimal_mu, EnvelopeParams, EnvelopeVariant, VelocityMode,
};
use crate::error::{Error, Result};
use crate::harmonic::{kernel_decay_report_with, SpectralTable};
use crate::lattice::default_convolution_constant;
use crate::observables::{harmonic_bracket_norm, WeylGenerator};

/// Relative tolerance for numeric `κ_V`.
pub const KAPPA_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Harmonic,
    Anharmonic,
    Multisite,
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(SweepMode::Harmonic),
            "anharmonic" => Ok(SweepMode::Anharmonic),
            "multisite" => Ok(SweepMode::Multisite),
            other => Err(Error::invalid(format!(
                "unknown sweep mode `{other}` (expected harmonic, anharmonic or multisite)"
            ))),
        }
    }
}

impl SweepMode {
    /// Name of the measured column.
    pub fn measured_label(self) -> &'static str {
        match self {
            SweepMode::Harmonic => "measured",
            SweepMode::Anharmonic | SweepMode::Multisite => "sampled_max",
        }
    }
}

/// One kernel-table row: the three kernels at one site and their decay margins.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub t: f64,
    pub site: Vec<i64>,
    /// `h^(-1)`, `h^(0)`, `h^(1)`.
    pub h: [f64; 3],
    /// Bound minus `|h|`, same order.
    pub margin: [f64; 3],
    pub pass: bool,
}

pub fn run_kernels(cfg: &ExperimentConfig) -> Result<Vec<KernelRow>> {
    let lat = cfg.lattice()?;
    let params = cfg.harmonic()?;
    let table = SpectralTable::new(&lat, &params)?;
    let per_time: Vec<Vec<KernelRow>> = cfg
        .times()
        .into_par_iter()
        .map(|t| {
            let ks = table.kernels(&lat, t)?;
            let report = kernel_decay_report_with(&lat, &params, &ks, cfg.mu)?;
            Ok(report
                .sites
                .iter()
                .map(|s| KernelRow {
                    t,
                    site: lat.site(s.site).to_vec(),
                    h: [ks.h_minus1[s.site], ks.h_0[s.site], ks.h_plus1[s.site]],
                    margin: s.kernels.map(|k| k.margin()),
                    pass: s.kernels.iter().all(|k| k.pass),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_time.into_iter().flatten().collect())
}

/// One sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub t: f64,
    pub d_xy: u64,
    /// `|Im⟨f_t, g⟩|` for harmonic runs, sampled max of the bracket otherwise.
    pub measured: f64,
    /// Envelope times `‖f‖_∞ ‖g‖_∞`.
    pub envelope: f64,
    pub margin: f64,
    pub pass: bool,
}

impl SweepRecord {
    fn new(t: f64, d_xy: u64, measured: f64, envelope: f64, abs_tol: f64) -> Self {
        let margin = envelope - measured;
        Self {
            t,
            d_xy,
            measured,
            envelope,
            margin,
            pass: margin >= -abs_tol,
        }
    }
}

fn require(cfg: &ExperimentConfig, kind: PotentialKind, mode: &str) -> Result<()> {
    if cfg.potential.kind != kind {
        return Err(Error::ConfigValidation {
            field: "potential.kind".into(),
            msg: format!("{mode} sweep needs potential.kind = {}", kind.as_str()),
        });
    }
    Ok(())
}

/// Largest `|{α_t(W(f)), W(g)}(x)|` over the sampled initial conditions, per time.
fn sampled_max(
    cfg: &ExperimentConfig,
    sys: &AnharmonicSystem,
    f: &WeylGenerator,
    g: &WeylGenerator,
    times: &[f64],
) -> Result<Vec<f64>> {
    let points = cfg.sampler()?.points(sys.len());
    let runs: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x0| {
            bracket_pointwise_schedule(sys, f, g, x0, times, cfg.dt, cfg.scheme)
                .map(|v| v.iter().map(|z| z.norm()).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..times.len())
        .map(|i| runs.iter().map(|r| r[i]).fold(0.0, f64::max))
        .collect())
}

pub fn run_sweep(cfg: &ExperimentConfig, mode: SweepMode) -> Result<Vec<SweepRecord>> {
    let lat = cfg.lattice()?;
    let params = cfg.harmonic()?;
    let (f, g) = cfg.generators(&lat)?;
    let (xs, ys) = (f.support(), g.support());
    let d_xy = lat
        .set_distance(&xs, &ys)
        .ok_or_else(|| Error::invalid("observables need nonempty supports"))?;
    let norms = f.sup_norm() * g.sup_norm();
    let times = cfg.times();
    match mode {
        SweepMode::Harmonic => times
            .par_iter()
            .map(|&t| {
                let measured = harmonic_bracket_norm(&lat, &params, &f, &g, t)?;
                let env =
                    harmonic_envelope(&lat, &params, &xs, &ys, t, cfg.mu, EnvelopeVariant::Weyl)?;
                Ok(SweepRecord::new(
                    t,
                    d_xy,
                    measured,
                    norms * env,
                    cfg.abs_tol,
                ))
            })
            .collect(),
        SweepMode::Anharmonic => {
            require(cfg, PotentialKind::GaussianSite, "anharmonic")?;
            let sys = cfg.system()?;
            let pot = GaussianSite::new(cfg.potential.amplitude, cfg.potential.width)?;
            let kappa = kappa_v(&pot, KAPPA_QUAD_TOL)?;
            let ep = EnvelopeParams::single_site(&params, lat.nu(), cfg.mu, cfg.epsilon, kappa)?;
            let measured = sampled_max(cfg, &sys, &f, &g, &times)?;
            times
                .iter()
                .zip(measured)
                .map(|(&t, m)| {
                    let env = anharmonic_envelope(&lat, &ep, &xs, &ys, t)?;
                    Ok(SweepRecord::new(t, d_xy, m, norms * env, cfg.abs_tol))
                })
                .collect()
        }
        SweepMode::Multisite => {
            require(cfg, PotentialKind::GaussianPair, "multisite")?;
            let sys = cfg.system()?;
            let constants = assumption_constants(&sys)?;
            let measured = sampled_max(cfg, &sys, &f, &g, &times)?;
            times
                .iter()
                .zip(measured)
                .map(|(&t, m)| {
                    let env =
                        multisite_envelope(&lat, &params, &constants, &xs, &ys, t, cfg.epsilon)?;
                    Ok(SweepRecord::new(t, d_xy, m, norms * env, cfg.abs_tol))
                })
                .collect()
        }
    }
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    write(&mut w).expect("writing to memory cannot fail");
    let bytes = w.into_inner().expect("flushing to memory cannot fail");
    String::from_utf8(bytes).expect("cells are ASCII")
}

/// Shortest decimal that round-trips to the same `f64`.
fn num(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

fn site_cell(site: &[i64]) -> String {
    site.iter()
        .map(i64::to_string)
        .collect::<Vec<_>>()
        .join(":")
}

pub fn kernels_csv(rows: &[KernelRow]) -> String {
    csv_string(|w| {
        w.write_record([
            "t",
            "x",
            "h_minus1",
            "h_0",
            "h_plus1",
            "margin_minus1",
            "margin_0",
            "margin_plus1",
        ])?;
        for r in rows {
            let mut rec = vec![num(r.t), site_cell(&r.site)];
            rec.extend(r.h.iter().chain(&r.margin).map(|&v| num(v)));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

fn sweep_header(mode: SweepMode) -> [&'static str; 6] {
    [
        "t",
        "d_XY",
        mode.measured_label(),
        "envelope",
        "margin",
        "pass",
    ]
}

pub fn sweep_csv(mode: SweepMode, rows: &[SweepRecord]) -> String {
    csv_string(|w| {
        w.write_record(sweep_header(mode))?;
        for r in rows {
            w.write_record([
                num(r.t),
                r.d_xy.to_string(),
                num(r.measured),
                num(r.envelope),
                num(r.margin),
                r.pass.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Header plus a single diagnostic row recording where the integration diverged.
pub fn divergence_csv(mode: SweepMode, time: f64) -> String {
    csv_string(|w| {
        w.write_record(sweep_header(mode))?;
        w.write_record([&num(time), "nan", "nan", "nan", "nan", "diverged"])
    })
}

/// One line of the constants table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsEntry {
    pub name: &'static str,
    pub formula: &'static str,
    /// `None` when the quantity is not finite for this configuration.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub entries: Vec<BoundsEntry>,
}

impl BoundsReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .and_then(|e| e.value)
    }

    pub fn to_text(&self) -> String {
        let width = self.entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for e in &self.entries {
            let value = e.value.map_or("none".to_string(), |v| v.to_string());
            let _ = writeln!(out, "{:width$} = {value}    [{}]", e.name, e.formula);
        }
        out
    }
}

pub fn run_bounds(cfg: &ExperimentConfig) -> Result<BoundsReport> {
    let params = cfg.harmonic()?;
    let nu = cfg.nu;
    let c = params.coupling_constant();
    let opt = optimal_mu();
    let cnu = default_convolution_constant(nu)?;
    let kappa = match cfg.potential.kind {
        PotentialKind::GaussianSite => kappa_v(
            &GaussianSite::new(cfg.potential.amplitude, cfg.potential.width)?,
            KAPPA_QUAD_TOL,
        )?,
        _ => 0.0,
    };
    let ep = EnvelopeParams::single_site(&params, nu, cfg.mu, cfg.epsilon, kappa)?;
    let entry = |name, formula, value| BoundsEntry {
        name,
        formula,
        value: Some(value),
    };
    let mut entries = vec![
        entry("c", "sqrt(omega^2 + 4 sum_j lambda_j)", c),
        entry(
            "v_h(mu)",
            "c max(2/mu, e^(mu/2 + 1))",
            harmonic_velocity(cfg.mu, &params)?,
        ),
        entry("mu0", "root of 2/mu = e^(mu/2 + 1) on [1/2, 1]", opt.mu0),
        entry("v_h(mu0)", "2c/mu0", c * opt.v_opt_factor),
        entry("kappa_V", "int |r| |V'^(r)| dr", kappa),
        entry("C_nu", "2^(nu+1) sum_z (1 + |z|)^-(nu+1)", cnu),
        entry(
            "C",
            "(1 + c e^((mu+eps)/2) + 1/c) sup_s (1+s)^(nu+1) e^(-eps s)",
            ep.prefactor(nu)?,
        ),
        entry(
            "delta",
            "(mu+eps) v_h(mu+eps) + C C_nu kappa_V",
            ep.delta_single(nu)?,
        ),
        entry(
            "v_ah",
            "(1 + eps/mu) v_h(mu+eps) + C C_nu kappa_V / mu",
            anharmonic_velocity(
                cfg.mu,
                cfg.epsilon,
                &params,
                nu,
                kappa,
                VelocityMode::SingleSite,
            )?,
        ),
    ];
    if cfg.potential.kind == PotentialKind::GaussianPair {
        let constants = assumption_constants(&cfg.system()?)?;
        let ms = EnvelopeParams::multi_site(&params, nu, &constants, cfg.epsilon)?;
        entries.push(entry("C3", "certified pair constant", constants.c3));
        entries.push(entry("mu3", "pair weight rate", constants.mu3));
        entries.push(entry(
            "delta_ms",
            "(mu3+eps) v_h(mu3+eps) + C C3 C_nu^2",
            ms.delta_multi(nu)?,
        ));
        let v = match anharmonic_velocity(
            constants.mu3,
            cfg.epsilon,
            &params,
            nu,
            constants.c3,
            VelocityMode::MultiSite,
        ) {
            Ok(v) => Some(v),
            Err(Error::NoFiniteVelocity(_)) => None,
            Err(e) => return Err(e),
        };
        entries.push(BoundsEntry {
            name: "v_ah_ms",
            formula: "(1 + eps/mu3) v_h(mu3+eps) + C C3 C_nu^2 / mu3",
            value: v,
        });
    }
    Ok(BoundsReport { entries })
}
