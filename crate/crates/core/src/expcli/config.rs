//! Plain-text experiment configuration.
//!
//! One `section.key = value` per line; `#` starts a comment; lists are
//! comma separated. Sites are written as colon-separated coordinates
//! (`0`, `2:-1`), complex values as `1`, `2i`, `1.5-0.5i`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::anharmonic::{AnharmonicSystem, GaussianSite, PairPotential, Scheme};
use crate::error::{Error, Result};
use crate::harmonic::HarmonicParams;
use crate::lattice::TorusLattice;
use crate::observables::{Sampler, WeylGenerator};

const KEYS: &[&str] = &[
    "lattice.nu",
    "lattice.L",
    "harmonic.omega",
    "harmonic.lambda",
    "potential.kind",
    "potential.amplitude",
    "potential.width",
    "potential.weight_mu",
    "observables.f_sites",
    "observables.f_values",
    "observables.g_sites",
    "observables.g_values",
    "schedule.t_min",
    "schedule.t_max",
    "schedule.t_steps",
    "rates.mu",
    "rates.epsilon",
    "integrator.dt",
    "integrator.scheme",
    "sampling.count",
    "sampling.amplitude",
    "sampling.seed",
    "output.path",
    "check.abs_tol",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    None,
    GaussianSite,
    GaussianPair,
}

impl PotentialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PotentialKind::None => "none",
            PotentialKind::GaussianSite => "gaussian_site",
            PotentialKind::GaussianPair => "gaussian_pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    pub amplitude: f64,
    pub width: f64,
    pub weight_mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableConfig {
    pub f: Vec<(Vec<i64>, Complex64)>,
    pub g: Vec<(Vec<i64>, Complex64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
}

impl Schedule {
    /// `t_i = t_min + i (t_max - t_min) / (t_steps - 1)`.
    pub fn times(&self) -> Vec<f64> {
        if self.t_steps == 1 {
            return vec![self.t_min];
        }
        let span = self.t_max - self.t_min;
        let last = (self.t_steps - 1) as f64;
        (0..self.t_steps)
            .map(|i| {
                if i + 1 == self.t_steps {
                    self.t_max
                } else {
                    self.t_min + span * i as f64 / last
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nu: usize,
    pub half_side: i64,
    pub omega: f64,
    pub lambda: Vec<f64>,
    pub potential: PotentialConfig,
    pub observables: ObservableConfig,
    pub schedule: Schedule,
    pub mu: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub sample_count: usize,
    pub sample_amplitude: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub abs_tol: f64,
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn raw_pairs(text: &str) -> Result<BTreeMap<&'static str, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: line_no,
            msg: format!("expected `section.key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let known = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| Error::ConfigParse {
                line: line_no,
                msg: format!("unknown key `{key}`"),
            })?;
        let value = value.trim();
        if value.is_empty() {
            return Err(Error::ConfigParse {
                line: line_no,
                msg: format!("empty value for `{key}`"),
            });
        }
        if out.insert(*known, (line_no, value.to_string())).is_some() {
            return Err(Error::ConfigParse {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

/// Typed access to the raw key/value map with parse errors carrying line numbers.
struct Fields(BTreeMap<&'static str, (usize, String)>);

impl Fields {
    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::ConfigParse {
                line: *line,
                msg: format!("cannot parse `{v}` for `{key}`"),
            }),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.0.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse().map_err(|_| Error::ConfigParse {
                    line: *line,
                    msg: format!("cannot parse list entry `{s}` for `{key}`"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn sites(&self, key: &str) -> Result<Option<Vec<Vec<i64>>>> {
        let Some(raw) = self.list::<String>(key)? else {
            return Ok(None);
        };
        let line = self.0[key].0;
        raw.iter()
            .map(|s| {
                s.split(':')
                    .map(|c| {
                        c.trim().parse::<i64>().map_err(|_| Error::ConfigParse {
                            line,
                            msg: format!("cannot parse site `{s}` for `{key}`"),
                        })
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

fn invalid(field: &str, msg: impl Into<String>) -> Error {
    Error::ConfigValidation {
        field: field.to_string(),
        msg: msg.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {v}")))
    }
}

fn observable(
    fields: &Fields,
    name: &str,
    nu: usize,
    half_side: i64,
    default: Vec<(Vec<i64>, Complex64)>,
) -> Result<Vec<(Vec<i64>, Complex64)>> {
    let sites_key = format!("observables.{name}_sites");
    let values_key = format!("observables.{name}_values");
    let sites = fields.sites(&sites_key)?;
    let values = fields.list::<Complex64>(&values_key)?;
    let entries = match (sites, values) {
        (None, None) => default,
        (Some(s), Some(v)) => {
            if s.len() != v.len() {
                return Err(invalid(
                    &values_key,
                    format!("{} values for {} sites", v.len(), s.len()),
                ));
            }
            s.into_iter().zip(v).collect()
        }
        (Some(_), None) => return Err(invalid(&values_key, "missing (sites given)")),
        (None, Some(_)) => return Err(invalid(&sites_key, "missing (values given)")),
    };
    for (i, (site, value)) in entries.iter().enumerate() {
        if site.len() != nu {
            return Err(invalid(
                &sites_key,
                format!(
                    "site {} has {} coordinates, expected {nu}",
                    i + 1,
                    site.len()
                ),
            ));
        }
        if site.iter().any(|&c| c <= -half_side || c > half_side) {
            return Err(invalid(
                &sites_key,
                format!(
                    "site {} lies outside (-{half_side}, {half_side}]^{nu}",
                    i + 1
                ),
            ));
        }
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(invalid(
                &values_key,
                format!("value {} is not finite", i + 1),
            ));
        }
        if entries[..i].iter().any(|(s, _)| s == site) {
            return Err(invalid(&sites_key, format!("site {} listed twice", i + 1)));
        }
    }
    Ok(entries)
}

/// Parses and validates configuration text, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let fields = Fields(raw_pairs(text)?);
    if !fields.0.contains_key("lattice.nu") {
        return Err(invalid("lattice.nu", "required"));
    }
    if !fields.0.contains_key("lattice.L") {
        return Err(invalid("lattice.L", "required"));
    }
    let nu: usize = fields.get("lattice.nu", 1)?;
    if !(1..=6).contains(&nu) {
        return Err(invalid("lattice.nu", format!("must be in 1..=6, got {nu}")));
    }
    let half_side: i64 = fields.get("lattice.L", 1)?;
    if half_side < 1 {
        return Err(invalid(
            "lattice.L",
            format!("must be >= 1, got {half_side}"),
        ));
    }
    let sites = (2 * half_side as u128).checked_pow(nu as u32);
    if sites.is_none_or(|n| n > 1 << 20) {
        return Err(invalid("lattice.L", "lattice exceeds 2^20 sites"));
    }
    if !fields.0.contains_key("harmonic.omega") {
        return Err(invalid("harmonic.omega", "required"));
    }
    let omega = nonnegative("harmonic.omega", fields.get("harmonic.omega", 0.0)?)?;
    let lambda = fields
        .list::<f64>("harmonic.lambda")?
        .ok_or_else(|| invalid("harmonic.lambda", "required"))?;
    if lambda.len() != nu {
        return Err(invalid(
            "harmonic.lambda",
            format!("expected {nu} entries, got {}", lambda.len()),
        ));
    }
    for &l in &lambda {
        nonnegative("harmonic.lambda", l)?;
    }
    if omega == 0.0 && lambda.iter().all(|&l| l == 0.0) {
        return Err(invalid("harmonic", "omega and lambda cannot all vanish"));
    }

    let kind = match fields
        .get::<String>("potential.kind", "none".into())?
        .as_str()
    {
        "none" => PotentialKind::None,
        "gaussian_site" => PotentialKind::GaussianSite,
        "gaussian_pair" => PotentialKind::GaussianPair,
        other => {
            return Err(invalid(
                "potential.kind",
                format!("expected none, gaussian_site or gaussian_pair, got `{other}`"),
            ))
        }
    };
    let amplitude: f64 = fields.get("potential.amplitude", 1.0)?;
    if !amplitude.is_finite() {
        return Err(invalid("potential.amplitude", "must be finite"));
    }
    let potential = PotentialConfig {
        kind,
        amplitude,
        width: positive("potential.width", fields.get("potential.width", 1.0)?)?,
        weight_mu: nonnegative(
            "potential.weight_mu",
            fields.get("potential.weight_mu", 1.0)?,
        )?,
    };

    let origin = vec![0; nu];
    let mut neighbor = origin.clone();
    neighbor[0] = 1;
    let one = Complex64::new(1.0, 0.0);
    let observables = ObservableConfig {
        f: observable(&fields, "f", nu, half_side, vec![(origin, one)])?,
        g: observable(&fields, "g", nu, half_side, vec![(neighbor, one)])?,
    };

    let t_min: f64 = fields.get("schedule.t_min", 0.0)?;
    let t_max: f64 = fields.get("schedule.t_max", 1.0)?;
    let t_steps: usize = fields.get("schedule.t_steps", 11)?;
    if !t_min.is_finite() {
        return Err(invalid("schedule.t_min", "must be finite"));
    }
    if !t_max.is_finite() {
        return Err(invalid("schedule.t_max", "must be finite"));
    }
    if t_steps < 1 {
        return Err(invalid("schedule.t_steps", "must be >= 1"));
    }
    if t_steps > 1 && !(t_max > t_min) {
        return Err(invalid(
            "schedule.t_max",
            "must exceed t_min when t_steps > 1",
        ));
    }
    if t_steps == 1 && t_max != t_min {
        return Err(invalid(
            "schedule.t_max",
            "must equal t_min when t_steps = 1",
        ));
    }

    let scheme: Scheme = match fields.0.get("integrator.scheme") {
        None => Scheme::Leapfrog,
        Some((_, v)) => v
            .parse()
            .map_err(|e: Error| invalid("integrator.scheme", e.to_string()))?,
    };
    let sample_count: usize = fields.get("sampling.count", 50)?;
    if sample_count < 1 {
        return Err(invalid("sampling.count", "must be >= 1"));
    }

    Ok(ExperimentConfig {
        nu,
        half_side,
        omega,
        lambda,
        potential,
        observables,
        schedule: Schedule {
            t_min,
            t_max,
            t_steps,
        },
        mu: positive("rates.mu", fields.get("rates.mu", 1.0)?)?,
        epsilon: positive("rates.epsilon", fields.get("rates.epsilon", 0.5)?)?,
        dt: positive("integrator.dt", fields.get("integrator.dt", 1e-4)?)?,
        scheme,
        sample_count,
        sample_amplitude: nonnegative(
            "sampling.amplitude",
            fields.get("sampling.amplitude", 5.0)?,
        )?,
        seed: fields.get("sampling.seed", 0)?,
        output: fields
            .0
            .get("output.path")
            .filter(|(_, v)| v != "-")
            .map(|(_, v)| PathBuf::from(v)),
        abs_tol: nonnegative("check.abs_tol", fields.get("check.abs_tol", 1e-9)?)?,
    })
}

fn site_str(site: &[i64]) -> String {
    site.iter()
        .map(i64::to_string)
        .collect::<Vec<_>>()
        .join(":")
}

fn complex_str(z: Complex64) -> String {
    if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn list_str<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn lattice(&self) -> Result<TorusLattice> {
        TorusLattice::new(self.nu, self.half_side)
    }

    pub fn harmonic(&self) -> Result<HarmonicParams> {
        HarmonicParams::new(self.omega, self.lambda.clone())
    }

    pub fn times(&self) -> Vec<f64> {
        self.schedule.times()
    }

    pub fn sampler(&self) -> Result<Sampler> {
        Sampler::new(self.sample_count, self.seed, self.sample_amplitude)
    }

    /// The observable generators `f` and `g` on `lat`.
    pub fn generators(&self, lat: &TorusLattice) -> Result<(WeylGenerator, WeylGenerator)> {
        Ok((
            WeylGenerator::from_sites(lat, &self.observables.f)?,
            WeylGenerator::from_sites(lat, &self.observables.g)?,
        ))
    }

    /// The full Hamiltonian with the configured potential.
    pub fn system(&self) -> Result<AnharmonicSystem> {
        let sys = AnharmonicSystem::new(self.lattice()?, self.harmonic()?)?;
        let p = &self.potential;
        Ok(match p.kind {
            PotentialKind::None => sys,
            PotentialKind::GaussianSite => sys.with_site(GaussianSite::new(p.amplitude, p.width)?),
            PotentialKind::GaussianPair => {
                sys.with_pair(PairPotential::new(p.amplitude, p.width, p.weight_mu)?)
            }
        })
    }

    /// Every setting, defaults included, as `key = value` lines.
    pub fn echo(&self) -> String {
        let p = &self.potential;
        let o = &self.observables;
        let s = &self.schedule;
        let entries: Vec<(&str, String)> = vec![
            ("lattice.nu", self.nu.to_string()),
            ("lattice.L", self.half_side.to_string()),
            ("harmonic.omega", self.omega.to_string()),
            ("harmonic.lambda", list_str(&self.lambda, f64::to_string)),
            ("potential.kind", p.kind.as_str().into()),
            ("potential.amplitude", p.amplitude.to_string()),
            ("potential.width", p.width.to_string()),
            ("potential.weight_mu", p.weight_mu.to_string()),
            ("observables.f_sites", list_str(&o.f, |e| site_str(&e.0))),
            ("observables.f_values", list_str(&o.f, |e| complex_str(e.1))),
            ("observables.g_sites", list_str(&o.g, |e| site_str(&e.0))),
            ("observables.g_values", list_str(&o.g, |e| complex_str(e.1))),
            ("schedule.t_min", s.t_min.to_string()),
            ("schedule.t_max", s.t_max.to_string()),
            ("schedule.t_steps", s.t_steps.to_string()),
            ("rates.mu", self.mu.to_string()),
            ("rates.epsilon", self.epsilon.to_string()),
            ("integrator.dt", self.dt.to_string()),
            ("integrator.scheme", self.scheme.to_string()),
            ("sampling.count", self.sample_count.to_string()),
            ("sampling.amplitude", self.sample_amplitude.to_string()),
            ("sampling.seed", self.seed.to_string()),
            (
                "output.path",
                self.output
                    .as_ref()
                    .map_or("-".into(), |p| p.display().to_string()),
            ),
            ("check.abs_tol", self.abs_tol.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}
