//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment. Keys are dotted
//! `section.name` pairs; every key the program understands is listed in
//! [`KEYS`] with its default.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use mobch::attractor::{EnsembleConfig, Metric};
use mobch::prelude::{FaceAverage, Grid, GridFunction, MobilitySpec, PotentialSpec, RegularizedPotential, SimConfig};
#[cfg(test)]
use mobch::prelude::PotentialKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: `{key}`: {reason}")]
    Parse { line: usize, key: String, reason: String },
    #[error("line {line}: unknown key `{key}`{hint}")]
    UnknownKey { line: usize, key: String, hint: String },
    #[error("missing required key `{key}`")]
    MissingRequired { key: &'static str },
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] mobch::Error),
}

/// Every accepted key with its documented default (`None` when required).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("grid.dim", None),
    ("grid.n", None),
    ("grid.extent", Some("2π")),
    ("potential.kind", None),
    ("potential.lambda", Some("1 (double_well, polynomial), lambda_log (logarithmic)")),
    ("potential.p", Some("4")),
    ("potential.K_W", Some("eta")),
    ("potential.eta", Some("3")),
    ("potential.lambda_log", Some("3")),
    ("mobility.kind", Some("sine")),
    ("mobility.value", Some("1")),
    ("mobility.base", Some("2")),
    ("mobility.amplitude", Some("1")),
    ("mobility.frequency", Some("1")),
    ("mobility.face_average", Some("arithmetic")),
    ("sim.epsilon", Some("0")),
    ("sim.vanishing_viscosity", Some("false")),
    ("sim.yosida_n", Some("10000")),
    ("sim.dt", None),
    ("sim.t_end", None),
    ("sim.newton_tol", Some("1e-10")),
    ("sim.newton_max_iter", Some("50")),
    ("sim.m", Some("0.9")),
    ("sim.snapshot_every", Some("1")),
    ("sim.f", Some("0")),
    ("initial.kind", Some("cosine")),
    ("initial.mean", Some("0")),
    ("initial.amplitude", Some("0.01")),
    ("initial.mode", Some("1")),
    ("initial.path", None),
    ("ensemble.count", Some("20")),
    ("ensemble.radius", Some("2")),
    ("ensemble.mean_band", Some("0.3")),
    ("ensemble.seed", Some("2024")),
    ("ensemble.sample_times", Some("10, 20, 40")),
    ("ensemble.modes", Some("8")),
    ("ensemble.metric", Some("energy_space")),
    ("diagnose.c_bound", None),
    ("diagnose.window", Some("0.1")),
];

/// How the initial datum of `run` is built.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Constant(f64),
    /// `mean + amplitude · Π cos(mode π x_i / L)` over the grid directions.
    Cosine { mean: f64, amplitude: f64, mode: usize },
    /// A snapshot file, relative to the config file.
    Snapshot(PathBuf),
}

#[derive(Debug, Clone)]
pub struct Diagnose {
    pub c_bound: Option<f64>,
    pub window: f64,
}

#[derive(Debug, Clone)]
pub struct RootConfig {
    pub grid: Grid,
    pub potential: PotentialSpec,
    pub mobility: MobilitySpec,
    pub sim: SimConfig,
    pub initial: Initial,
    pub ensemble: EnsembleConfig,
    pub diagnose: Diagnose,
}

impl RootConfig {
    pub fn regularized(&self) -> Result<RegularizedPotential, ConfigError> {
        Ok(RegularizedPotential::new(self.potential, self.sim.yosida_n)?)
    }

    pub fn initial_datum(&self) -> Result<GridFunction, ConfigError> {
        let grid = self.grid;
        Ok(match &self.initial {
            Initial::Constant(c) => GridFunction::constant(grid, *c),
            &Initial::Cosine { mean, amplitude, mode } => {
                let k = mode as f64 * PI / grid.extent();
                GridFunction::from_fn(grid, |[x, y]| {
                    let shape = if grid.dim() == 2 { (k * x).cos() * (k * y).cos() } else { (k * x).cos() };
                    mean + amplitude * shape
                })
            }
            Initial::Snapshot(path) => {
                let file = fs::File::open(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                let (u, _) = mobch::snapshot::read_snapshot(std::io::BufReader::new(file))?;
                if !u.grid().compatible(&grid) {
                    return Err(mobch::Error::GridMismatch.into());
                }
                u
            }
        })
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Raw {
    entries: BTreeMap<String, Entry>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    key: content.to_string(),
                    reason: "expected `key = value`".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                    hint: hint_for(key),
                });
            }
            if let Some(first) = entries.get(key) {
                return Err(ConfigError::Parse {
                    line,
                    key: key.to_string(),
                    reason: format!("already set on line {}", first.line),
                });
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(Self { entries })
    }

    fn text(&self, key: &'static str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|e| (e.value.as_str(), e.line))
    }

    fn get<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.text(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| ConfigError::Parse {
                line,
                key: key.into(),
                reason: format!("cannot parse `{v}`: {e}"),
            }),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or(ConfigError::MissingRequired { key })
    }

    fn choice(&self, key: &'static str, default: &'static str, variants: &[&str]) -> Result<String, ConfigError> {
        let (v, line) = match self.text(key) {
            Some(found) => found,
            None if default.is_empty() => return Err(ConfigError::MissingRequired { key }),
            None => (default, 0),
        };
        if variants.contains(&v) {
            Ok(v.to_string())
        } else {
            Err(ConfigError::Parse {
                line,
                key: key.into(),
                reason: format!("unknown value `{v}`, expected one of {}", variants.join(", ")),
            })
        }
    }

    /// Library validation errors for `key`, tagged with its line.
    fn check<T>(&self, key: &'static str, r: mobch::Result<T>) -> Result<T, ConfigError> {
        r.map_err(|e| match self.text(key) {
            Some((_, line)) => ConfigError::Parse {
                line,
                key: key.into(),
                reason: e.to_string(),
            },
            None => e.into(),
        })
    }
}

fn hint_for(key: &str) -> String {
    let section = key.split('.').next().unwrap_or("");
    let known: Vec<&str> = KEYS
        .iter()
        .map(|(k, _)| *k)
        .filter(|k| k.split('.').next() == Some(section))
        .collect();
    if known.is_empty() {
        let sections: Vec<&str> = {
            let mut s: Vec<&str> = KEYS.iter().filter_map(|(k, _)| k.split('.').next()).collect();
            s.dedup();
            s
        };
        format!("; known sections are {}", sections.join(", "))
    } else {
        format!("; known keys in `{section}` are {}", known.join(", "))
    }
}

fn parse_bool(raw: &Raw, key: &'static str, default: bool) -> Result<bool, ConfigError> {
    match raw.text(key) {
        None => Ok(default),
        Some(("true", _)) => Ok(true),
        Some(("false", _)) => Ok(false),
        Some((v, line)) => Err(ConfigError::Parse {
            line,
            key: key.into(),
            reason: format!("expected true or false, got `{v}`"),
        }),
    }
}

fn parse_times(raw: &Raw, key: &'static str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
    let Some((v, line)) = raw.text(key) else {
        return Ok(default.to_vec());
    };
    v.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| ConfigError::Parse {
                line,
                key: key.into(),
                reason: format!("cannot parse `{}`: {e}", s.trim()),
            })
        })
        .collect()
}

/// The `sim.*` key a validation message is about.
fn sim_key(msg: &str) -> &'static str {
    let msg = msg.trim_start_matches("invalid parameter: ");
    [
        ("ε", "sim.epsilon"),
        ("dt", "sim.dt"),
        ("t_end", "sim.t_end"),
        ("newton_tol", "sim.newton_tol"),
        ("newton_max_iter", "sim.newton_max_iter"),
        ("m ", "sim.m"),
        ("singular", "sim.m"),
    ]
    .into_iter()
    .find(|(prefix, _)| msg.starts_with(prefix))
    .map_or("sim.dt", |(_, key)| key)
}

fn potential_section(raw: &Raw) -> Result<PotentialSpec, ConfigError> {
    let kind = raw.choice("potential.kind", "", &["double_well", "polynomial", "logarithmic"])?;
    Ok(match kind.as_str() {
        "double_well" => raw.check("potential.lambda", PotentialSpec::double_well_with_lambda(raw.or("potential.lambda", 1.0)?))?,
        "polynomial" => {
            let eta = raw.or("potential.eta", 3.0)?;
            raw.check(
                "potential.p",
                PotentialSpec::polynomial(
                    raw.or("potential.p", 4.0)?,
                    raw.or("potential.K_W", eta)?,
                    eta,
                    raw.or("potential.lambda", 1.0)?,
                ),
            )?
        }
        _ => {
            let lambda_log = raw.or("potential.lambda_log", 3.0)?;
            raw.check(
                "potential.lambda_log",
                PotentialSpec::logarithmic_with_lambda(lambda_log, raw.or("potential.lambda", lambda_log)?),
            )?
        }
    })
}

/// Only the potential section and `sim.yosida_n`, for tables of `W` and
/// its regularization. Other sections may be present but are not needed.
pub fn parse_potential_config(path: &Path) -> Result<(PotentialSpec, u64), ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let raw = Raw::parse(&text)?;
    Ok((potential_section(&raw)?, raw.or("sim.yosida_n", 10_000)?))
}

pub fn parse_config(path: &Path) -> Result<RootConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parse config text; relative paths inside resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RootConfig, ConfigError> {
    let raw = Raw::parse(text)?;

    let dim: usize = raw.required("grid.dim")?;
    let n: usize = raw.required("grid.n")?;
    let extent: f64 = raw.or("grid.extent", 2.0 * PI)?;
    let grid = raw.check("grid.dim", Grid::new(dim, n, extent))?;

    let potential = potential_section(&raw)?;

    let mobility = match raw.choice("mobility.kind", "sine", &["constant", "sine"])?.as_str() {
        "constant" => raw.check("mobility.value", MobilitySpec::constant(raw.or("mobility.value", 1.0)?))?,
        _ => raw.check(
            "mobility.base",
            MobilitySpec::sine(
                raw.or("mobility.base", 2.0)?,
                raw.or("mobility.amplitude", 1.0)?,
                raw.or("mobility.frequency", 1.0)?,
            ),
        )?,
    };
    let face = match raw
        .choice("mobility.face_average", "arithmetic", &["arithmetic", "harmonic"])?
        .as_str()
    {
        "harmonic" => FaceAverage::Harmonic,
        _ => FaceAverage::Arithmetic,
    };
    let mobility = mobility.with_face_average(face);

    let mut sim = SimConfig::new(grid, raw.required("sim.dt")?, raw.required("sim.t_end")?);
    sim.epsilon = raw.or("sim.epsilon", sim.epsilon)?;
    sim.vanishing_viscosity = parse_bool(&raw, "sim.vanishing_viscosity", false)?;
    sim.yosida_n = raw.or("sim.yosida_n", sim.yosida_n)?;
    sim.newton_tol = raw.or("sim.newton_tol", sim.newton_tol)?;
    sim.newton_max_iter = raw.or("sim.newton_max_iter", sim.newton_max_iter)?;
    sim.m = raw.or("sim.m", sim.m)?;
    sim.snapshot_every = raw.or("sim.snapshot_every", sim.snapshot_every)?;
    sim.f = GridFunction::constant(grid, raw.or("sim.f", 0.0)?);
    if let Err(e) = sim.validate(&potential) {
        return Err(raw.check(sim_key(&e.to_string()), Err::<(), _>(e)).unwrap_err());
    }

    let initial = match raw
        .choice("initial.kind", "cosine", &["constant", "cosine", "snapshot"])?
        .as_str()
    {
        "constant" => Initial::Constant(raw.or("initial.mean", 0.0)?),
        "cosine" => Initial::Cosine {
            mean: raw.or("initial.mean", 0.0)?,
            amplitude: raw.or("initial.amplitude", 0.01)?,
            mode: raw.or("initial.mode", 1)?,
        },
        _ => Initial::Snapshot(base_dir.join(raw.required::<String>("initial.path")?)),
    };

    let mut ensemble = EnsembleConfig::new(
        sim.clone(),
        raw.or("ensemble.count", 20)?,
        raw.or("ensemble.radius", 2.0)?,
        raw.or("ensemble.mean_band", 0.3)?,
        raw.or("ensemble.seed", 2024)?,
        parse_times(&raw, "ensemble.sample_times", &[10.0, 20.0, 40.0])?,
    );
    ensemble.modes = raw.or("ensemble.modes", ensemble.modes)?;
    ensemble.metric = match raw
        .choice("ensemble.metric", "energy_space", &["energy_space", "l2"])?
        .as_str()
    {
        "l2" => Metric::L2,
        _ => Metric::EnergySpace,
    };
    raw.check("ensemble.count", ensemble.validate())?;

    let diagnose = Diagnose {
        c_bound: raw.get("diagnose.c_bound")?,
        window: raw.or("diagnose.window", 0.1)?,
    };

    Ok(RootConfig {
        grid,
        potential,
        mobility,
        sim,
        initial,
        ensemble,
        diagnose,
    })
}
