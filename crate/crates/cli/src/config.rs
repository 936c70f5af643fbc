//! Experiment configuration.
//!
//! One TOML file drives every subcommand. Only `schema_version` and `[map]`
//! are required; every other section falls back to the defaults below.
//!
//! ```toml
//! schema_version = 1
//!
//! [map]
//! builtin = "ulam"          # doubling | ulam | cusp
//! # gamma = 0.75            # cusp exponent
//! # file = "maps/mine.toml" # instead of builtin, relative to this file
//!
//! [output]
//! dir = "out/ulam"        # relative to the working directory
//!
//! [inducing]
//! delta = 0.05
//! q0 = 10
//! tau_max = 60
//!
//! [operator]
//! k = 4096
//!
//! [stats]
//! observable = "x"
//! n_orbits = 20000
//! horizon = 10000
//! ```

use std::path::{Path, PathBuf};

use ergolab::inducing::SchemeParams;
use ergolab::map_model::mapfile::{line_of, parse_map};
use ergolab::map_model::{builtin_map, BuiltinParams};
use ergolab::{Observable, PiecewiseMap};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}, line {line}: {message}")]
    Invalid { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("map file {path}: {source}")]
    Map { path: String, source: ergolab::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub map: MapSpec,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub inducing: InducingConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub builtin: Option<String>,
    pub gamma: Option<f64>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Radius of the one-sided neighbourhoods.
    pub delta: f64,
    pub order_samples: usize,
    pub expansion_horizon: usize,
    pub expansion_orbits: usize,
    pub orbit_horizon: usize,
    /// Exponent in the summability series.
    pub p: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            order_samples: 64,
            expansion_horizon: 40,
            expansion_orbits: 2000,
            orbit_horizon: 50,
            p: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InducingConfig {
    pub delta: f64,
    pub q0: usize,
    pub tau_max: usize,
    pub refine_tol: f64,
    pub theta: f64,
}

impl Default for InducingConfig {
    fn default() -> Self {
        let p = SchemeParams::default();
        Self { delta: p.delta, q0: p.q0, tau_max: p.tau_max, refine_tol: p.refine_tol, theta: p.theta }
    }
}

impl InducingConfig {
    pub fn params(&self) -> SchemeParams {
        SchemeParams {
            delta: self.delta,
            q0: self.q0,
            tau_max: self.tau_max,
            refine_tol: self.refine_tol,
            theta: self.theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorConfig {
    /// Grid of the Ulam matrix of `f`.
    pub k: usize,
    pub n_eigs: usize,
    /// Grid of the induced operators.
    pub k_scheme: usize,
    /// Angles of the renewal check `z = e^{iθ}`.
    pub thetas: Vec<f64>,
    pub singular_tol: f64,
    pub pushdown_k: usize,
    pub pushdown_budget: usize,
    /// Twist parameters for `L_t`.
    pub twists: Vec<f64>,
    /// Largest `k` for which the matrix is exported as triplets.
    pub export_limit: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            k: 4096,
            n_eigs: 6,
            k_scheme: 256,
            thetas: vec![0.5, 1.0, 2.0, 3.0],
            singular_tol: 0.01,
            pushdown_k: 2048,
            pushdown_budget: 200_000,
            twists: vec![0.0, 0.01, 0.1, 1.0],
            export_limit: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub observable: String,
    /// `∫ φ dμ` when known; estimated from the ensemble otherwise.
    pub mean: Option<f64>,
    pub n_orbits: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Largest lag in the Green–Kubo sum.
    pub n_max: usize,
    pub gk_horizon: usize,
    pub ks_threshold: f64,
    pub decay_observable: String,
    pub decay_n_max: usize,
    pub decay_horizon: usize,
    pub fit_r2: f64,
    pub envelope_q: f64,
    pub envelope_delta: f64,
    pub eps: Vec<f64>,
    pub ld_n: Vec<usize>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            observable: "x".into(),
            mean: None,
            n_orbits: 20_000,
            horizon: 10_000,
            burn_in: 1_000,
            seed: 1,
            n_max: 30,
            gk_horizon: 2_000,
            ks_threshold: 0.05,
            decay_observable: "indicator(0,0.75)".into(),
            decay_n_max: 20,
            decay_horizon: 10_000,
            fit_r2: 0.9,
            envelope_q: 2.0,
            envelope_delta: 0.5,
            eps: vec![0.1],
            ld_n: (1..=10).map(|i| 100 * i).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("ergolab-out") }
    }
}

/// A parsed and validated configuration with its map resolved.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub map: PiecewiseMap,
    pub path: PathBuf,
}

impl Loaded {
    pub fn builtin(&self) -> Option<&str> {
        if self.config.map.file.is_some() {
            None
        } else {
            self.config.map.builtin.as_deref()
        }
    }
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse(&text, path)
}

/// Parse `text`; `path` names the file in diagnostics and anchors a
/// relative map file.
pub fn parse(text: &str, path: &Path) -> Result<Loaded, ConfigError> {
    let name = path.display().to_string();
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid {
        path: name.clone(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let invalid = |section: &str, key: &str, message: String| ConfigError::Invalid {
        path: name.clone(),
        line: key_line(text, section, key),
        message,
    };
    if config.schema_version != SCHEMA_VERSION {
        return Err(invalid(
            "",
            "schema_version",
            format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", config.schema_version),
        ));
    }
    if let Some((section, key, message)) = config.first_violation() {
        return Err(invalid(section, key, message));
    }
    let map = resolve_map(&config.map, path).map_err(|e| match e {
        Resolve::Field(key, message) => invalid("map", key, message),
        Resolve::Map(file, source) => ConfigError::Map { path: file.display().to_string(), source },
    })?;
    Ok(Loaded { config, map, path: path.to_path_buf() })
}

enum Resolve {
    Field(&'static str, String),
    Map(PathBuf, ergolab::Error),
}

fn resolve_map(spec: &MapSpec, config_path: &Path) -> Result<PiecewiseMap, Resolve> {
    match (&spec.builtin, &spec.file) {
        (Some(_), Some(_)) => Err(Resolve::Field("file", "give either `builtin` or `file`, not both".into())),
        (None, None) => Err(Resolve::Field("builtin", "the map needs `builtin` or `file`".into())),
        (Some(name), None) => {
            let mut params = BuiltinParams::default();
            if let Some(g) = spec.gamma {
                params.gamma = g;
            }
            builtin_map(name, &params).map_err(|e| {
                let key = if matches!(e, ergolab::Error::UnknownMap(_)) { "builtin" } else { "gamma" };
                Resolve::Field(key, e.to_string())
            })
        }
        (None, Some(file)) => {
            let full = config_path.parent().unwrap_or(Path::new(".")).join(file);
            let text = std::fs::read_to_string(&full).map_err(|e| Resolve::Map(full.clone(), e.into()))?;
            parse_map(&text).map_err(|e| Resolve::Map(full, e))
        }
    }
}

impl ExperimentConfig {
    /// First out-of-range value as `(section, key, message)`.
    fn first_violation(&self) -> Option<(&'static str, &'static str, String)> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        let a = &self.analysis;
        let i = &self.inducing;
        let o = &self.operator;
        let s = &self.stats;
        let checks: Vec<(&str, &str, bool, &str)> = vec![
            ("map", "gamma", self.map.gamma.is_none_or(|g| g.is_finite()), "must be finite"),
            ("analysis", "delta", unit(a.delta), "must lie in (0, 1)"),
            ("analysis", "order_samples", a.order_samples >= 4, "must be at least 4"),
            ("analysis", "expansion_horizon", a.expansion_horizon >= 1, "must be positive"),
            ("analysis", "expansion_orbits", a.expansion_orbits >= 1, "must be positive"),
            ("analysis", "orbit_horizon", a.orbit_horizon >= 10, "must be at least 10"),
            ("analysis", "p", a.p.is_finite() && a.p >= 0.0, "must be a finite nonnegative number"),
            ("inducing", "delta", unit(i.delta), "must lie in (0, 1)"),
            ("inducing", "q0", i.q0 >= 1, "must be positive"),
            ("inducing", "tau_max", i.tau_max >= 1, "must be positive"),
            ("inducing", "refine_tol", i.refine_tol > 0.0 && i.refine_tol < 1.0, "must lie in (0, 1)"),
            ("inducing", "theta", i.theta > 0.0 && i.theta.is_finite(), "must be positive"),
            ("operator", "k", o.k >= 2, "must be at least 2"),
            ("operator", "n_eigs", o.n_eigs >= 2, "must be at least 2"),
            ("operator", "k_scheme", o.k_scheme >= 2 && o.k_scheme <= 2048, "must lie in [2, 2048]"),
            ("operator", "thetas", o.thetas.iter().all(|t| t.is_finite()), "must be finite"),
            ("operator", "singular_tol", o.singular_tol > 0.0, "must be positive"),
            ("operator", "pushdown_k", o.pushdown_k >= 2, "must be at least 2"),
            ("operator", "pushdown_budget", o.pushdown_budget >= 1, "must be positive"),
            ("operator", "twists", o.twists.iter().all(|t| t.is_finite()), "must be finite"),
            ("stats", "observable", Observable::parse(&s.observable).is_ok(), "is not a known observable"),
            ("stats", "mean", s.mean.is_none_or(|m| m.is_finite()), "must be finite"),
            ("stats", "n_orbits", s.n_orbits >= 2, "must be at least 2"),
            ("stats", "horizon", s.horizon >= 1, "must be positive"),
            ("stats", "n_max", s.n_max >= 1, "must be positive"),
            ("stats", "gk_horizon", s.gk_horizon > s.n_max, "must exceed n_max"),
            ("stats", "ks_threshold", unit(s.ks_threshold), "must lie in (0, 1)"),
            ("stats", "decay_observable", Observable::parse(&s.decay_observable).is_ok(), "is not a known observable"),
            ("stats", "decay_n_max", s.decay_n_max >= 1, "must be positive"),
            ("stats", "decay_horizon", s.decay_horizon > s.decay_n_max, "must exceed decay_n_max"),
            ("stats", "fit_r2", unit(s.fit_r2), "must lie in (0, 1)"),
            ("stats", "envelope_q", s.envelope_q > 0.0, "must be positive"),
            ("stats", "envelope_delta", unit(s.envelope_delta), "must lie in (0, 1)"),
            ("stats", "eps", s.eps.iter().all(|e| *e > 0.0 && e.is_finite()), "entries must be positive"),
            (
                "stats",
                "ld_n",
                !s.ld_n.is_empty() && s.ld_n.iter().all(|n| *n >= 1),
                "must be a nonempty list of positive lengths",
            ),
        ];
        checks.into_iter().find(|(_, _, ok, _)| !ok).map(|(sec, key, _, msg)| (sec, key, format!("{sec}.{key} {msg}")))
    }

    /// SHA-256 of the canonical JSON form, independent of formatting,
    /// comments and the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        crate::digest(&serde_json::to_vec(&c).expect("config serializes"))
    }
}

/// 1-based line of `key = …` inside `[section]` (`""` is the top level),
/// falling back to the section header and then to line 1.
pub fn key_line(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(n + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return n + 1;
                }
            }
        }
    }
    header.unwrap_or(1)
}
