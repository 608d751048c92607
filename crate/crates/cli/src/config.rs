//! Scenario configuration: a single JSON document, validated on load.

use std::fs;
use std::path::{Path, PathBuf};

use muhs_core::dynamics::Thresholds;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            message: message.into(),
        }
    }

    /// The offending key path, when known.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Io { .. } => None,
            ConfigError::Parse { path, .. } => Some(path),
            ConfigError::Invalid { key, .. } => Some(key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Direct,
    Picard,
    Flow,
    Norms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Sine,
    Global,
    Muhs,
    Zero,
}

/// One Fourier coefficient `f̂_k = re + i·im`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub k: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Preset(Preset),
    Scaled {
        preset: Preset,
        scale: f64,
    },
    Coefficients {
        u: Vec<Coefficient>,
        rho: Vec<Coefficient>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSettings {
    #[serde(default = "PicardSettings::default_n_max")]
    pub n_max: usize,
    /// Starting horizon; halved until the ratio test passes.
    #[serde(default = "PicardSettings::default_t_iter")]
    pub t_iter: f64,
    #[serde(default = "PicardSettings::default_s")]
    pub s: f64,
    #[serde(default = "PicardSettings::default_halvings")]
    pub max_halvings: usize,
}

impl PicardSettings {
    fn default_n_max() -> usize {
        12
    }
    fn default_t_iter() -> f64 {
        1.0
    }
    fn default_s() -> f64 {
        2.0
    }
    fn default_halvings() -> usize {
        6
    }
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            n_max: Self::default_n_max(),
            t_iter: Self::default_t_iter(),
            s: Self::default_s(),
            max_halvings: Self::default_halvings(),
        }
    }
}

/// One requested norm. `p` and `r` accept `null` for infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormRequest {
    pub s: f64,
    #[serde(default = "two")]
    pub p: Option<f64>,
    #[serde(default = "two")]
    pub r: Option<f64>,
}

fn two() -> Option<f64> {
    Some(2.0)
}

impl NormRequest {
    pub fn p(&self) -> f64 {
        self.p.unwrap_or(f64::INFINITY)
    }
    pub fn r(&self) -> f64 {
        self.r.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub t_end: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub initial: InitialSpec,
    pub mode: Mode,
    #[serde(default = "ScenarioConfig::default_dt")]
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardSettings>,
    /// Flow checkpoint cadence in accepted steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norms: Option<Vec<NormRequest>>,
}

impl ScenarioConfig {
    fn default_dt() -> f64 {
        1e-4
    }

    pub fn minimal(n: usize, t_end: f64, initial: InitialSpec, mode: Mode) -> Self {
        Self {
            n,
            t_end,
            gamma1: 0.0,
            gamma2: 0.0,
            initial,
            mode,
            dt: Self::default_dt(),
            thresholds: None,
            output_dir: None,
            seed: None,
            picard: None,
            checkpoint_every: None,
            norms: None,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 16 || !self.n.is_power_of_two() {
            return Err(ConfigError::invalid(
                "n",
                format!("{} is not a power of two >= 16", self.n),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(ConfigError::invalid("t_end", "must be positive and finite"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::invalid("dt", "must be positive and finite"));
        }
        if !self.gamma1.is_finite() {
            return Err(ConfigError::invalid("gamma1", "must be finite"));
        }
        if !self.gamma2.is_finite() {
            return Err(ConfigError::invalid("gamma2", "must be finite"));
        }
        if let Some(t) = &self.thresholds {
            if !(t.s_max > 0.0) {
                return Err(ConfigError::invalid("thresholds.s_max", "must be positive"));
            }
            if !(t.dt_min > 0.0) {
                return Err(ConfigError::invalid(
                    "thresholds.dt_min",
                    "must be positive",
                ));
            }
        }
        if let Some(p) = &self.picard {
            if p.n_max < 2 {
                return Err(ConfigError::invalid("picard.n_max", "must be at least 2"));
            }
            if !(p.t_iter > 0.0) {
                return Err(ConfigError::invalid("picard.t_iter", "must be positive"));
            }
        }
        if let Some(norms) = &self.norms {
            for (i, req) in norms.iter().enumerate() {
                if muhs_core::besov::BesovIndex::new(req.s, req.p(), req.r()).is_err() {
                    return Err(ConfigError::invalid(
                        format!("norms[{i}]"),
                        "needs finite s and p, r >= 1",
                    ));
                }
            }
        }
        match &self.initial {
            InitialSpec::Preset(p) | InitialSpec::Scaled { preset: p, .. } => {
                if let InitialSpec::Scaled { scale, .. } = &self.initial {
                    if !scale.is_finite() {
                        return Err(ConfigError::invalid("initial.scale", "must be finite"));
                    }
                }
                if *p == Preset::Global && (self.gamma1 - 2.0 * self.gamma2).abs() > 1e-12 {
                    return Err(ConfigError::invalid(
                        "gamma1",
                        format!(
                            "preset \"global\" requires the global-existence condition gamma1 = 2 gamma2 (got gamma1 = {}, gamma2 = {})",
                            self.gamma1, self.gamma2
                        ),
                    ));
                }
            }
            InitialSpec::Coefficients { u, rho } => {
                check_coefficients("initial.u", u, self.n)?;
                check_coefficients("initial.rho", rho, self.n)?;
            }
        }
        Ok(())
    }
}

/// Coefficient lists must describe a real field: every `k` in band, no
/// duplicates, `f̂_{−k} = conj(f̂_k)`, and real self-conjugate modes.
fn check_coefficients(key: &str, list: &[Coefficient], n: usize) -> Result<(), ConfigError> {
    let half = (n / 2) as i64;
    let tol = |c: &Coefficient| 1e-12 * (1.0 + c.re.abs() + c.im.abs());
    for (i, c) in list.iter().enumerate() {
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(ConfigError::invalid(
                format!("{key}[{i}]"),
                "non-finite coefficient",
            ));
        }
        if c.k.abs() > half {
            return Err(ConfigError::invalid(
                format!("{key}[{i}].k"),
                format!("wavenumber {} outside |k| <= {half}", c.k),
            ));
        }
        if list[..i].iter().any(|d| d.k == c.k) {
            return Err(ConfigError::invalid(
                format!("{key}[{i}].k"),
                format!("duplicate wavenumber {}", c.k),
            ));
        }
        if c.k == 0 || c.k.abs() == half {
            if c.im.abs() > tol(c) {
                return Err(ConfigError::invalid(
                    format!("{key}[{i}].im"),
                    format!("mode {} must be real", c.k),
                ));
            }
            continue;
        }
        let mirror = list.iter().find(|d| d.k == -c.k);
        match mirror {
            Some(d) if (d.re - c.re).abs() <= tol(c) && (d.im + c.im).abs() <= tol(c) => {}
            Some(_) => {
                return Err(ConfigError::invalid(
                    format!("{key}[{i}]"),
                    format!(
                        "coefficients of k = {} and k = {} are not conjugate",
                        c.k, -c.k
                    ),
                ))
            }
            None => {
                return Err(ConfigError::invalid(
                    format!("{key}[{i}]"),
                    format!("k = {} has no conjugate partner k = {}", c.k, -c.k),
                ))
            }
        }
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn to_json(config: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}
