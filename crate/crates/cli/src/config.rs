use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("could not parse config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Core(#[from] kdvlab_core::KdvError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn bad<T>(field: &str, msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config { field: field.to_string(), msg: msg.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Roots,
    Spectrum,
    Critical,
    Simulate,
    Response,
    Hum,
    Nullctl,
    Obstruction,
    Monotone,
    Steer,
    Toy,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Time steps per horizon for sweeps (dt = T/steps).
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> PathBuf {
    PathBuf::from("kdvlab-out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), format: Format::Csv }
    }
}

/// Experiment-specific knobs; each experiment reads only the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub z: Option<f64>,
    pub z_im: Option<f64>,
    pub x: Option<f64>,
    pub smax: Option<u64>,
    pub zmax: Option<f64>,
    pub points: Option<usize>,
    #[serde(rename = "T_list")]
    pub t_list: Option<Vec<f64>>,
    pub amplitude: Option<f64>,
    pub nonlinear: Option<bool>,
    pub every: Option<usize>,
    pub target: Option<String>,
    pub tikhonov: Option<f64>,
    pub project: Option<bool>,
    pub rho: Option<f64>,
    pub t_factor: Option<f64>,
    pub angle: Option<f64>,
    pub iterations: Option<usize>,
    pub check: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub pair: Option<[u32; 2]>,
    #[serde(rename = "L")]
    pub len: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            pair: None,
            len: None,
            grid: GridConfig::default(),
            sampling: Sampling::default(),
            output: OutputConfig::default(),
            params: Params::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// KDVLAB_SEED replaces the configured seed.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(v) = std::env::var("KDVLAB_SEED") {
            match v.trim().parse::<u64>() {
                Ok(s) => self.sampling.seed = Some(s),
                Err(_) => return bad("KDVLAB_SEED", format!("`{v}` is not an unsigned integer")),
            }
        }
        Ok(())
    }

    /// Canonical JSON of the config, hashed into the manifest. The output
    /// directory is left out so reruns elsewhere hash identically.
    pub fn canonical(&self) -> Result<String, CliError> {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        Ok(serde_json::to_string(&c)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        use Experiment::*;
        let positive = |field: &str, v: Option<f64>| -> Result<(), CliError> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => bad(field, format!("must be positive and finite, got {x}")),
                _ => Ok(()),
            }
        };
        positive("L", self.len)?;
        positive("grid.dt", self.grid.dt)?;
        positive("grid.T", self.grid.t)?;
        positive("params.rho", self.params.rho)?;
        positive("params.zmax", self.params.zmax)?;
        if let Some(n) = self.grid.n {
            if n < 32 {
                return bad("grid.N", format!("must be at least 32, got {n}"));
            }
        }
        if let Some(s) = self.grid.steps {
            if s < 100 {
                return bad("grid.steps", format!("must be at least 100, got {s}"));
            }
        }
        if let Some([k, l]) = self.pair {
            if k == 0 || l == 0 {
                return bad("pair", "k and l must be positive");
            }
        }
        if self.pair.is_some() && self.len.is_some() {
            return bad("L", "give either `pair` or `L`, not both");
        }
        if let Some(ts) = &self.params.t_list {
            if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return bad("params.T_list", "must be a non-empty list of positive horizons");
            }
        }
        if let Some(t) = &self.params.target {
            if !["sin", "sin2", "one-minus-cos", "bump"].contains(&t.as_str()) {
                return bad("params.target", format!("unknown target `{t}` (sin, sin2, one-minus-cos, bump)"));
            }
        }
        match self.experiment {
            Roots if self.params.z.is_none() => bad("params.z", "required for roots"),
            Critical if self.params.smax.is_none() => bad("params.smax", "required for critical"),
            Spectrum | Simulate | Response if self.pair.is_none() && self.len.is_none() => bad("pair", "required (or `L`)"),
            Nullctl | Obstruction | Monotone | Steer | Sweep if self.pair.is_none() => bad("pair", "required"),
            Response if self.params.z.is_none() => bad("params.z", "required for response"),
            Nullctl if self.grid.t.is_none() => bad("grid.T", "required for nullctl"),
            Toy if self.grid.t.is_none() => bad("grid.T", "required for toy"),
            _ => Ok(()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
