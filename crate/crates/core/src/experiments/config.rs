use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::levykernel::CoefficientSpec;
use crate::modulus::{Bernstein, ModulusSpec};
use crate::nonlocal::QuadratureConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub size: usize,
    pub seed: u64,
    /// First seed of the independent corpus used for the re-seeding check.
    pub reseed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { size: 32, seed: 1, reseed: 1001 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatConfig {
    pub bernstein: Bernstein,
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub period: f64,
    pub n: usize,
    pub images: usize,
    pub derivative_order: usize,
}

impl Default for HeatConfig {
    fn default() -> Self {
        Self {
            bernstein: Bernstein::Stable { alpha: 0.5 },
            times: vec![0.25, 1.0, 4.0],
            radii: (-6..=3).map(|k| 2f64.powi(k)).collect(),
            period: 64.0,
            n: 4096,
            images: 8,
            derivative_order: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub alpha: f64,
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub period: f64,
    pub n: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { alpha: 0.5, t: 1.0, samples: 100_000, seed: 7, period: 8192.0, n: 1 << 20 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub x0: [f64; 2],
    pub radii: Vec<f64>,
    pub corpus_size: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { x0: [0.5 * PI, 0.0], radii: vec![0.25, 0.125, 0.0625], corpus_size: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Full,
    Quick,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub corpus: CorpusConfig,
    pub psi: ModulusSpec,
    pub varphi: ModulusSpec,
    #[serde(default = "default_coefficient")]
    pub coefficient: CoefficientSpec,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub heatkernel: HeatConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub profile: Profile,
    /// Also dump grid functions as raw f64 with JSON sidecars.
    #[serde(default)]
    pub write_grids: bool,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_dim() -> usize {
    1
}

fn default_period() -> f64 {
    2.0 * PI
}

fn default_resolutions() -> Vec<usize> {
    vec![1024, 2048]
}

fn default_coefficient() -> CoefficientSpec {
    CoefficientSpec::Constant { value: 1.0 }
}

impl ExperimentConfig {
    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        Self::from_value(v)
    }

    /// Structural checks; numerical guards run when an experiment starts.
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Config(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if self.resolutions.is_empty() {
            return Err(Error::Config("resolutions must not be empty".into()));
        }
        for &n in &self.resolutions {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::Config(format!("resolution {n} is not a power of two ≥ 4")));
            }
        }
        if !(self.period > 0.0) {
            return Err(Error::Config("period must be positive".into()));
        }
        if self.corpus.size == 0 {
            return Err(Error::Config("corpus.size must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Sets a dotted path to a value; the right-hand side is parsed as JSON
/// and falls back to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        match cur {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                cur = map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::Config(format!("override '{path}': '{key}' is not an index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("override '{path}': index {idx} out of range")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                cur = slot;
            }
            _ => return Err(Error::Config(format!("override '{path}': '{key}' is not inside an object"))),
        }
    }
    Ok(())
}
