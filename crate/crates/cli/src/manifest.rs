//! Experiment manifests: parsing with field paths, defaults, and hashing.
//!
//! ```json
//! { "experiment": "zext-tau", "seed": 7,
//!   "model": { "preset": "lazy-walk" },
//!   "params": { "k": 6, "n_samples": 1000 } }
//! ```
//!
//! Omitted parameters take documented defaults; the resolved manifest written
//! next to the outputs spells every parameter out. The manifest hash covers
//! `experiment`, `seed`, `model` and the resolved `params`; it excludes
//! `version`, `out` and `workers`, none of which affect the data.

use std::fmt;
use std::path::PathBuf;

use qrec::model::{preset, ModelDoc};
use qrec::toy::{BallNorm, ToyMode};
use qrec::zext::{CapPolicy, StartFilter};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ToyTau,
    ToyExponent,
    ToyRn,
    SftBuild,
    SftSpectral,
    ZextLlt,
    ZextTau,
    ZextExponent,
    Hirata,
    LimitsVerify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ToyTau => "toy-tau",
            ExperimentKind::ToyExponent => "toy-exponent",
            ExperimentKind::ToyRn => "toy-rn",
            ExperimentKind::SftBuild => "sft-build",
            ExperimentKind::SftSpectral => "sft-spectral",
            ExperimentKind::ZextLlt => "zext-llt",
            ExperimentKind::ZextTau => "zext-tau",
            ExperimentKind::ZextExponent => "zext-exponent",
            ExperimentKind::Hirata => "hirata",
            ExperimentKind::LimitsVerify => "limits-verify",
        }
    }

    /// Whether the experiment runs on a shift model.
    pub fn needs_model(self) -> bool {
        !matches!(
            self,
            ExperimentKind::ToyTau | ExperimentKind::ToyExponent | ExperimentKind::ToyRn | ExperimentKind::LimitsVerify
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Preset(String),
    Inline(ModelDoc),
}

impl ModelSource {
    pub fn document(&self) -> Result<ModelDoc, CliError> {
        match self {
            ModelSource::Preset(name) => {
                preset(name).map_err(|e| CliError::Field { path: "model.preset".into(), message: e.message })
            }
            ModelSource::Inline(doc) => Ok(doc.clone()),
        }
    }

    /// Field-path prefix for errors inside the model document.
    pub fn path(&self) -> &'static str {
        match self {
            ModelSource::Preset(_) => "model.preset",
            ModelSource::Inline(_) => "model.inline",
        }
    }
}

/// Manifest as read from disk; `params` is decoded per experiment.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    experiment: ExperimentKind,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    model: Option<ModelSource>,
    #[serde(default)]
    params: Option<serde_json::Value>,
    #[serde(default)]
    version: Option<String>,
    #[serde(default)]
    manifest_sha256: Option<String>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    workers: Option<usize>,
}

/// Per-experiment parameters with defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    ToyTau(ToyTauParams),
    ToyExponent(ToyExponentParams),
    ToyRn(ToyRnParams),
    SftBuild(SftBuildParams),
    SftSpectral(SftSpectralParams),
    ZextLlt(ZextLltParams),
    ZextTau(ZextTauParams),
    ZextExponent(ZextExponentParams),
    Hirata(HirataParams),
    LimitsVerify(LimitsVerifyParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyTauParams {
    pub dim: u32,
    pub eps: f64,
    pub mode: ToyMode,
    pub norm: BallNorm,
    pub n_samples: usize,
    /// Defaults to `⌈(40/λ_ε)²⌉`, i.e. `λ_ε√τ` observed up to 40.
    pub step_cap: Option<u64>,
}

impl Default for ToyTauParams {
    fn default() -> Self {
        ToyTauParams {
            dim: 1,
            eps: 2f64.powi(-12),
            mode: ToyMode::Idealized,
            norm: BallNorm::Euclidean,
            n_samples: 20_000,
            step_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyExponentParams {
    pub dim: u32,
    pub mode: ToyMode,
    pub norm: BallNorm,
    pub eps_list: Vec<f64>,
    pub n_samples: usize,
    pub step_cap: u64,
    /// Accepted relative deviation of the slope from `2·dim`.
    pub tolerance: f64,
}

impl Default for ToyExponentParams {
    fn default() -> Self {
        ToyExponentParams {
            dim: 1,
            mode: ToyMode::Faithful,
            norm: BallNorm::Euclidean,
            eps_list: (6..=14).map(|j| 2f64.powi(-j)).collect(),
            n_samples: 2001,
            step_cap: 1 << 62,
            tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyRnParams {
    pub n: u64,
    pub n_samples: usize,
}

impl Default for ToyRnParams {
    fn default() -> Self {
        ToyRnParams { n: 1000, n_samples: 20_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftBuildParams {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftSpectralParams {
    pub grid_size: usize,
}

impl Default for SftSpectralParams {
    fn default() -> Self {
        SftSpectralParams { grid_size: 1024 }
    }
}

/// Centred cylinder `a` and target cylinder `b`, as symbol names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderPair {
    pub a: Vec<String>,
    pub b: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZextLltParams {
    pub n_list: Vec<usize>,
    /// DP cell budget per layer.
    pub budget: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cylinder: Option<CylinderPair>,
    /// Accepted `|ratio − 1|` at the largest `n`.
    pub tolerance: f64,
}

impl Default for ZextLltParams {
    fn default() -> Self {
        ZextLltParams { n_list: vec![500, 1000, 2000], budget: 20_000_000, cylinder: None, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZextTauParams {
    pub k: usize,
    pub n_samples: usize,
    pub cap: CapPolicy,
    /// Defaults to rejecting windows with a period `≤ k` and, under a scaled
    /// cap, cylinders too rare for the hard cap to reach `limit`.
    pub filter: Option<StartFilter>,
    pub ks_threshold: f64,
}

impl Default for ZextTauParams {
    fn default() -> Self {
        ZextTauParams {
            k: 6,
            n_samples: 1000,
            cap: CapPolicy::Scaled { limit: 4.0, hard: 1_000_000_000 },
            filter: None,
            ks_threshold: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZextExponentParams {
    pub k_list: Vec<usize>,
    pub n_samples: usize,
    pub cap: CapPolicy,
    /// Accepted relative deviation of the slope from `2d`.
    pub tolerance: f64,
}

impl Default for ZextExponentParams {
    fn default() -> Self {
        ZextExponentParams {
            k_list: (3..=8).collect(),
            n_samples: 1000,
            cap: CapPolicy::Fixed { cap: 10_000_000 },
            tolerance: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HirataParams {
    pub k: usize,
    pub n_samples: usize,
    pub cap: CapPolicy,
    pub ks_threshold: f64,
}

impl Default for HirataParams {
    fn default() -> Self {
        HirataParams { k: 5, n_samples: 10_000, cap: CapPolicy::Scaled { limit: 30.0, hard: u64::MAX }, ks_threshold: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsVerifyParams {
    /// Renewal rate; defaults to `1/σ_φ` of the model, or 1 without a model.
    pub beta: Option<f64>,
    pub t_list: Vec<f64>,
    pub s_list: Vec<f64>,
    pub n_draws: usize,
}

impl Default for LimitsVerifyParams {
    fn default() -> Self {
        LimitsVerifyParams {
            beta: None,
            t_list: (1..=16).map(|i| i as f64 * 0.25).collect(),
            s_list: vec![0.25, 1.0, 4.0],
            n_draws: 1_000_000,
        }
    }
}

/// A validated manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub model: Option<ModelSource>,
    pub params: Params,
}

pub const DEFAULT_SEED: u64 = 0;

fn decode<T: DeserializeOwned + Default>(value: Option<serde_json::Value>) -> Result<T, CliError> {
    match value {
        None => Ok(T::default()),
        Some(v) => serde_path_to_error::deserialize(v).map_err(|e| CliError::Field {
            path: prefixed("params", &e.path().to_string()),
            message: e.into_inner().to_string(),
        }),
    }
}

fn prefixed(prefix: &str, path: &str) -> String {
    if path.is_empty() || path == "." { prefix.to_string() } else { format!("{prefix}.{path}") }
}

impl Manifest {
    /// Defaults for `kind`.
    pub fn new(kind: ExperimentKind) -> Self {
        let params = Self::params_for(kind, None).expect("defaults decode");
        Manifest { experiment: kind, seed: DEFAULT_SEED, model: None, params }
    }

    fn params_for(kind: ExperimentKind, v: Option<serde_json::Value>) -> Result<Params, CliError> {
        Ok(match kind {
            ExperimentKind::ToyTau => Params::ToyTau(decode(v)?),
            ExperimentKind::ToyExponent => Params::ToyExponent(decode(v)?),
            ExperimentKind::ToyRn => Params::ToyRn(decode(v)?),
            ExperimentKind::SftBuild => Params::SftBuild(decode(v)?),
            ExperimentKind::SftSpectral => Params::SftSpectral(decode(v)?),
            ExperimentKind::ZextLlt => Params::ZextLlt(decode(v)?),
            ExperimentKind::ZextTau => Params::ZextTau(decode(v)?),
            ExperimentKind::ZextExponent => Params::ZextExponent(decode(v)?),
            ExperimentKind::Hirata => Params::Hirata(decode(v)?),
            ExperimentKind::LimitsVerify => Params::LimitsVerify(decode(v)?),
        })
    }

    /// Parse manifest JSON, reporting errors with their field path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawManifest = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Field { path: if path == "." { "manifest".into() } else { path }, message: e.into_inner().to_string() }
        })?;
        // `version`, `manifest_sha256`, `out`, `workers` are informational.
        let _ = (raw.version, raw.manifest_sha256, raw.out, raw.workers);
        let params = Self::params_for(raw.experiment, raw.params)?;
        Ok(Manifest { experiment: raw.experiment, seed: raw.seed.unwrap_or(DEFAULT_SEED), model: raw.model, params })
    }

    /// Canonical JSON of the hashed fields.
    fn canonical(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "model": self.model,
            "params": self.params,
        })
    }

    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("manifest serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Resolved manifest document written to `manifest.json`.
    pub fn resolved_json(&self, version: &str) -> String {
        let mut v = self.canonical();
        let obj = v.as_object_mut().expect("object");
        if self.model.is_none() {
            obj.remove("model");
        }
        obj.insert("version".into(), version.into());
        obj.insert("manifest_sha256".into(), self.sha256().into());
        let mut s = serde_json::to_string_pretty(&v).expect("manifest serializes");
        s.push('\n');
        s
    }
}
