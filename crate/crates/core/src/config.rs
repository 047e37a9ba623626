use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::AuditConfig;
use crate::dataset::AnalysisWindow;
use crate::features::{FeatureConfig, SpectrumEstimator, N_FEATURES};
use crate::lmm::LmmOptions;
use crate::mice::MiceConfig;
use crate::spls::SplsConfig;
use crate::synth::SynthSpec;

pub const TOOLKIT: &str = "myoaudit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Everything a pipeline run depends on. Field names double as the keys of
/// the TOML/JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Path to a dataset `manifest.json`.
    pub dataset: Option<PathBuf>,
    /// Generate a synthetic population instead of reading `dataset`.
    pub synth: Option<SynthSpec>,
    pub window_fraction: f64,
    pub features: FeatureConfig,
    pub mice: MiceConfig,
    pub lmm: LmmOptions,
    pub audit: AuditConfig,
    pub spls: SplsConfig,
    /// Output directory; not part of the hash.
    pub out: PathBuf,
    /// Overrides the MICE, sPLS and synth seeds when set.
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            synth: None,
            window_fraction: AnalysisWindow::DEFAULT_FRACTION,
            features: FeatureConfig::default(),
            mice: MiceConfig::default(),
            lmm: LmmOptions::default(),
            audit: AuditConfig::default(),
            spls: SplsConfig::default(),
            out: PathBuf::from("myoaudit_out"),
            seed: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

fn band(name: &str, (lo, hi): (f64, f64)) -> Result<(), ConfigError> {
    if lo >= 0.0 && hi > lo && hi.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must satisfy 0 <= lo < hi, got ({lo}, {hi})")))
    }
}

impl PipelineConfig {
    /// Reads TOML, or JSON when the extension is `.json`. A relative
    /// `dataset` path is taken relative to the config file.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let parse_err = |message: String| ConfigError::Parse { path: path.to_path_buf(), message };
        let mut cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        if let (Some(ds), Some(dir)) = (&cfg.dataset, path.parent()) {
            if ds.is_relative() {
                cfg.dataset = Some(dir.join(ds));
            }
        }
        Ok(cfg)
    }

    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.mice.seed = seed;
            self.spls.seed = seed;
            if let Some(s) = self.synth.as_mut() {
                s.seed = seed;
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.dataset, &self.synth) {
            (None, None) => return Err(ConfigError::Invalid("set either `dataset` or a `[synth]` section".into())),
            (Some(_), Some(_)) => return Err(ConfigError::Invalid("`dataset` and `[synth]` are mutually exclusive".into())),
            _ => {}
        }
        if let Some(s) = &self.synth {
            s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(ConfigError::Invalid(format!("window_fraction must lie in (0, 1], got {}", self.window_fraction)));
        }
        let f = &self.features;
        for (name, v) in [("features.zc_threshold", f.zc_threshold), ("features.ssc_threshold", f.ssc_threshold), ("features.wam_threshold", f.wam_threshold)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if f.hfd_kmax < 2 {
            return Err(ConfigError::Invalid(format!("features.hfd_kmax must be at least 2, got {}", f.hfd_kmax)));
        }
        band("features.fr_low_band", f.fr_low_band)?;
        band("features.fr_high_band", f.fr_high_band)?;
        positive("features.log_floor", f.log_floor)?;
        if let SpectrumEstimator::Welch { segment, overlap } = f.estimator {
            if segment < 2 || overlap >= segment {
                return Err(ConfigError::Invalid(format!("Welch needs segment >= 2 and overlap < segment, got {segment}/{overlap}")));
            }
        }
        if self.mice.n_iter == 0 {
            return Err(ConfigError::Invalid("mice.n_iter must be positive".into()));
        }
        positive("lmm.grad_tol", self.lmm.grad_tol)?;
        positive("lmm.fd_step", self.lmm.fd_step)?;
        if self.lmm.max_iter == 0 {
            return Err(ConfigError::Invalid("lmm.max_iter must be positive".into()));
        }
        for (name, v) in [("audit.p_threshold", self.audit.p_threshold), ("audit.eta2_threshold", self.audit.eta2_threshold)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::Invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        let s = &self.spls;
        if s.keep_x == 0 || s.keep_x > N_FEATURES {
            return Err(ConfigError::Invalid(format!("spls.keep_x must lie in 1..={N_FEATURES}, got {}", s.keep_x)));
        }
        if s.n_components == 0 {
            return Err(ConfigError::Invalid("spls.n_components must be positive".into()));
        }
        if s.folds < 2 {
            return Err(ConfigError::Invalid(format!("spls.folds must be at least 2, got {}", s.folds)));
        }
        Ok(())
    }

    /// Compact JSON with sorted keys and without `out`.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("out");
        }
        serde_json::to_string(&v).expect("value serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}
