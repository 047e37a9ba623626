//! The 147-feature sEMG catalog.
//!
//! Every feature is computed per (trial, channel) over the analysis window and
//! then averaged over repeated trials of the same (subject, gesture, channel)
//! cell by [`build_feature_matrix`].

mod fd;
mod matrix;
mod td;
pub mod wavelet;
mod xch;

use serde::{Deserialize, Serialize};

pub use fd::{compute_fd, power_spectrum, Spectrum};
pub use matrix::{
    build_feature_matrix, extract_trial_features, subject_feature_rows, window_features, FeatureMatrix,
    RowKey,
};
pub use td::{compute_td, higuchi_fd};
pub use wavelet::compute_tf;
pub use xch::{compute_xch, correlation_matrix, pearson};

pub const N_TD: usize = 34;
pub const N_FD: usize = 56;
pub const N_TF: usize = 56;
pub const N_XCH: usize = 1;
pub const N_FEATURES: usize = N_TD + N_FD + N_TF + N_XCH;

/// Number of 10 Hz frequency-energy bands (`FE_10Hz` .. `FE_490Hz`).
pub const N_FE_BANDS: usize = 49;
pub const FE_BAND_WIDTH_HZ: f64 = 10.0;
/// Terminal nodes of the depth-4 wavelet packet tree.
pub const N_WPT_NODES: usize = 16;

pub const TD_SCALARS: [&str; 24] = [
    "MAV", "STD", "Var", "WL", "ZC", "RMS", "NP", "MPV", "MFV", "SSC", "DAMV", "FDim", "MFL",
    "HFD", "Skew", "IAV", "HMob", "HCom", "ER", "DASDV", "WAM", "MAVS", "Kurt", "Perc",
];
pub const FD_SCALARS: [&str; 7] = ["FD_WL", "MNF", "MDF", "MPK", "STDPK", "FR", "PKF"];
pub const WT_SCALARS: [&str; 8] = [
    "WT_STD", "WT_Var", "WT_WL", "WT_Energy", "WT_MaxAV", "WT_ZC", "WT_Mean", "WT_MAV",
];
pub const XCH_NAME: &str = "XCH_MeanCor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    TD,
    FD,
    TF,
    XCH,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureParam {
    None,
    HistBin(usize),
    Band { lo_hz: f64, hi_hz: f64 },
    WptNode(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub domain: Domain,
    pub param: FeatureParam,
}

/// Ordered list of the 147 feature descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureCatalog {
    pub fn standard() -> Self {
        let mut features = Vec::with_capacity(N_FEATURES);
        let mut push = |name: String, domain, param| {
            features.push(FeatureDescriptor { name, domain, param })
        };
        for name in TD_SCALARS {
            push(name.to_string(), Domain::TD, FeatureParam::None);
        }
        for b in 0..10 {
            push(format!("Hist{b}"), Domain::TD, FeatureParam::HistBin(b));
        }
        for name in FD_SCALARS {
            push(name.to_string(), Domain::FD, FeatureParam::None);
        }
        for k in 1..=N_FE_BANDS {
            let lo = k as f64 * FE_BAND_WIDTH_HZ;
            push(
                format!("FE_{}Hz", k * 10),
                Domain::FD,
                FeatureParam::Band { lo_hz: lo, hi_hz: lo + FE_BAND_WIDTH_HZ },
            );
        }
        for name in WT_SCALARS {
            push(name.to_string(), Domain::TF, FeatureParam::None);
        }
        for metric in ["WPT_LogRMS", "WPT_RE", "WPT_NLE"] {
            for node in 0..N_WPT_NODES {
                push(format!("{metric}_{node}"), Domain::TF, FeatureParam::WptNode(node));
            }
        }
        push(XCH_NAME.to_string(), Domain::XCH, FeatureParam::None);
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn count(&self, domain: Domain) -> usize {
        self.features.iter().filter(|f| f.domain == domain).count()
    }
}

impl Default for FeatureCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

/// Power-spectrum estimator used by the frequency-domain features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumEstimator {
    /// One-sided rectangular-window periodogram of the mean-removed window.
    Periodogram,
    /// Hann-windowed Welch average; `segment` samples per segment.
    Welch { segment: usize, overlap: usize },
}

/// Thresholds and constants that the feature definitions leave open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub zc_threshold: f64,
    pub ssc_threshold: f64,
    /// Willison amplitude threshold, mV.
    pub wam_threshold: f64,
    pub hfd_kmax: usize,
    pub fr_low_band: (f64, f64),
    pub fr_high_band: (f64, f64),
    pub estimator: SpectrumEstimator,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            zc_threshold: 0.0,
            ssc_threshold: 0.0,
            wam_threshold: 0.05,
            hfd_kmax: 8,
            fr_low_band: (10.0, 100.0),
            fr_high_band: (100.0, 500.0),
            estimator: SpectrumEstimator::Periodogram,
            log_floor: 1e-12,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("window of {len} samples is too short for {what} (need {min})")]
    WindowTooShort { what: &'static str, len: usize, min: usize },
    #[error("sampling rate must be positive, got {0}")]
    BadSamplingRate(f64),
    #[error("need at least 2 channels for inter-channel correlation, got {0}")]
    TooFewChannels(usize),
    #[error(
        "non-finite value for feature {feature} (subject {subject}, trial {trial}, channel {channel})"
    )]
    NonFinite { subject: String, trial: usize, channel: usize, feature: String },
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
}
