//! Synthetic sEMG populations with planted demographic effects.
//!
//! Each trial is band-limited Gaussian noise shaped per subject. Every subject
//! draws from its own ChaCha stream, so generation order does not matter.

mod filters;
pub mod oracle;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    default_sex_coding, write_dataset, DatasetError, DemographicTable, TrialTensor, DEMOGRAPHIC_COLUMNS,
    EXCLUSION_COLUMNS, N_DEMOGRAPHICS, SEX_COLUMN,
};

pub use filters::{one_pole_lowpass, Bandpass, Biquad};
pub use oracle::{oracle_features, oracle_features_multi, oracle_ols, OlsError, OlsFit};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
const WARMUP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Log-amplitude gain `strength * z`.
    AmplitudeScale,
    /// Low-pass cutoff multiplied by `exp(-strength * z)`.
    SpectralLowpass,
    /// Pass-band edges multiplied by `exp(strength * z)`.
    BandShift,
}

impl Mechanism {
    /// Features whose response to the mechanism is scored as a planted pair.
    pub fn indicator_features(self) -> &'static [&'static str] {
        match self {
            Mechanism::AmplitudeScale => &["MAV", "RMS"],
            Mechanism::SpectralLowpass => &["MNF", "MDF", "WPT_RE_5", "WPT_RE_6", "WPT_RE_7"],
            Mechanism::BandShift => &["MNF", "MDF"],
        }
    }

    pub fn family(self) -> &'static str {
        match self {
            Mechanism::AmplitudeScale => "amplitude",
            Mechanism::SpectralLowpass | Mechanism::BandShift => "spectral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub demographic: String,
    pub mechanism: Mechanism,
    /// Effect per standard deviation of the demographic.
    pub strength: f64,
}

/// Standard deviations of the random offsets added to log-amplitude, plus the
/// per-subject jitter of the log low-pass cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceBudget {
    pub subject: f64,
    pub gesture: f64,
    pub channel: f64,
    pub cutoff: f64,
}

impl Default for VarianceBudget {
    fn default() -> Self {
        Self { subject: 0.1, gesture: 0.2, channel: 0.2, cutoff: 0.1 }
    }
}

impl VarianceBudget {
    pub fn zero() -> Self {
        Self { subject: 0.0, gesture: 0.0, channel: 0.0, cutoff: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

/// Uniform sampling ranges in table column order; the Sex entry is ignored
/// (sex is balanced 0/1).
pub fn default_ranges() -> Vec<Range> {
    let r = |lo, hi| Range { lo, hi };
    vec![
        r(18.0, 65.0),
        r(0.0, 1.0),
        r(150.0, 195.0),
        r(45.0, 110.0),
        r(20.0, 80.0),
        r(0.3, 0.9),
        r(2.0, 25.0),
        r(2.0, 25.0),
        r(2.0, 25.0),
        r(2.0, 25.0),
        r(0.0, 40.0),
        r(0.0, 40.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissingPlan {
    /// Probability that any non-Sex cell is blanked.
    pub rate: f64,
    /// Leading subjects whose four exclusion columns are all blanked.
    pub excluded_subjects: usize,
}

impl Default for MissingPlan {
    fn default() -> Self {
        Self { rate: 0.0, excluded_subjects: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub n_gestures: usize,
    pub n_channels: usize,
    pub n_trials_per: usize,
    pub fs: f64,
    pub trial_length: usize,
    pub ranges: Vec<Range>,
    pub effects: Vec<PlantedEffect>,
    pub variance: VarianceBudget,
    /// Inter-channel common-mode share.
    pub crosstalk: f64,
    pub band_hz: (f64, f64),
    pub cutoff_hz: f64,
    /// Log of the base RMS amplitude in mV.
    pub log_amplitude: f64,
    pub missing: MissingPlan,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 81,
            n_gestures: 10,
            n_channels: 12,
            n_trials_per: 1,
            fs: 2000.0,
            trial_length: 4000,
            ranges: default_ranges(),
            effects: Vec::new(),
            variance: VarianceBudget::default(),
            crosstalk: 0.2,
            band_hz: (20.0, 450.0),
            cutoff_hz: 250.0,
            log_amplitude: (0.1f64).ln(),
            missing: MissingPlan::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl SynthSpec {
    /// Sex amplitude and fat low-pass effects at the given strengths.
    pub fn with_planted(mut self, sex_amplitude: f64, fat_lowpass: f64) -> Self {
        self.effects = vec![
            PlantedEffect { demographic: "Sex".into(), mechanism: Mechanism::AmplitudeScale, strength: sex_amplitude },
            PlantedEffect {
                demographic: "Subcutaneous_Fat_1".into(),
                mechanism: Mechanism::SpectralLowpass,
                strength: fat_lowpass,
            },
        ];
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_subjects == 0 || self.n_gestures == 0 || self.n_channels == 0 || self.n_trials_per == 0 {
            return bad("all counts must be positive".into());
        }
        if self.trial_length < 256 {
            return bad(format!("trial_length {} is below 256 samples", self.trial_length));
        }
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return bad(format!("fs must be positive, got {}", self.fs));
        }
        let (lo, hi) = self.band_hz;
        if !(lo > 0.0 && hi > lo && hi < self.fs / 2.0) {
            return bad(format!("band {lo}..{hi} Hz does not fit below Nyquist {}", self.fs / 2.0));
        }
        if !(self.cutoff_hz > 0.0) {
            return bad("cutoff_hz must be positive".into());
        }
        if self.ranges.len() != N_DEMOGRAPHICS || self.ranges.iter().any(|r| !(r.lo.is_finite() && r.hi >= r.lo)) {
            return bad(format!("need {N_DEMOGRAPHICS} finite ranges with lo <= hi"));
        }
        let v = &self.variance;
        if [v.subject, v.gesture, v.channel, v.cutoff].iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("variance budget entries must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.crosstalk) {
            return bad("crosstalk must lie in [0, 1)".into());
        }
        if !self.log_amplitude.is_finite() {
            return bad("log_amplitude must be finite".into());
        }
        if !(0.0..1.0).contains(&self.missing.rate) || self.missing.excluded_subjects >= self.n_subjects {
            return bad("missing rate must lie in [0, 1) and leave at least one subject".into());
        }
        for e in &self.effects {
            if !e.strength.is_finite() {
                return bad(format!("effect on {} has non-finite strength", e.demographic));
            }
            if column_index(&e.demographic).is_none() {
                return bad(format!("unknown demographic {}", e.demographic));
            }
        }
        Ok(())
    }
}

fn column_index(name: &str) -> Option<usize> {
    DEMOGRAPHIC_COLUMNS.iter().position(|c| *c == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub family: String,
    pub demographic: String,
    pub mechanism: Mechanism,
    pub strength: f64,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub planted: Vec<PlantedPair>,
    /// Generating values before any cells were blanked.
    pub true_demographics: Vec<[f64; N_DEMOGRAPHICS]>,
}

impl GroundTruth {
    pub fn planted_demographics(&self) -> Vec<&str> {
        let mut d: Vec<&str> =
            self.planted.iter().filter(|p| p.strength != 0.0).map(|p| p.demographic.as_str()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Whether `(feature, demographic)` is a scored planted pair.
    pub fn is_planted(&self, feature: &str, demographic: &str) -> bool {
        self.planted
            .iter()
            .any(|p| p.strength != 0.0 && p.demographic == demographic && p.features.iter().any(|f| f == feature))
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    pub tensors: Vec<TrialTensor>,
    pub demographics: DemographicTable,
    pub ground_truth: GroundTruth,
}

pub fn subject_id(index: usize) -> String {
    format!("S{:03}", index + 1)
}

fn sample_demographics(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<[f64; N_DEMOGRAPHICS]> {
    let n = spec.n_subjects;
    let mut sex: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect();
    sex.shuffle(rng);
    (0..n)
        .map(|i| {
            std::array::from_fn(|j| {
                if j == SEX_COLUMN {
                    sex[i]
                } else {
                    let r = spec.ranges[j];
                    r.lo + (r.hi - r.lo) * rng.random::<f64>()
                }
            })
        })
        .collect()
}

fn column_z(values: &[[f64; N_DEMOGRAPHICS]]) -> Vec<[f64; N_DEMOGRAPHICS]> {
    let n = values.len() as f64;
    let mut stats = [(0.0, 0.0); N_DEMOGRAPHICS];
    for (j, s) in stats.iter_mut().enumerate() {
        let mean = values.iter().map(|r| r[j]).sum::<f64>() / n;
        let sd = (values.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        *s = (mean, sd);
    }
    values
        .iter()
        .map(|r| std::array::from_fn(|j| if stats[j].1 > 0.0 { (r[j] - stats[j].0) / stats[j].1 } else { 0.0 }))
        .collect()
}

/// Per-subject generator parameters derived from the plan.
#[derive(Debug, Clone, Copy)]
struct SubjectPlan {
    log_gain: f64,
    cutoff_hz: f64,
    band_scale: f64,
}

fn subject_plan(spec: &SynthSpec, z: &[f64; N_DEMOGRAPHICS], rng: &mut ChaCha8Rng) -> SubjectPlan {
    let normal = |sd: f64, rng: &mut ChaCha8Rng| {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    };
    let mut log_gain = spec.log_amplitude + normal(spec.variance.subject, rng);
    let mut log_cutoff = spec.cutoff_hz.ln() + normal(spec.variance.cutoff, rng);
    let mut log_band = 0.0;
    for e in &spec.effects {
        let zj = z[column_index(&e.demographic).expect("validated")];
        match e.mechanism {
            Mechanism::AmplitudeScale => log_gain += e.strength * zj,
            Mechanism::SpectralLowpass => log_cutoff -= e.strength * zj,
            Mechanism::BandShift => log_band += e.strength * zj,
        }
    }
    SubjectPlan { log_gain, cutoff_hz: log_cutoff.exp(), band_scale: log_band.exp() }
}

/// Approximate output power of unit white noise after an ideal `[lo, hi]`
/// band-pass and a one-pole low-pass at `fc`. Dividing by its square root
/// keeps the spectral mechanisms from changing amplitude.
fn shaped_power(lo: f64, hi: f64, fc: f64, fs: f64) -> f64 {
    2.0 * fc / fs * ((hi / fc).atan() - (lo / fc).atan())
}

fn generate_subject(
    spec: &SynthSpec,
    index: usize,
    z: &[f64; N_DEMOGRAPHICS],
    gesture_offsets: &[f64],
    channel_offsets: &[f64],
) -> Result<TrialTensor, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);
    let plan = subject_plan(spec, z, &mut rng);
    let (lo, hi) = spec.band_hz;
    let (lo, hi) = (lo * plan.band_scale, (hi * plan.band_scale).min(0.45 * spec.fs));
    let n_trials = spec.n_gestures * spec.n_trials_per;
    let (c, l) = (spec.n_channels, spec.trial_length);
    let total = WARMUP + l;
    let norm = shaped_power(lo, hi, plan.cutoff_hz, spec.fs).sqrt().recip();
    let mix = (spec.crosstalk.sqrt(), (1.0 - spec.crosstalk).sqrt());

    let mut data = Vec::with_capacity(n_trials * c * l);
    let mut labels = Vec::with_capacity(n_trials);
    for g in 0..spec.n_gestures {
        for _ in 0..spec.n_trials_per {
            labels.push(g as u32 + 1);
            let common: Vec<f64> = (0..total).map(|_| StandardNormal.sample(&mut rng)).collect();
            for ch in 0..c {
                let mut x: Vec<f64> = common
                    .iter()
                    .map(|cm| {
                        let own: f64 = StandardNormal.sample(&mut rng);
                        mix.0 * cm + mix.1 * own
                    })
                    .collect();
                Bandpass::new(lo, hi, spec.fs).process(&mut x);
                one_pole_lowpass(&mut x, plan.cutoff_hz, spec.fs);
                let gain = norm * (plan.log_gain + gesture_offsets[g] + channel_offsets[ch]).exp();
                data.extend(x[WARMUP..].iter().map(|v| (v * gain) as f32));
            }
        }
    }
    TrialTensor::new(subject_id(index), (n_trials, c, l), data, labels, spec.fs)
}

fn blank_cells(spec: &SynthSpec, values: &[[f64; N_DEMOGRAPHICS]], rng: &mut ChaCha8Rng) -> Vec<[Option<f64>; N_DEMOGRAPHICS]> {
    values
        .iter()
        .enumerate()
        .map(|(i, row)| {
            std::array::from_fn(|j| {
                let draw = rng.random::<f64>();
                if i < spec.missing.excluded_subjects && EXCLUSION_COLUMNS.contains(&j) {
                    None
                } else if j != SEX_COLUMN && draw < spec.missing.rate {
                    None
                } else {
                    Some(row[j])
                }
            })
        })
        .collect()
}

/// Generates the population described by `spec`.
pub fn generate_population(spec: &SynthSpec) -> Result<Population, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values = sample_demographics(spec, &mut rng);
    let z = column_z(&values);
    let offsets = |sd: f64, n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        match Normal::new(0.0, sd) {
            Ok(d) if sd > 0.0 => (0..n).map(|_| d.sample(rng)).collect(),
            _ => vec![0.0; n],
        }
    };
    let gesture_offsets = offsets(spec.variance.gesture, spec.n_gestures, &mut rng);
    let channel_offsets = offsets(spec.variance.channel, spec.n_channels, &mut rng);
    let cells = blank_cells(spec, &values, &mut rng);

    let make = |i: usize| generate_subject(spec, i, &z[i], &gesture_offsets, &channel_offsets);
    #[cfg(feature = "parallel")]
    let tensors: Vec<TrialTensor> = {
        use rayon::prelude::*;
        (0..spec.n_subjects).into_par_iter().map(make).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let tensors: Vec<TrialTensor> = (0..spec.n_subjects).map(make).collect::<Result<_, _>>()?;

    let planted = spec
        .effects
        .iter()
        .map(|e| PlantedPair {
            family: e.mechanism.family().into(),
            demographic: e.demographic.clone(),
            mechanism: e.mechanism,
            strength: e.strength,
            features: e.mechanism.indicator_features().iter().map(|s| s.to_string()).collect(),
        })
        .collect();
    Ok(Population {
        tensors,
        demographics: DemographicTable { subject_ids: (0..spec.n_subjects).map(subject_id).collect(), cells },
        ground_truth: GroundTruth { seed: spec.seed, planted, true_demographics: values },
    })
}

/// Writes the population in the portable dataset format plus
/// `ground_truth.json`; returns the manifest path.
pub fn write_population(root: &Path, population: &Population) -> Result<PathBuf, SynthError> {
    let manifest = write_dataset(root, &population.tensors, &population.demographics, &default_sex_coding())?;
    let path = root.join(GROUND_TRUTH_FILE);
    let json = serde_json::to_string_pretty(&population.ground_truth).expect("ground truth serializes");
    std::fs::write(&path, json).map_err(|source| SynthError::Io { path, source })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec { n_subjects: 6, n_gestures: 2, n_channels: 3, trial_length: 512, ..SynthSpec::default() }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = generate_population(&small()).unwrap();
        let b = generate_population(&small()).unwrap();
        assert_eq!(a.tensors, b.tensors);
        assert_eq!(a.demographics, b.demographics);
        let c = generate_population(&SynthSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.tensors[0].data, c.tensors[0].data);
    }

    #[test]
    fn sex_is_balanced_and_shapes_match() {
        let p = generate_population(&small()).unwrap();
        let males = p.demographics.cells.iter().filter(|r| r[SEX_COLUMN] == Some(1.0)).count();
        assert_eq!(males, 3);
        assert_eq!(p.tensors[0].shape(), (2, 3, 512));
        assert_eq!(p.tensors[0].labels, vec![1, 2]);
    }

    #[test]
    fn amplitude_effect_scales_rms() {
        let spec = SynthSpec { variance: VarianceBudget::zero(), ..small() }.with_planted(0.5, 0.0);
        let p = generate_population(&spec).unwrap();
        let rms = |t: &TrialTensor| (t.data.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / t.data.len() as f64).sqrt();
        let (mut male, mut female) = (0.0, 0.0);
        for (t, row) in p.tensors.iter().zip(&p.ground_truth.true_demographics) {
            if row[SEX_COLUMN] == 1.0 {
                male += rms(t).ln();
            } else {
                female += rms(t).ln();
            }
        }
        // z(Sex) = +-1 for a balanced 0/1 column, so the log gap is 2 * 0.5.
        assert!(((male - female) / 3.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn exclusion_plan_blanks_leading_subjects() {
        let spec = SynthSpec { missing: MissingPlan { rate: 0.0, excluded_subjects: 2 }, ..small() };
        let p = generate_population(&spec).unwrap();
        for i in 0..2 {
            assert!(EXCLUSION_COLUMNS.iter().all(|&j| p.demographics.cells[i][j].is_none()));
        }
        assert_eq!(p.demographics.n_missing(), 8);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SynthSpec { n_channels: 0, ..small() }.validate().is_err());
        let mut s = small().with_planted(f64::NAN, 0.0);
        assert!(s.validate().is_err());
        s.effects[0].strength = 0.1;
        s.effects[0].demographic = "Shoe_Size".into();
        assert!(s.validate().is_err());
    }
}
