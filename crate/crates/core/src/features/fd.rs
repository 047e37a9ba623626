use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FeatureConfig, FeatureError, SpectrumEstimator, FE_BAND_WIDTH_HZ, N_FD, N_FE_BANDS};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// One-sided power spectrum. `power` is scaled so that its sum equals the
/// mean-square of the (mean-removed) input.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Sum of power over bins with frequency in `[lo, hi)`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn resolution(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }
}

fn one_sided(segment: &[f64], window: Option<&[f64]>, out: &mut [f64]) {
    let n = segment.len();
    let mut buf: Vec<Complex<f64>> = match window {
        Some(w) => segment.iter().zip(w).map(|(x, w)| Complex::new(x * w, 0.0)).collect(),
        None => segment.iter().map(|&x| Complex::new(x, 0.0)).collect(),
    };
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    let norm = match window {
        Some(w) => n as f64 * w.iter().map(|v| v * v).sum::<f64>(),
        None => (n * n) as f64,
    };
    for (j, o) in out.iter_mut().enumerate() {
        let c = if j == 0 || (n % 2 == 0 && j == n / 2) { 1.0 } else { 2.0 };
        *o += c * buf[j].norm_sqr() / norm;
    }
}

/// Power spectrum of the mean-removed window.
pub fn power_spectrum(x: &[f64], fs: f64, estimator: &SpectrumEstimator) -> Spectrum {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    match estimator {
        SpectrumEstimator::Periodogram => {
            let n = centered.len();
            let mut power = vec![0.0; n / 2 + 1];
            one_sided(&centered, None, &mut power);
            let freqs = (0..power.len()).map(|j| j as f64 * fs / n as f64).collect();
            Spectrum { freqs, power }
        }
        SpectrumEstimator::Welch { segment, overlap } => {
            let seg = (*segment).clamp(2, centered.len());
            let step = seg.saturating_sub(*overlap).max(1);
            let hann: Vec<f64> = (0..seg)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / seg as f64).cos())
                .collect();
            let mut power = vec![0.0; seg / 2 + 1];
            let mut count = 0usize;
            let mut start = 0;
            while start + seg <= centered.len() {
                one_sided(&centered[start..start + seg], Some(&hann), &mut power);
                count += 1;
                start += step;
            }
            power.iter_mut().for_each(|p| *p /= count as f64);
            let freqs = (0..power.len()).map(|j| j as f64 * fs / seg as f64).collect();
            Spectrum { freqs, power }
        }
    }
}

/// Frequency-domain features in catalog order: FD_WL, MNF, MDF, MPK, STDPK,
/// FR, PKF, then FE_10Hz .. FE_490Hz.
pub fn compute_fd(x: &[f64], fs: f64, cfg: &FeatureConfig) -> Result<[f64; N_FD], FeatureError> {
    if x.len() < 64 {
        return Err(FeatureError::WindowTooShort {
            what: "frequency-domain features",
            len: x.len(),
            min: 64,
        });
    }
    if !(fs > 0.0) {
        return Err(FeatureError::BadSamplingRate(fs));
    }
    let spec = power_spectrum(x, fs, &cfg.estimator);
    Ok(spectral_features(&spec, cfg))
}

pub(crate) fn spectral_features(spec: &Spectrum, cfg: &FeatureConfig) -> [f64; N_FD] {
    let mut out = [0.0; N_FD];
    let p = &spec.power;
    let f = &spec.freqs;
    let total = spec.total();
    if !(total > 0.0) {
        return out;
    }

    let fd_wl: f64 = p.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let mnf = f.iter().zip(p).map(|(f, p)| f * p).sum::<f64>() / total;

    let half = total / 2.0;
    let mut cum = 0.0;
    let mut mdf = 0.0;
    for j in 0..p.len() {
        let next = cum + p[j];
        if next >= half {
            mdf = if j == 0 { f[0] } else { f[j - 1] + (half - cum) / p[j] * (f[j] - f[j - 1]) };
            break;
        }
        cum = next;
    }

    let peaks: Vec<f64> =
        (1..p.len().saturating_sub(1)).filter(|&j| p[j] > p[j - 1] && p[j] > p[j + 1]).map(|j| p[j]).collect();
    let (mpk, stdpk) = if peaks.is_empty() {
        (0.0, 0.0)
    } else {
        let m = peaks.iter().sum::<f64>() / peaks.len() as f64;
        let v = peaks.iter().map(|q| (q - m) * (q - m)).sum::<f64>() / peaks.len() as f64;
        (m, v.sqrt())
    };

    let low = spec.band_power(cfg.fr_low_band.0, cfg.fr_low_band.1);
    let high = spec.band_power(cfg.fr_high_band.0, cfg.fr_high_band.1);
    let fr = if high > 0.0 { low / high } else { 0.0 };

    let mut best = 0;
    for j in 1..p.len() {
        if p[j] > p[best] {
            best = j;
        }
    }
    let pkf = f[best];

    out[..7].copy_from_slice(&[fd_wl, mnf, mdf, mpk, stdpk, fr, pkf]);
    // Bands [10k, 10k + 10) for k = 1..=49.
    for (&fj, &pj) in f.iter().zip(p) {
        let k = (fj / FE_BAND_WIDTH_HZ).floor() as usize;
        if (1..=N_FE_BANDS).contains(&k) {
            out[7 + k - 1] += pj;
        }
    }
    out
}
