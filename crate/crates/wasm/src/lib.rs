//! Three toolkit operations for the static demo page. Every function takes
//! plain numbers and returns a JSON string.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use myoaudit::audit::{bh_fdr, is_significant, AuditConfig};
use myoaudit::features::{power_spectrum, window_features, FeatureCatalog, FeatureConfig, SpectrumEstimator, N_WPT_NODES};
use myoaudit::spls::{build_cim, fit_spls, standardize_columns, CimLayout};
use myoaudit::synth::{one_pole_lowpass, Bandpass};

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn error_json(message: impl ToString) -> String {
    to_json(&serde_json::json!({ "error": message.to_string() }))
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

#[derive(Serialize)]
struct WindowAnalysis {
    fs: f64,
    signal: Vec<f64>,
    freqs: Vec<f64>,
    power: Vec<f64>,
    wpt_relative_energy: Vec<f64>,
    features: Vec<(String, f64)>,
}

/// Band-passed noise (20-450 Hz) shaped by a one-pole low-pass at
/// `cutoff_hz`, followed by its spectrum, WPT relative energies and the
/// single-channel features.
#[wasm_bindgen]
pub fn window_analysis(seed: u32, n_samples: usize, fs: f64, cutoff_hz: f64) -> String {
    if n_samples < 256 || !(fs > 0.0) || !(cutoff_hz > 0.0) {
        return error_json("need n_samples >= 256 and positive fs and cutoff");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let mut x = noise(&mut rng, n_samples + 256);
    Bandpass::new(20.0, 450.0, fs).process(&mut x);
    one_pole_lowpass(&mut x, cutoff_hz, fs);
    let window: Vec<f64> = x[256..].iter().map(|v| v * 0.1).collect();
    let cfg = FeatureConfig::default();
    let feats = match window_features(std::slice::from_ref(&window), fs, &cfg) {
        Ok(f) => f[0],
        Err(e) => return error_json(e),
    };
    let names = FeatureCatalog::standard().names();
    let wpt: Vec<f64> = names
        .iter()
        .zip(feats.iter())
        .filter(|(n, _)| n.starts_with("WPT_RE_"))
        .map(|(_, v)| *v)
        .collect();
    debug_assert_eq!(wpt.len(), N_WPT_NODES);
    let spec = power_spectrum(&window, fs, &SpectrumEstimator::Periodogram);
    to_json(&WindowAnalysis {
        fs,
        signal: window,
        freqs: spec.freqs,
        power: spec.power,
        wpt_relative_energy: wpt,
        features: names.into_iter().zip(feats).filter(|(n, _)| n != "XCH_MeanCor").collect(),
    })
}

#[derive(Serialize)]
struct FdrResult {
    p_fdr: Vec<f64>,
    significant: Vec<bool>,
    n_significant: usize,
}

/// Benjamini-Hochberg adjustment plus the dual threshold on paired
/// `(p, eta2)` values.
#[wasm_bindgen]
pub fn fdr_explore(p_values: Vec<f64>, eta2: Vec<f64>, p_threshold: f64, eta2_threshold: f64) -> String {
    if p_values.len() != eta2.len() {
        return error_json("p_values and eta2 differ in length");
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return error_json("p-values must lie in [0, 1]");
    }
    let cfg = AuditConfig { p_threshold, eta2_threshold, ..AuditConfig::default() };
    let p_fdr = bh_fdr(&p_values);
    let significant: Vec<bool> = p_fdr.iter().zip(&eta2).map(|(p, e)| is_significant(*p, *e, &cfg)).collect();
    let n_significant = significant.iter().filter(|s| **s).count();
    to_json(&FdrResult { p_fdr, significant, n_significant })
}

#[derive(Serialize)]
struct SplsDemo {
    u: Vec<f64>,
    v: Vec<f64>,
    planted: Vec<f64>,
    layout: CimLayout,
}

/// sPLS on a toy problem: `n` subjects, 24 features of which the first
/// 6 carry a latent factor shared with 6 responses. Returns the first
/// component and its clustered image map.
#[wasm_bindgen]
pub fn spls_cim(seed: u32, n_subjects: usize, keep_x: usize, noise_sd: f64) -> String {
    const P: usize = 24;
    const Q: usize = 6;
    if n_subjects < 4 || keep_x == 0 || keep_x > P || !(noise_sd >= 0.0) {
        return error_json(format!("need n_subjects >= 4, 1 <= keep_x <= {P} and noise_sd >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let latent = noise(&mut rng, n_subjects);
    let planted: Vec<f64> = (0..P).map(|j| if j < 6 { if j % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 }).collect();
    let y_weights = [1.0, -0.8, 0.6, 0.0, 0.0, 0.3];
    let mut e = noise(&mut rng, n_subjects * (P + Q)).into_iter();
    let x = DMatrix::from_fn(n_subjects, P, |i, j| planted[j] * latent[i] + noise_sd * e.next().unwrap_or(0.0));
    let y = DMatrix::from_fn(n_subjects, Q, |i, j| y_weights[j] * latent[i] + noise_sd * e.next().unwrap_or(0.0));
    let (Ok(xs), Ok(ys)) = (standardize_columns(&x), standardize_columns(&y)) else {
        return error_json("a column is constant; raise noise_sd");
    };
    let model = match fit_spls(&xs, &ys, keep_x, 1) {
        Ok(m) => m,
        Err(e) => return error_json(e),
    };
    let rows: Vec<String> = (0..P).map(|j| format!("X{:02}", j + 1)).collect();
    let cols: Vec<String> = (0..Q).map(|j| format!("Y{}", j + 1)).collect();
    let layout = match build_cim(&model, 1, &rows, &cols) {
        Ok(l) => l,
        Err(e) => return error_json(e),
    };
    let c = &model.components[0];
    to_json(&SplsDemo { u: c.u.clone(), v: c.v.clone(), planted, layout })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn window_analysis_is_consistent() {
        let v = parse(&window_analysis(1, 2048, 2000.0, 250.0));
        let wpt: Vec<f64> = serde_json::from_value(v["wpt_relative_energy"].clone()).unwrap();
        assert_eq!(wpt.len(), 16);
        assert!((wpt.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(v["features"].as_array().unwrap().len(), 146);
        assert_eq!(v["power"].as_array().unwrap().len(), 1025);
        assert!(parse(&window_analysis(1, 10, 2000.0, 250.0))["error"].is_string());
    }

    #[test]
    fn fdr_explore_matches_hand_case() {
        let v = parse(&fdr_explore(vec![0.005, 0.009, 0.05, 0.5], vec![0.1, 0.01, 0.2, 0.3], 0.05, 0.06));
        let adj: Vec<f64> = serde_json::from_value(v["p_fdr"].clone()).unwrap();
        assert!((adj[0] - 0.018).abs() < 1e-12 && (adj[2] - 0.2 / 3.0).abs() < 1e-12);
        assert_eq!(v["n_significant"], 1);
        assert!(parse(&fdr_explore(vec![0.1], vec![], 0.05, 0.06))["error"].is_string());
    }

    #[test]
    fn spls_cim_recovers_planted_block() {
        let v = parse(&spls_cim(3, 200, 6, 0.3));
        let u: Vec<f64> = serde_json::from_value(v["u"].clone()).unwrap();
        let nonzero: Vec<usize> = u.iter().enumerate().filter(|(_, x)| x.abs() > 0.0).map(|(i, _)| i).collect();
        assert_eq!(nonzero, (0..6).collect::<Vec<_>>());
        assert_eq!(v["layout"]["cells"].as_array().unwrap().len(), 24 * 6);
    }
}
