use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    compute_fd, compute_td, compute_tf, compute_xch, FeatureCatalog, FeatureConfig, FeatureError, N_FD,
    N_FEATURES, N_TD, N_TF,
};
use crate::dataset::{extract_window, AnalysisWindow, TrialTensor};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub subject: String,
    pub gesture: u32,
    pub channel: usize,
}

/// Long-form trial-averaged features: one row per (subject, gesture, channel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<RowKey>,
    /// Row-major, `rows.len() x feature_names.len()`.
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn empty(catalog: &FeatureCatalog) -> Self {
        Self { feature_names: catalog.names(), rows: Vec::new(), values: Vec::new() }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let p = self.n_features();
        (0..self.n_rows()).map(|i| self.values[i * p + j]).collect()
    }

    pub fn push_row(&mut self, key: RowKey, values: &[f64]) {
        debug_assert_eq!(values.len(), self.n_features());
        self.rows.push(key);
        self.values.extend_from_slice(values);
    }

    pub fn append(&mut self, other: FeatureMatrix) {
        self.rows.extend(other.rows);
        self.values.extend(other.values);
    }

    /// Subjects in first-appearance order.
    pub fn subjects(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.subject) && !out.contains(&r.subject) {
                out.push(r.subject.clone());
            }
        }
        out
    }

    /// Per-subject mean over all of that subject's rows, in `subjects()` order.
    pub fn subject_means(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let subjects = self.subjects();
        let p = self.n_features();
        let mut sums = vec![vec![0.0; p]; subjects.len()];
        let mut counts = vec![0usize; subjects.len()];
        let index: BTreeMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        for (i, key) in self.rows.iter().enumerate() {
            let s = index[key.subject.as_str()];
            counts[s] += 1;
            for (acc, v) in sums[s].iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        for (row, c) in sums.iter_mut().zip(counts) {
            row.iter_mut().for_each(|v| *v /= c as f64);
        }
        (subjects, sums)
    }

    pub fn to_csv(&self, preamble: Option<&str>) -> String {
        let mut out = String::with_capacity(self.values.len() * 12);
        if let Some(p) = preamble {
            out.push_str(p);
        }
        out.push_str("subject,gesture,channel");
        for n in &self.feature_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, key) in self.rows.iter().enumerate() {
            out.push_str(&format!("{},{},{}", key.subject, key.gesture, key.channel));
            for v in self.row(i) {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, FeatureError> {
        let bad = |m: String| FeatureError::Inconsistent(m);
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.len() < 4 || &header[0] != "subject" || &header[1] != "gesture" || &header[2] != "channel" {
            return Err(bad("feature CSV header must start with subject,gesture,channel".into()));
        }
        let feature_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut m = Self { feature_names, rows: Vec::new(), values: Vec::new() };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let key = RowKey {
                subject: rec[0].to_string(),
                gesture: rec[1].parse().map_err(|_| bad(format!("bad gesture {:?}", &rec[1])))?,
                channel: rec[2].parse().map_err(|_| bad(format!("bad channel {:?}", &rec[2])))?,
            };
            m.rows.push(key);
            for v in rec.iter().skip(3) {
                m.values.push(v.parse().map_err(|_| bad(format!("bad value {v:?}")))?);
            }
        }
        Ok(m)
    }
}

/// All 147 features for each channel window of one trial, in catalog order.
pub fn window_features(
    windows: &[Vec<f64>],
    fs: f64,
    cfg: &FeatureConfig,
) -> Result<Vec<[f64; N_FEATURES]>, FeatureError> {
    let xch = if windows.len() >= 2 { compute_xch(windows)? } else { vec![0.0; windows.len()] };
    let mut out = Vec::with_capacity(windows.len());
    for (c, w) in windows.iter().enumerate() {
        let mut f = [0.0; N_FEATURES];
        f[..N_TD].copy_from_slice(&compute_td(w, cfg)?);
        f[N_TD..N_TD + N_FD].copy_from_slice(&compute_fd(w, fs, cfg)?);
        f[N_TD + N_FD..N_TD + N_FD + N_TF].copy_from_slice(&compute_tf(w, cfg)?);
        f[N_FEATURES - 1] = xch[c];
        out.push(f);
    }
    Ok(out)
}

/// All 147 features for every channel of one trial, in catalog order.
pub fn extract_trial_features(
    tensor: &TrialTensor,
    trial: usize,
    window: &AnalysisWindow,
    cfg: &FeatureConfig,
) -> Result<Vec<[f64; N_FEATURES]>, FeatureError> {
    let windows: Vec<Vec<f64>> = (0..tensor.n_channels)
        .map(|c| {
            extract_window(tensor.channel(trial, c), window)
                .map(|w| w.iter().map(|&v| f64::from(v)).collect())
                .map_err(|e| FeatureError::Inconsistent(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    window_features(&windows, tensor.sampling_rate_hz, cfg)
}

fn per_trial(
    tensor: &TrialTensor,
    window: &AnalysisWindow,
    cfg: &FeatureConfig,
) -> Result<Vec<Vec<[f64; N_FEATURES]>>, FeatureError> {
    let one = |t: usize| extract_trial_features(tensor, t, window, cfg);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..tensor.n_trials).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..tensor.n_trials).map(one).collect()
    }
}

/// Trial-averaged features for one subject, rows ordered by (gesture, channel).
pub fn subject_feature_rows(
    tensor: &TrialTensor,
    catalog: &FeatureCatalog,
    window_fraction: f64,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix, FeatureError> {
    let window = AnalysisWindow::centered(tensor.n_samples, window_fraction);
    let trials = per_trial(tensor, &window, cfg)?;
    let names = catalog.names();

    // Merge in trial-index order so the sums never depend on scheduling.
    let mut cells: BTreeMap<(u32, usize), (Vec<f64>, usize)> = BTreeMap::new();
    for (t, chans) in trials.iter().enumerate() {
        let g = tensor.labels[t];
        for (c, f) in chans.iter().enumerate() {
            if let Some(j) = f.iter().position(|v| !v.is_finite()) {
                return Err(FeatureError::NonFinite {
                    subject: tensor.subject_id.clone(),
                    trial: t,
                    channel: c,
                    feature: names[j].clone(),
                });
            }
            let entry = cells.entry((g, c)).or_insert_with(|| (vec![0.0; N_FEATURES], 0));
            for (acc, v) in entry.0.iter_mut().zip(f) {
                *acc += v;
            }
            entry.1 += 1;
        }
    }
    let mut m = FeatureMatrix::empty(catalog);
    for ((gesture, channel), (sum, n)) in cells {
        let mean: Vec<f64> = sum.iter().map(|v| v / n as f64).collect();
        m.push_row(RowKey { subject: tensor.subject_id.clone(), gesture, channel }, &mean);
    }
    Ok(m)
}

/// Feature matrix over all subjects, in input order.
pub fn build_feature_matrix(
    tensors: &[TrialTensor],
    catalog: &FeatureCatalog,
    window_fraction: f64,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix, FeatureError> {
    if catalog.len() != N_FEATURES {
        return Err(FeatureError::Inconsistent(format!("catalog has {} features, expected {N_FEATURES}", catalog.len())));
    }
    let mut m = FeatureMatrix::empty(catalog);
    for t in tensors {
        m.append(subject_feature_rows(t, catalog, window_fraction, cfg)?);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(n_trials: usize, seed: u32) -> TrialTensor {
        let (c, s) = (3, 400);
        let mut state = seed.wrapping_mul(2654435761).max(1);
        let data = (0..n_trials * c * s)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 17;
                state ^= state << 5;
                (state as f32 / u32::MAX as f32) - 0.5
            })
            .collect();
        let labels = (0..n_trials as u32).map(|t| t % 2).collect();
        TrialTensor::new("s1", (n_trials, c, s), data, labels, 2000.0).unwrap()
    }

    #[test]
    fn single_trial_is_identity() {
        let t = TrialTensor { labels: vec![4], ..tensor(1, 3) };
        let cat = FeatureCatalog::standard();
        let m = build_feature_matrix(std::slice::from_ref(&t), &cat, 0.7, &FeatureConfig::default()).unwrap();
        let w = AnalysisWindow::centered(400, 0.7);
        let direct = extract_trial_features(&t, 0, &w, &FeatureConfig::default()).unwrap();
        assert_eq!(m.n_rows(), 3);
        for c in 0..3 {
            assert_eq!(m.row(c), &direct[c][..]);
            assert_eq!(m.rows[c], RowKey { subject: "s1".into(), gesture: 4, channel: c });
        }
    }

    #[test]
    fn trial_order_does_not_matter() {
        let t = tensor(4, 11);
        let cat = FeatureCatalog::standard();
        let cfg = FeatureConfig::default();
        let a = build_feature_matrix(std::slice::from_ref(&t), &cat, 0.7, &cfg).unwrap();
        // Swap trials 0 and 2 (same gesture).
        let mut data = t.data.clone();
        let stride = t.n_channels * t.n_samples;
        for k in 0..stride {
            data.swap(k, 2 * stride + k);
        }
        let swapped = TrialTensor { data, ..t };
        let b = build_feature_matrix(&[swapped], &cat, 0.7, &cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn csv_roundtrip() {
        let cat = FeatureCatalog::standard();
        let m = build_feature_matrix(&[tensor(2, 5)], &cat, 0.7, &FeatureConfig::default()).unwrap();
        let back = FeatureMatrix::from_csv(&m.to_csv(Some("# header\n"))).unwrap();
        assert_eq!(back, m);
    }
}
