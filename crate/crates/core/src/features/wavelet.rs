//! Symlet-5 discrete wavelet and wavelet-packet transforms with half-point
//! symmetric boundary extension.

use super::{FeatureConfig, FeatureError, N_TF, N_WPT_NODES};

/// Symlet-5 decomposition low-pass filter.
pub const SYM5_DEC_LO: [f64; 10] = [
    0.027333068345077982,
    0.029519490925774643,
    -0.039134249302383094,
    0.1993975339773936,
    0.7234076904024206,
    0.6339789634582119,
    0.01660210576452232,
    -0.17532808990845047,
    -0.021101834024758855,
    0.019538882735286728,
];

pub const WPT_LEVEL: usize = 4;

/// Quadrature-mirror high-pass partner of `SYM5_DEC_LO`.
pub fn sym5_dec_hi() -> [f64; 10] {
    let l = SYM5_DEC_LO.len();
    std::array::from_fn(|j| {
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        sign * SYM5_DEC_LO[l - 1 - j]
    })
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let r = i.rem_euclid(period) as usize;
    if r < n {
        r
    } else {
        2 * n - 1 - r
    }
}

/// One analysis step: `out[k] = sum_j filter[j] * x[2k + 1 - j]`, output
/// length `floor((n + L - 1) / 2)`.
fn filter_downsample(x: &[f64], filter: &[f64]) -> Vec<f64> {
    let n = x.len();
    let l = filter.len();
    let out_len = (n + l - 1) / 2;
    let mut out = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let base = 2 * k as isize + 1;
        let mut acc = 0.0;
        if base - (l as isize - 1) >= 0 && (base as usize) < n {
            for (j, h) in filter.iter().enumerate() {
                acc += h * x[base as usize - j];
            }
        } else {
            for (j, h) in filter.iter().enumerate() {
                acc += h * x[reflect(base - j as isize, n)];
            }
        }
        out.push(acc);
    }
    out
}

/// Single-level DWT: (approximation, detail).
pub fn dwt(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hi = sym5_dec_hi();
    (filter_downsample(x, &SYM5_DEC_LO), filter_downsample(x, &hi))
}

/// Multilevel DWT coefficients ordered `[cA_L, cD_L, cD_{L-1}, ..., cD_1]`.
pub fn wavedec(x: &[f64], level: usize) -> Vec<Vec<f64>> {
    let mut details = Vec::with_capacity(level);
    let mut approx = x.to_vec();
    for _ in 0..level {
        let (a, d) = dwt(&approx);
        details.push(d);
        approx = a;
    }
    let mut out = vec![approx];
    out.extend(details.into_iter().rev());
    out
}

/// Terminal nodes of a `level`-deep wavelet packet tree in natural frequency
/// order (node k covers roughly `[k, k + 1) * fs / 2^(level + 1)`).
pub fn wpt_terminal_nodes(x: &[f64], level: usize) -> Vec<Vec<f64>> {
    // Natural (Paley) order: index bits are the a/d path, MSB first.
    let mut nodes = vec![x.to_vec()];
    for _ in 0..level {
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for node in &nodes {
            let (a, d) = dwt(node);
            next.push(a);
            next.push(d);
        }
        nodes = next;
    }
    // Frequency index f sits at natural index gray(f).
    let mut natural: Vec<Option<Vec<f64>>> = nodes.into_iter().map(Some).collect();
    (0..natural.len()).map(|f| natural[f ^ (f >> 1)].take().expect("gray code is a bijection")).collect()
}

/// Minimum window length for the depth-4 Symlet-5 analysis.
pub fn min_tf_len() -> usize {
    (1 << WPT_LEVEL) * SYM5_DEC_LO.len()
}

/// Time-frequency features in catalog order: the eight `WT_*` scalars, then
/// `WPT_LogRMS_0..15`, `WPT_RE_0..15`, `WPT_NLE_0..15`.
pub fn compute_tf(x: &[f64], cfg: &FeatureConfig) -> Result<[f64; N_TF], FeatureError> {
    if x.len() < min_tf_len() {
        return Err(FeatureError::WindowTooShort {
            what: "wavelet features",
            len: x.len(),
            min: min_tf_len(),
        });
    }
    let eps = cfg.log_floor;
    let mut out = [0.0; N_TF];

    let coeffs: Vec<f64> = wavedec(x, WPT_LEVEL).concat();
    let n = coeffs.len() as f64;
    let mean = coeffs.iter().sum::<f64>() / n;
    let var = coeffs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
    let wl: f64 = coeffs.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let energy: f64 = coeffs.iter().map(|c| c * c).sum();
    let max_abs = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let zc = coeffs.windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64;
    let mav = coeffs.iter().map(|c| c.abs()).sum::<f64>() / n;
    out[..8].copy_from_slice(&[var.sqrt(), var, wl, energy, max_abs, zc, mean, mav]);

    let nodes = wpt_terminal_nodes(x, WPT_LEVEL);
    let energies: Vec<f64> = nodes.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let total: f64 = energies.iter().sum();
    for (k, (node, e)) in nodes.iter().zip(&energies).enumerate() {
        let rms = (e / node.len() as f64).sqrt();
        out[8 + k] = (rms + eps).ln();
        out[8 + N_WPT_NODES + k] =
            if total > 0.0 { e / total } else { 1.0 / N_WPT_NODES as f64 };
        out[8 + 2 * N_WPT_NODES + k] = (e + eps).ln() - (total + eps).ln();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn probe(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect()
    }

    #[test]
    fn filter_bank_is_orthonormal() {
        let lo = SYM5_DEC_LO;
        let hi = sym5_dec_hi();
        assert_relative_eq!(lo.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(lo.iter().sum::<f64>(), 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(lo.iter().zip(&hi).map(|(a, b)| a * b).sum::<f64>(), 0.0, epsilon = 1e-12);
    }

    // Reference coefficients from PyWavelets 1.8 (`pywt.dwt(x, 'sym5', mode='symmetric')`).
    #[test]
    fn dwt_matches_reference() {
        let (a, d) = dwt(&probe(37));
        assert_eq!(a.len(), 23);
        assert_eq!(d.len(), 23);
        let expect_a = [1.7500030420298507, 0.31262552753940454, 0.6222326363998405];
        let expect_d_last = -0.06432627744807806;
        for (got, want) in a.iter().zip(expect_a) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert_relative_eq!(d[22], expect_d_last, epsilon = 1e-12);
    }

    #[test]
    fn wpt_matches_reference_energies() {
        // Node energies in frequency order for probe(200), PyWavelets WaveletPacket.
        let nodes = wpt_terminal_nodes(&probe(200), 4);
        let e: Vec<f64> = nodes.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        let want = [
            (0usize, 53294.689811207994),
            (1, 2.0505804464728925),
            (5, 4.200337390965698),
            (15, 0.0008279313018597031),
        ];
        for (k, v) in want {
            assert_relative_eq!(e[k], v, max_relative = 1e-9);
        }
    }

    #[test]
    fn relative_energy_sums_to_one() {
        let f = compute_tf(&probe(400), &FeatureConfig::default()).unwrap();
        let s: f64 = f[8 + 16..8 + 32].iter().sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_window_conventions() {
        let cfg = FeatureConfig::default();
        let f = compute_tf(&[0.0; 200], &cfg).unwrap();
        assert!(f[24..40].iter().all(|v| *v == 1.0 / 16.0));
        assert_relative_eq!(f[8], cfg.log_floor.ln());
        assert!(f.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn impulse_energy_is_preserved() {
        let mut x = vec![0.0; 2800];
        x[1400] = 1.0;
        let f = compute_tf(&x, &FeatureConfig::default()).unwrap();
        assert_relative_eq!(f[3], 1.0, epsilon = 1e-6);
    }
}
