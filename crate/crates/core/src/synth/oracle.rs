//! Reference implementations written as plain loops, sharing no code with
//! the feature engine. Used to cross-check it.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::features::{FeatureConfig, N_FEATURES};

const LO: [f64; 10] = [
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
const HI: [f64; 10] = [
    -0.019538882735286728,
    -0.021101834024758855,
    0.17532808990845047,
    0.01660210576452232,
    -0.6339789634582119,
    0.7234076904024206,
    -0.1993975339773936,
    -0.039134249302383094,
    -0.029519490925774643,
    0.027333068345077982,
];

fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

fn pop_var(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for v in x {
        s += (v - m) * (v - m);
    }
    s / x.len() as f64
}

fn higuchi(x: &[f64], ks: &[usize]) -> f64 {
    let n = x.len();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &k in ks {
        if k == 0 || k >= n {
            continue;
        }
        let mut total = 0.0;
        let mut count = 0;
        // 1-based offsets m = 1..k as in Higuchi (1988).
        for m in 1..=k {
            let segments = (n - m) / k;
            if segments == 0 {
                continue;
            }
            let mut len = 0.0;
            for i in 1..=segments {
                let a = x[m - 1 + i * k];
                let b = x[m - 1 + (i - 1) * k];
                len += (a - b).abs();
            }
            total += len * (n as f64 - 1.0) / (segments as f64 * k as f64) / k as f64;
            count += 1;
        }
        if count == 0 {
            continue;
        }
        let l = total / count as f64;
        if l <= 0.0 {
            return 0.0;
        }
        lx.push(-(k as f64).ln());
        ly.push(l.ln());
    }
    if lx.len() < 2 {
        return 0.0;
    }
    let mx = mean(&lx);
    let my = mean(&ly);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..lx.len() {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    num / den
}

fn td(x: &[f64], cfg: &FeatureConfig, out: &mut [f64]) {
    let n = x.len();
    let nf = n as f64;
    let m = mean(x);
    let var = pop_var(x);
    let mut iav = 0.0;
    let mut er = 0.0;
    for v in x {
        iav += v.abs();
        er += v * v;
    }
    let mav = iav / nf;
    let constant = x.iter().all(|v| *v == x[0]);
    let (mut skew, mut kurt) = (0.0, 0.0);
    if !constant {
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for v in x {
            m3 += (v - m).powi(3);
            m4 += (v - m).powi(4);
        }
        skew = m3 / nf / var.powf(1.5);
        kurt = m4 / nf / (var * var);
    }

    let mut d = Vec::with_capacity(n - 1);
    for i in 1..n {
        d.push(x[i] - x[i - 1]);
    }
    let mut wl = 0.0;
    let mut dsq = 0.0;
    let mut zc = 0.0;
    let mut wam = 0.0;
    for i in 0..n - 1 {
        wl += d[i].abs();
        dsq += d[i] * d[i];
        if x[i] * x[i + 1] < 0.0 && d[i].abs() >= cfg.zc_threshold {
            zc += 1.0;
        }
        if d[i].abs() > cfg.wam_threshold {
            wam += 1.0;
        }
    }

    let mut ssc = 0.0;
    let mut np = 0.0;
    let mut peak_sum = 0.0;
    let mut first = None;
    let mut last = 0;
    for i in 1..n - 1 {
        if (x[i] - x[i - 1]) * (x[i] - x[i + 1]) > cfg.ssc_threshold {
            ssc += 1.0;
        }
        if x[i].abs() > x[i - 1].abs() && x[i].abs() > x[i + 1].abs() {
            np += 1.0;
            peak_sum += x[i].abs();
            first.get_or_insert(i);
            last = i;
        }
    }
    let mpv = if np > 0.0 { peak_sum / np } else { 0.0 };
    let mfv = match first {
        Some(f) if np >= 2.0 => (last - f) as f64 / (np - 1.0),
        _ => 0.0,
    };

    let mut dd = Vec::with_capacity(n - 2);
    for i in 1..d.len() {
        dd.push(d[i] - d[i - 1]);
    }
    let vx = pop_var(x);
    let vd = pop_var(&d);
    let vdd = pop_var(&dd);
    let hmob = if vx > 0.0 { (vd / vx).sqrt() } else { 0.0 };
    let hmob_d = if vd > 0.0 { (vdd / vd).sqrt() } else { 0.0 };
    let hcom = if hmob > 0.0 { hmob_d / hmob } else { 0.0 };

    let kmax = cfg.hfd_kmax.max(2);
    let hfd = higuchi(x, &(1..=kmax).collect::<Vec<_>>());
    let limit = (n / 4).max(2);
    let dyadic: Vec<usize> = [1, 2, 4, 8, 16].into_iter().filter(|&k| k <= limit).collect();
    let fdim = higuchi(x, &dyadic);

    let third = n / 3;
    let seg_mav = |a: usize, b: usize| {
        let mut s = 0.0;
        for v in &x[a..b] {
            s += v.abs();
        }
        s / (b - a) as f64
    };
    let m1 = seg_mav(0, third);
    let m3 = seg_mav(2 * n / 3, n);
    let mavs = (m3 - m1) / 2.0;

    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    let pos = 0.75 * (nf - 1.0);
    let i0 = pos.floor() as usize;
    let perc = if i0 + 1 < n { a[i0] + (pos - i0 as f64) * (a[i0 + 1] - a[i0]) } else { a[i0] };

    let row = [
        mav,
        var.sqrt(),
        var,
        wl,
        zc,
        (er / nf).sqrt(),
        np,
        mpv,
        mfv,
        ssc,
        wl / (nf - 1.0),
        fdim,
        if dsq > 0.0 { dsq.sqrt().log10() } else { 0.0 },
        hfd,
        skew,
        iav,
        hmob,
        hcom,
        er,
        (dsq / (nf - 1.0)).sqrt(),
        wam,
        mavs,
        kurt,
        perc,
    ];
    out[..24].copy_from_slice(&row);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in x {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if hi == lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / 10.0;
    for v in x {
        let b = (((v - lo) / width).floor() as usize).min(9);
        out[24 + b] += 1.0 / nf;
    }
}

fn fd(x: &[f64], fs: f64, cfg: &FeatureConfig, out: &mut [f64]) {
    let n = x.len();
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let cos: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
    let half = n / 2;
    let mut p = vec![0.0; half + 1];
    let mut f = vec![0.0; half + 1];
    for j in 0..=half {
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, v) in c.iter().enumerate() {
            let idx = (j * t) % n;
            re += v * cos[idx];
            im -= v * sin[idx];
        }
        let edge = j == 0 || (n % 2 == 0 && j == half);
        p[j] = (if edge { 1.0 } else { 2.0 }) * (re * re + im * im) / (n as f64 * n as f64);
        f[j] = j as f64 * fs / n as f64;
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return;
    }

    let mut wl = 0.0;
    for j in 1..p.len() {
        wl += (p[j] - p[j - 1]).abs();
    }
    let mut fp = 0.0;
    for j in 0..p.len() {
        fp += f[j] * p[j];
    }

    let target = total / 2.0;
    let mut acc = 0.0;
    let mut mdf = 0.0;
    for j in 0..p.len() {
        if acc + p[j] >= target {
            mdf = if j == 0 { f[0] } else { f[j - 1] + (target - acc) / p[j] * (f[j] - f[j - 1]) };
            break;
        }
        acc += p[j];
    }

    let mut peaks = Vec::new();
    for j in 1..p.len().saturating_sub(1) {
        if p[j] > p[j - 1] && p[j] > p[j + 1] {
            peaks.push(p[j]);
        }
    }
    let (mpk, stdpk) = if peaks.is_empty() { (0.0, 0.0) } else { (mean(&peaks), pop_var(&peaks).sqrt()) };

    let band = |lo: f64, hi: f64| {
        let mut s = 0.0;
        for j in 0..p.len() {
            if f[j] >= lo && f[j] < hi {
                s += p[j];
            }
        }
        s
    };
    let low = band(cfg.fr_low_band.0, cfg.fr_low_band.1);
    let high = band(cfg.fr_high_band.0, cfg.fr_high_band.1);

    let mut best = 0;
    for j in 0..p.len() {
        if p[j] > p[best] {
            best = j;
        }
    }
    let row = [wl, fp / total, mdf, mpk, stdpk, if high > 0.0 { low / high } else { 0.0 }, f[best]];
    out[..7].copy_from_slice(&row);
    for k in 1..=49 {
        out[7 + k - 1] = band(10.0 * k as f64, 10.0 * k as f64 + 10.0);
    }
}

/// Half-point symmetric index for any integer position.
fn mirror(mut i: i64, n: i64) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Full convolution of the symmetrically padded signal, keeping odd samples.
fn analysis(x: &[f64], h: &[f64; 10]) -> Vec<f64> {
    let n = x.len() as i64;
    let l = h.len() as i64;
    let padded: Vec<f64> = (-(l - 1)..n + l - 1).map(|i| x[mirror(i, n)]).collect();
    let conv_len = n + l - 1;
    let mut out = Vec::new();
    let mut pos = 1;
    while pos < conv_len {
        let mut s = 0.0;
        for j in 0..l {
            s += h[j as usize] * padded[(pos - j + l - 1) as usize];
        }
        out.push(s);
        pos += 2;
    }
    out
}

fn packet_leaves(x: Vec<f64>, depth: usize, band: usize, out: &mut [Vec<f64>]) {
    if depth == 0 {
        out[band] = x;
        return;
    }
    let a = analysis(&x, &LO);
    let d = analysis(&x, &HI);
    // Filtering a high band through the high-pass branch mirrors the spectrum.
    if band % 2 == 0 {
        packet_leaves(a, depth - 1, 2 * band, out);
        packet_leaves(d, depth - 1, 2 * band + 1, out);
    } else {
        packet_leaves(d, depth - 1, 2 * band, out);
        packet_leaves(a, depth - 1, 2 * band + 1, out);
    }
}

fn tf(x: &[f64], cfg: &FeatureConfig, out: &mut [f64]) {
    let mut approx = x.to_vec();
    let mut details = Vec::new();
    for _ in 0..4 {
        let d = analysis(&approx, &HI);
        approx = analysis(&approx, &LO);
        details.push(d);
    }
    let mut coeffs = approx;
    for d in details.iter().rev() {
        coeffs.extend_from_slice(d);
    }
    let n = coeffs.len() as f64;
    let var = pop_var(&coeffs);
    let mut wl = 0.0;
    let mut zc = 0.0;
    for i in 1..coeffs.len() {
        wl += (coeffs[i] - coeffs[i - 1]).abs();
        if coeffs[i] * coeffs[i - 1] < 0.0 {
            zc += 1.0;
        }
    }
    let mut energy = 0.0;
    let mut maxabs = 0.0f64;
    let mut abs_sum = 0.0;
    for c in &coeffs {
        energy += c * c;
        maxabs = maxabs.max(c.abs());
        abs_sum += c.abs();
    }
    out[..8].copy_from_slice(&[var.sqrt(), var, wl, energy, maxabs, zc, mean(&coeffs), abs_sum / n]);

    let mut leaves = vec![Vec::new(); 16];
    packet_leaves(x.to_vec(), 4, 0, &mut leaves);
    let e: Vec<f64> = leaves.iter().map(|l| l.iter().map(|v| v * v).sum()).collect();
    let total: f64 = e.iter().sum();
    let eps = cfg.log_floor;
    for k in 0..16 {
        out[8 + k] = ((e[k] / leaves[k].len() as f64).sqrt() + eps).ln();
        out[24 + k] = if total > 0.0 { e[k] / total } else { 1.0 / 16.0 };
        out[40 + k] = ((e[k] + eps) / (total + eps)).ln();
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma).powi(2);
        db += (b[i] - mb).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        0.0
    } else {
        (num / (da * db).sqrt()).clamp(-1.0, 1.0)
    }
}

/// All 147 features of one window; the inter-channel slot is left at 0.
pub fn oracle_features(window: &[f64], fs: f64, cfg: &FeatureConfig) -> [f64; N_FEATURES] {
    let mut out = [0.0; N_FEATURES];
    td(window, cfg, &mut out[..34]);
    fd(window, fs, cfg, &mut out[34..90]);
    tf(window, cfg, &mut out[90..146]);
    out
}

/// Features of every channel of one trial, including the inter-channel slot.
pub fn oracle_features_multi(channels: &[Vec<f64>], fs: f64, cfg: &FeatureConfig) -> Vec<[f64; N_FEATURES]> {
    let c = channels.len();
    (0..c)
        .map(|i| {
            let mut row = oracle_features(&channels[i], fs, cfg);
            if c >= 2 {
                let mut s = 0.0;
                for j in 0..c {
                    if j != i {
                        s += correlation(&channels[i], &channels[j]);
                    }
                }
                row[N_FEATURES - 1] = s / (c - 1) as f64;
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub df: usize,
    pub sigma2: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum OlsError {
    #[error("design is rank deficient ({rank} < {p})")]
    RankDeficient { rank: usize, p: usize },
    #[error("need more observations ({n}) than coefficients ({p})")]
    TooFewRows { n: usize, p: usize },
}

/// Ordinary least squares with two-sided t-test p-values. `x` includes any
/// intercept column.
pub fn oracle_ols(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit, OlsError> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(OlsError::TooFewRows { n, p });
    }
    let xtx = x.tr_mul(x);
    let rank = x.rank(1e-10 * x.norm());
    if rank < p {
        return Err(OlsError::RankDeficient { rank, p });
    }
    let inv = xtx.try_inverse().ok_or(OlsError::RankDeficient { rank, p })?;
    let yv = nalgebra::DVector::from_column_slice(y);
    let beta = &inv * x.tr_mul(&yv);
    let resid = &yv - x * &beta;
    let df = n - p;
    let sigma2 = resid.norm_squared() / df as f64;
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df is positive");
    let mut se = Vec::with_capacity(p);
    let mut t = Vec::with_capacity(p);
    let mut pv = Vec::with_capacity(p);
    for j in 0..p {
        let s = (sigma2 * inv[(j, j)]).sqrt();
        let tj = beta[j] / s;
        se.push(s);
        t.push(tj);
        pv.push((2.0 * (1.0 - dist.cdf(tj.abs()))).clamp(0.0, 1.0));
    }
    Ok(OlsFit { beta: beta.iter().copied().collect(), se, t, p: pv, df, sigma2 })
}
