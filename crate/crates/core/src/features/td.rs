use super::{FeatureConfig, FeatureError, N_TD};

/// Time-domain features in catalog order (24 scalars, then `Hist0`..`Hist9`).
pub fn compute_td(x: &[f64], cfg: &FeatureConfig) -> Result<[f64; N_TD], FeatureError> {
    let n = x.len();
    if n < 3 {
        return Err(FeatureError::WindowTooShort { what: "time-domain features", len: n, min: 3 });
    }
    let nf = n as f64;

    let mut sum = 0.0;
    let mut sum_abs = 0.0;
    let mut sum_sq = 0.0;
    for &v in x {
        sum += v;
        sum_abs += v.abs();
        sum_sq += v * v;
    }
    let mean = sum / nf;
    let mav = sum_abs / nf;
    let rms = (sum_sq / nf).sqrt();

    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let var = m2;
    let std = var.sqrt();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = var <= (nf * f64::EPSILON * peak).powi(2);
    let (skew, kurt) = if !degenerate { (m3 / var.powf(1.5), m4 / (var * var)) } else { (0.0, 0.0) };

    let mut wl = 0.0;
    let mut diff_sq = 0.0;
    let mut wam = 0usize;
    let mut zc = 0usize;
    for w in x.windows(2) {
        let d = w[1] - w[0];
        wl += d.abs();
        diff_sq += d * d;
        if d.abs() > cfg.wam_threshold {
            wam += 1;
        }
        if w[0] * w[1] < 0.0 && d.abs() >= cfg.zc_threshold {
            zc += 1;
        }
    }
    let damv = wl / (nf - 1.0);
    let dasdv = (diff_sq / (nf - 1.0)).sqrt();
    let mfl = if diff_sq > 0.0 { diff_sq.sqrt().log10() } else { 0.0 };

    let mut ssc = 0usize;
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if (x[i] - x[i - 1]) * (x[i] - x[i + 1]) > cfg.ssc_threshold {
            ssc += 1;
        }
        let a = x[i].abs();
        if a > x[i - 1].abs() && a > x[i + 1].abs() {
            peaks.push(i);
        }
    }
    let np = peaks.len();
    let mpv = if np > 0 { peaks.iter().map(|&i| x[i].abs()).sum::<f64>() / np as f64 } else { 0.0 };
    let mfv = if np >= 2 { (peaks[np - 1] - peaks[0]) as f64 / (np - 1) as f64 } else { 0.0 };

    let (hmob, hcom) = hjorth(x);
    let hfd = higuchi_fd(x, &(1..=cfg.hfd_kmax.max(2)).collect::<Vec<_>>());
    let fdim = higuchi_fd(x, &dyadic_scales(n));
    let mavs = mav_slope(x);
    let perc = abs_percentile(x, 0.75);

    let mut out = [0.0; N_TD];
    let scalars = [
        mav,
        std,
        var,
        wl,
        zc as f64,
        rms,
        np as f64,
        mpv,
        mfv,
        ssc as f64,
        damv,
        fdim,
        mfl,
        hfd,
        skew,
        sum_abs,
        hmob,
        hcom,
        sum_sq,
        dasdv,
        wam as f64,
        mavs,
        kurt,
        perc,
    ];
    out[..24].copy_from_slice(&scalars);
    out[24..].copy_from_slice(&histogram10(x));
    Ok(out)
}

fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn mobility(x: &[f64], dx: &[f64]) -> f64 {
    let vx = variance(x);
    if vx > 0.0 {
        (variance(dx) / vx).sqrt()
    } else {
        0.0
    }
}

/// Hjorth mobility and complexity; zero for constant signals.
fn hjorth(x: &[f64]) -> (f64, f64) {
    let dx = diff(x);
    let ddx = diff(&dx);
    let mob = mobility(x, &dx);
    let mob_d = mobility(&dx, &ddx);
    let com = if mob > 0.0 { mob_d / mob } else { 0.0 };
    (mob, com)
}

/// Scales 1, 2, 4, ... up to 16 (or n/4 for short windows).
fn dyadic_scales(n: usize) -> Vec<usize> {
    let mut scales = vec![1usize];
    while scales.len() < 5 && scales[scales.len() - 1] * 2 <= (n / 4).max(2) {
        scales.push(scales[scales.len() - 1] * 2);
    }
    scales
}

/// Higuchi fractal dimension: slope of ln L(k) against ln(1/k) over `scales`.
///
/// Returns 0 for signals with zero curve length at any scale.
pub fn higuchi_fd(x: &[f64], scales: &[usize]) -> f64 {
    let n = x.len();
    let mut pts = Vec::with_capacity(scales.len());
    for &k in scales {
        if k == 0 || k >= n {
            continue;
        }
        let mut lk = 0.0;
        let mut used = 0usize;
        for m in 0..k {
            let steps = (n - 1 - m) / k;
            if steps == 0 {
                continue;
            }
            let mut len = 0.0;
            for i in 1..=steps {
                len += (x[m + i * k] - x[m + (i - 1) * k]).abs();
            }
            let norm = (n - 1) as f64 / (steps * k) as f64;
            lk += len * norm / k as f64;
            used += 1;
        }
        if used == 0 {
            continue;
        }
        lk /= used as f64;
        if lk <= 0.0 {
            return 0.0;
        }
        pts.push(((1.0 / k as f64).ln(), lk.ln()));
    }
    if pts.len() < 2 {
        return 0.0;
    }
    let np = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in &pts {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

fn mav_slope(x: &[f64]) -> f64 {
    let n = x.len();
    let bounds = [0, n / 3, 2 * n / 3, n];
    let mavs: Vec<f64> = bounds
        .windows(2)
        .map(|b| {
            let seg = &x[b[0]..b[1]];
            seg.iter().map(|v| v.abs()).sum::<f64>() / seg.len() as f64
        })
        .collect();
    ((mavs[1] - mavs[0]) + (mavs[2] - mavs[1])) / 2.0
}

/// Linear-interpolation percentile of |x| (`q` in [0, 1]).
fn abs_percentile(x: &[f64], q: f64) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| p.total_cmp(q));
    let pos = q * (a.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    a[lo] + (a[hi] - a[lo]) * (pos - lo as f64)
}

/// Proportions in 10 equal-width bins over [min, max]; a constant window is
/// binned over [v - 0.5, v + 0.5] so its mass lands in the middle bin.
fn histogram10(x: &[f64]) -> [f64; 10] {
    let mut lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / 10.0;
    let mut counts = [0.0; 10];
    for &v in x {
        let b = (((v - lo) / width) as usize).min(9);
        counts[b] += 1.0;
    }
    let n = x.len() as f64;
    counts.map(|c| c / n)
}
