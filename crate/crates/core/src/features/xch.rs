use super::FeatureError;

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Full channel-by-channel correlation matrix.
pub fn correlation_matrix(channels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let c = channels.len();
    let mut r = vec![vec![0.0; c]; c];
    for i in 0..c {
        r[i][i] = 1.0;
        for j in i + 1..c {
            let v = pearson(&channels[i], &channels[j]);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    r
}

/// Each channel's mean correlation with every other channel.
pub fn compute_xch(channels: &[Vec<f64>]) -> Result<Vec<f64>, FeatureError> {
    let c = channels.len();
    if c < 2 {
        return Err(FeatureError::TooFewChannels(c));
    }
    let r = correlation_matrix(channels);
    Ok((0..c)
        .map(|i| (0..c).filter(|&j| j != i).map(|j| r[i][j]).sum::<f64>() / (c - 1) as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn duplicate_and_negated_channels() {
        let a: Vec<f64> = (0..100).map(|i| ((i * 7919) % 97) as f64).collect();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_relative_eq!(pearson(&a, &a), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pearson(&a, &neg), -1.0, epsilon = 1e-12);
        let m = compute_xch(&[a.clone(), a.clone()]).unwrap();
        assert_relative_eq!(m[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_channel_is_uncorrelated() {
        let a: Vec<f64> = (0..50).map(f64::from).collect();
        assert_eq!(pearson(&a, &[3.0; 50]), 0.0);
    }

    #[test]
    fn needs_two_channels() {
        assert!(compute_xch(&[vec![1.0, 2.0]]).is_err());
    }
}
