//! Sparse PLS (regression mode) with lasso-thresholded feature loadings.

mod cim;
mod cv;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use cim::{build_cim, hac_complete, leaf_order, CimLayout, Merge};
pub use cv::{q2_crossval, Q2_THRESHOLD};

pub const MAX_ITER: usize = 500;
pub const TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SplsError {
    #[error("X'Y is zero; no covariance to model")]
    ZeroCovariance,
    #[error("X has {x} rows but Y has {y}")]
    RowMismatch { x: usize, y: usize },
    #[error("fold {fold}: column {column} has zero variance in the training rows")]
    ZeroVarianceFold { fold: usize, column: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplsConfig {
    pub keep_x: usize,
    pub n_components: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SplsConfig {
    fn default() -> Self {
        Self { keep_x: 50, n_components: 3, folds: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplsComponent {
    /// Feature weights, unit norm, at most `keep_x` nonzeros.
    pub u: Vec<f64>,
    /// Response weights, unit norm.
    pub v: Vec<f64>,
    /// X scores `X_h u`.
    pub scores: Vec<f64>,
    /// X regression loadings used for deflation.
    pub x_loadings: Vec<f64>,
    /// Y regression loadings used for deflation.
    pub y_loadings: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplsModel {
    pub keep_x: usize,
    pub components: Vec<SplsComponent>,
    /// Filled in by cross-validation; empty otherwise.
    pub q2: Vec<f64>,
}

impl SplsModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Coefficients `W (P'W)^-1 D'` (p x q) for the first `h` components.
    pub fn coefficients(&self, h: usize) -> DMatrix<f64> {
        let comps = &self.components[..h];
        let p = comps[0].u.len();
        let q = comps[0].v.len();
        let w = DMatrix::from_fn(p, h, |i, k| comps[k].u[i]);
        let pm = DMatrix::from_fn(p, h, |i, k| comps[k].x_loadings[i]);
        let d = DMatrix::from_fn(q, h, |i, k| comps[k].y_loadings[i]);
        let ptw = pm.transpose() * &w;
        let inv = ptw.clone().try_inverse().unwrap_or_else(|| ptw.pseudo_inverse(1e-12).expect("svd converges"));
        w * inv * d.transpose()
    }

    /// Number of leading components whose Q2 exceeds the retention threshold.
    pub fn retained(&self) -> usize {
        self.q2.iter().take_while(|&&q| q > Q2_THRESHOLD).count()
    }
}

pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    x.signum() * (x.abs() - lambda).max(0.0)
}

/// Population z-score of every column; `None` names the first constant column.
pub fn standardize_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>, usize> {
    let stats = column_stats(m);
    if let Some(j) = stats.iter().position(|&(_, sd)| sd <= 0.0) {
        return Err(j);
    }
    Ok(apply_stats(m, &stats))
}

/// Like [`standardize_columns`] but maps constant columns to zero.
pub fn standardize_lenient(m: &DMatrix<f64>) -> DMatrix<f64> {
    apply_stats(m, &column_stats(m))
}

pub(crate) fn column_stats(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let n = m.nrows() as f64;
    m.column_iter()
        .map(|c| {
            let mean = c.sum() / n;
            let sd = (c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            (mean, sd)
        })
        .collect()
}

pub(crate) fn apply_stats(m: &DMatrix<f64>, stats: &[(f64, f64)]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let (mean, sd) = stats[j];
        if sd > 0.0 {
            (m[(i, j)] - mean) / sd
        } else {
            0.0
        }
    })
}

fn threshold_for(a: &DVector<f64>, keep: usize) -> f64 {
    if keep >= a.len() {
        return 0.0;
    }
    let mut mags: Vec<f64> = a.iter().map(|v| v.abs()).collect();
    mags.sort_by(|x, y| y.total_cmp(x));
    mags[keep]
}

fn unit(v: DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

/// Fits `n_comp` sPLS components on column-standardized `x` and `y`.
pub fn fit_spls(x: &DMatrix<f64>, y: &DMatrix<f64>, keep_x: usize, n_comp: usize) -> Result<SplsModel, SplsError> {
    if x.nrows() != y.nrows() {
        return Err(SplsError::RowMismatch { x: x.nrows(), y: y.nrows() });
    }
    if keep_x == 0 || n_comp == 0 {
        return Err(SplsError::Invalid("keep_x and n_components must be positive".into()));
    }
    let mut xh = x.clone();
    let mut yh = y.clone();
    let mut components = Vec::with_capacity(n_comp);
    for _ in 0..n_comp {
        let m = xh.tr_mul(&yh);
        if m.norm() <= 1e-12 * (x.norm() * y.norm()).max(f64::MIN_POSITIVE) {
            if components.is_empty() {
                return Err(SplsError::ZeroCovariance);
            }
            break;
        }
        let svd = m.clone().svd(false, true);
        let vt = svd.v_t.expect("requested");
        let mut v = DVector::from_iterator(m.ncols(), vt.row(0).iter().copied());
        let mut u = DVector::zeros(m.nrows());
        let mut converged = false;
        let mut iterations = 0;
        while iterations < MAX_ITER {
            iterations += 1;
            let a = &m * &v;
            let lambda = threshold_for(&a, keep_x);
            let un = unit(a.map(|z| soft_threshold(z, lambda))).ok_or(SplsError::ZeroCovariance)?;
            let vn = unit(m.tr_mul(&un)).ok_or(SplsError::ZeroCovariance)?;
            let change = (&un - &u).norm().max((&vn - &v).norm());
            u = un;
            v = vn;
            if change < TOL {
                converged = true;
                break;
            }
        }
        let imax = v.iamax();
        if v[imax] < 0.0 {
            u.neg_mut();
            v.neg_mut();
        }
        let t = &xh * &u;
        let tt = t.norm_squared();
        if tt <= 0.0 {
            return Err(SplsError::ZeroCovariance);
        }
        let c = xh.tr_mul(&t) / tt;
        let d = yh.tr_mul(&t) / tt;
        xh -= &t * c.transpose();
        yh -= &t * d.transpose();
        components.push(SplsComponent {
            u: u.iter().copied().collect(),
            v: v.iter().copied().collect(),
            scores: t.iter().copied().collect(),
            x_loadings: c.iter().copied().collect(),
            y_loadings: d.iter().copied().collect(),
            iterations,
            converged,
        });
    }
    Ok(SplsModel { keep_x, components, q2: Vec::new() })
}

pub fn loadings_csv(model: &SplsModel, feature_names: &[String], demographic_names: &[String], preamble: &str) -> String {
    let mut out = String::from(preamble);
    out.push_str("block,variable,component,loading\n");
    for (h, c) in model.components.iter().enumerate() {
        for (name, v) in feature_names.iter().zip(&c.u) {
            out.push_str(&format!("X,{name},{},{v}\n", h + 1));
        }
        for (name, v) in demographic_names.iter().zip(&c.v) {
            out.push_str(&format!("Y,{name},{},{v}\n", h + 1));
        }
    }
    out
}

pub fn q2_csv(q2: &[f64], preamble: &str) -> String {
    let mut out = String::from(preamble);
    out.push_str("component,q2,retained\n");
    let mut still = true;
    for (h, q) in q2.iter().enumerate() {
        still &= *q > Q2_THRESHOLD;
        out.push_str(&format!("{},{q},{still}\n", h + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn soft_threshold_examples() {
        assert!((soft_threshold(0.5, 0.2) - 0.3).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.1, 0.2), 0.0);
        assert!((soft_threshold(-0.5, 0.2) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn keep_one_selects_max_covariance() {
        let x = standardize_columns(&gaussian(40, 8, 1)).unwrap();
        let y = standardize_columns(&gaussian(40, 3, 2)).unwrap();
        let m = fit_spls(&x, &y, 1, 1).unwrap();
        let u = &m.components[0].u;
        assert_eq!(u.iter().filter(|v| **v != 0.0).count(), 1);
        let v = DVector::from_vec(m.components[0].v.clone());
        let a = x.tr_mul(&y) * v;
        assert_eq!(u.iter().position(|v| *v != 0.0), Some(a.iamax()));
    }

    #[test]
    fn scores_orthogonal_and_covariance_shrinks() {
        let x = standardize_columns(&gaussian(60, 10, 3)).unwrap();
        let y = standardize_columns(&gaussian(60, 4, 4)).unwrap();
        let m = fit_spls(&x, &y, 5, 3).unwrap();
        for a in 0..3 {
            for b in a + 1..3 {
                let ta = DVector::from_vec(m.components[a].scores.clone());
                let tb = DVector::from_vec(m.components[b].scores.clone());
                assert!(ta.dot(&tb).abs() < 1e-8 * ta.norm() * tb.norm());
            }
        }
        let mut xh = x.clone();
        let mut yh = y.clone();
        let mut prev = xh.tr_mul(&yh).norm();
        for c in &m.components {
            let t = DVector::from_vec(c.scores.clone());
            xh -= &t * DVector::from_vec(c.x_loadings.clone()).transpose();
            yh -= &t * DVector::from_vec(c.y_loadings.clone()).transpose();
            let now = xh.tr_mul(&yh).norm();
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn zero_covariance_errors() {
        let x = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let y = DMatrix::from_row_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]);
        assert!(matches!(fit_spls(&x, &y, 1, 1), Err(SplsError::ZeroCovariance)));
    }
}
