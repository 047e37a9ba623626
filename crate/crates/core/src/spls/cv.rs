use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{apply_stats, column_stats, fit_spls, standardize_columns, SplsError};

/// Conventional Q2 cutoff for retaining a PLS component.
pub const Q2_THRESHOLD: f64 = 0.0975;

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Fold assignment: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

fn fold_press(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    test: &[usize],
    train: &[usize],
    fold: usize,
    keep_x: usize,
    n_comp: usize,
) -> Result<Vec<f64>, SplsError> {
    let (xtr, ytr) = (rows(x, train), rows(y, train));
    let (sx, sy) = (column_stats(&xtr), column_stats(&ytr));
    if let Some(column) = sy.iter().position(|&(_, sd)| sd <= 0.0) {
        return Err(SplsError::ZeroVarianceFold { fold, column });
    }
    let model = fit_spls(&apply_stats(&xtr, &sx), &apply_stats(&ytr, &sy), keep_x, n_comp)?;
    let xte = apply_stats(&rows(x, test), &sx);
    let yte = apply_stats(&rows(y, test), &sy);
    let mut press = vec![f64::NAN; n_comp];
    for (h, slot) in press.iter_mut().enumerate().take(model.n_components()) {
        let pred = &xte * model.coefficients(h + 1);
        *slot = (&yte - pred).norm_squared();
    }
    Ok(press)
}

/// Q2 per component from k-fold cross-validation; deterministic given `seed`.
pub fn q2_crossval(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    keep_x: usize,
    n_comp: usize,
    k_folds: usize,
    seed: u64,
) -> Result<Vec<f64>, SplsError> {
    let n = x.nrows();
    if k_folds < 2 || k_folds > n {
        return Err(SplsError::Invalid(format!("need 2 <= folds <= {n}, got {k_folds}")));
    }
    if y.nrows() != n {
        return Err(SplsError::RowMismatch { x: n, y: y.nrows() });
    }
    let assign = fold_assignment(n, k_folds, seed);
    let split = |f: usize| {
        let test: Vec<usize> = (0..n).filter(|&i| assign[i] == f).collect();
        let train: Vec<usize> = (0..n).filter(|&i| assign[i] != f).collect();
        fold_press(x, y, &test, &train, f, keep_x, n_comp)
    };
    #[cfg(feature = "parallel")]
    let per_fold: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..k_folds).into_par_iter().map(split).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_fold: Vec<Vec<f64>> = (0..k_folds).map(split).collect::<Result<_, _>>()?;

    let xs = standardize_columns(x).unwrap_or_else(|_| apply_stats(x, &column_stats(x)));
    let ys = standardize_columns(y).map_err(|column| SplsError::ZeroVarianceFold { fold: k_folds, column })?;
    let full = fit_spls(&xs, &ys, keep_x, n_comp)?;

    let mut q2 = Vec::with_capacity(full.n_components());
    let mut rss_prev = ys.norm_squared();
    for h in 0..full.n_components() {
        let press: f64 = per_fold.iter().map(|p| p[h]).sum();
        if !press.is_finite() {
            break;
        }
        q2.push(1.0 - press / rss_prev);
        rss_prev = (&ys - &xs * full.coefficients(h + 1)).norm_squared();
    }
    Ok(q2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = fold_assignment(23, 5, 9);
        assert_eq!(a, fold_assignment(23, 5, 9));
        for f in 0..5 {
            let c = a.iter().filter(|&&x| x == f).count();
            assert!(c == 4 || c == 5);
        }
    }
}
