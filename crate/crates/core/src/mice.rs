//! Single-chain MICE over the 12 demographic columns.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{DemographicTable, DEMOGRAPHIC_COLUMNS, N_DEMOGRAPHICS, SEX_COLUMN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiceConfig {
    pub n_iter: usize,
    /// Add Gaussian noise scaled by the residual sd to each prediction.
    pub noise: bool,
    pub seed: u64,
}

impl Default for MiceConfig {
    fn default() -> Self {
        Self { n_iter: 10, noise: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedCell {
    pub subject: String,
    pub column: String,
    pub value: f64,
    /// Value after each iteration; the last entry equals `value`.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub cells: Vec<ImputedCell>,
    pub seed: u64,
    pub n_iterations: usize,
    /// Largest absolute cell change between the final two iterations.
    pub max_final_change: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum MiceError {
    #[error("column {0} is entirely missing and cannot be regressed")]
    ColumnAllMissing(&'static str),
    #[error("subject {0} has no observed demographic cells")]
    EmptyRow(String),
    #[error("Sex is missing for subject {0}; it is never imputed")]
    SexMissing(String),
}

/// Columns that cannot be negative.
const NONNEGATIVE: [bool; N_DEMOGRAPHICS] =
    [true, false, true, true, false, false, true, true, true, true, true, true];

fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let svd = design.clone().svd(true, true);
    let tol = svd.singular_values.max() * 1e-12 * design.nrows().max(design.ncols()) as f64;
    svd.solve(y, tol).expect("both singular-vector sets were requested")
}

pub fn mice_impute(
    table: &DemographicTable,
    cfg: &MiceConfig,
) -> Result<(DemographicTable, ImputationReport), MiceError> {
    let n = table.len();
    let mask = table.missing_mask();
    for (i, row) in mask.iter().enumerate() {
        if row.iter().all(|&m| m) {
            return Err(MiceError::EmptyRow(table.subject_ids[i].clone()));
        }
        if row[SEX_COLUMN] {
            return Err(MiceError::SexMissing(table.subject_ids[i].clone()));
        }
    }
    let empty = ImputationReport { cells: Vec::new(), seed: cfg.seed, n_iterations: 0, max_final_change: 0.0 };
    if table.n_missing() == 0 {
        return Ok((table.clone(), empty));
    }

    let mut values = vec![[0.0; N_DEMOGRAPHICS]; n];
    for j in 0..N_DEMOGRAPHICS {
        let observed: Vec<f64> = table.cells.iter().filter_map(|r| r[j]).collect();
        if observed.is_empty() {
            return Err(MiceError::ColumnAllMissing(DEMOGRAPHIC_COLUMNS[j]));
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        for i in 0..n {
            values[i][j] = table.cells[i][j].unwrap_or(mean);
        }
    }

    let incomplete: Vec<usize> = (0..N_DEMOGRAPHICS).filter(|&j| mask.iter().any(|r| r[j])).collect();
    let missing_cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..N_DEMOGRAPHICS).map(move |j| (i, j)))
        .filter(|&(i, j)| mask[i][j])
        .collect();
    let mut traces = vec![Vec::with_capacity(cfg.n_iter); missing_cells.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_change = 0.0;

    for _ in 0..cfg.n_iter {
        let before: Vec<f64> = missing_cells.iter().map(|&(i, j)| values[i][j]).collect();
        for &j in &incomplete {
            let train: Vec<usize> = (0..n).filter(|&i| !mask[i][j]).collect();
            let predictors: Vec<usize> = (0..N_DEMOGRAPHICS).filter(|&k| k != j).collect();
            let p = predictors.len() + 1;
            let design = DMatrix::from_fn(train.len(), p, |r, c| if c == 0 { 1.0 } else { values[train[r]][predictors[c - 1]] });
            let y = DVector::from_iterator(train.len(), train.iter().map(|&i| values[i][j]));
            let coef = least_squares(&design, &y);
            let resid = &y - &design * &coef;
            let rank = design.rank(1e-10 * design.norm().max(1.0));
            let dof = train.len().saturating_sub(rank);
            let sd = if dof > 0 { (resid.norm_squared() / dof as f64).sqrt() } else { 0.0 };
            for i in (0..n).filter(|&i| mask[i][j]) {
                let mut v = coef[0] + predictors.iter().enumerate().map(|(c, &k)| coef[c + 1] * values[i][k]).sum::<f64>();
                if cfg.noise && sd > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v += sd * z;
                }
                if NONNEGATIVE[j] {
                    v = v.max(0.0);
                }
                values[i][j] = v;
            }
        }
        max_change = 0.0f64;
        for (k, &(i, j)) in missing_cells.iter().enumerate() {
            max_change = max_change.max((values[i][j] - before[k]).abs());
            traces[k].push(values[i][j]);
        }
    }

    let mut out = table.clone();
    let mut cells = Vec::with_capacity(missing_cells.len());
    for (k, &(i, j)) in missing_cells.iter().enumerate() {
        out.cells[i][j] = Some(values[i][j]);
        cells.push(ImputedCell {
            subject: table.subject_ids[i].clone(),
            column: DEMOGRAPHIC_COLUMNS[j].to_string(),
            value: values[i][j],
            trace: std::mem::take(&mut traces[k]),
        });
    }
    Ok((out, ImputationReport { cells, seed: cfg.seed, n_iterations: cfg.n_iter, max_final_change: max_change }))
}
