//! Crossed random-intercept linear mixed models fitted by profiled REML.

mod fit;
pub mod optim;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{DemographicTable, DEMOGRAPHIC_COLUMNS, N_DEMOGRAPHICS, SEX_COLUMN};
use crate::features::FeatureMatrix;

pub use fit::{wald_p, LmmFit, LmmOptions, LmmProblem, COMPONENT_FLOOR};

#[derive(Debug, thiserror::Error)]
pub enum LmmError {
    #[error("subject {0} has no demographic row")]
    MissingSubject(String),
    #[error("demographic {column} is missing for subject {subject}; impute first")]
    MissingCell { subject: String, column: String },
    #[error("demographic column {0} has zero variance")]
    ZeroVariance(String),
    #[error("fixed-effect design is singular (rank {rank} < {p})")]
    SingularDesign { rank: usize, p: usize },
    #[error("invalid design: {0}")]
    Design(String),
    #[error("non-finite response for {feature} at observation {index}")]
    NonFinite { feature: String, index: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingFactor {
    pub name: String,
    pub levels: Vec<String>,
    pub n_levels: usize,
    /// Level of every observation.
    pub index: Vec<usize>,
}

impl GroupingFactor {
    pub fn from_labels<T: Ord + Clone + ToString>(name: &str, labels: &[T]) -> Self {
        let mut uniq: Vec<T> = labels.to_vec();
        uniq.sort();
        uniq.dedup();
        let index = labels.iter().map(|l| uniq.binary_search(l).expect("label present")).collect();
        Self { name: name.to_string(), n_levels: uniq.len(), levels: uniq.iter().map(ToString::to_string).collect(), index }
    }
}

/// Fixed design (intercept in column 0) plus grouping factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmDesign {
    pub fixed_names: Vec<String>,
    pub x: DMatrix<f64>,
    pub factors: Vec<GroupingFactor>,
}

impl LmmDesign {
    /// Prepends the intercept column to `covariates` (n x k).
    pub fn with_intercept(fixed_names: Vec<String>, covariates: &DMatrix<f64>, factors: Vec<GroupingFactor>) -> Self {
        let n = covariates.nrows();
        let x = DMatrix::from_fn(n, covariates.ncols() + 1, |i, j| if j == 0 { 1.0 } else { covariates[(i, j - 1)] });
        Self { fixed_names, x, factors }
    }
}

/// Responses and design ready for fitting.
#[derive(Debug, Clone)]
pub struct StandardizedData {
    pub design: LmmDesign,
    pub feature_names: Vec<String>,
    /// One z-scored response vector per feature, in observation order.
    pub responses: Vec<Vec<f64>>,
    /// Mean and population sd of each demographic over the modelled subjects.
    pub column_stats: Vec<(f64, f64)>,
}

/// Population z-score; `None` when the sd is zero.
pub fn zscore(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    (sd > 0.0 && sd.is_finite()).then(|| values.iter().map(|v| (v - mean) / sd).collect())
}

pub fn standardize_design(features: &FeatureMatrix, demo: &DemographicTable) -> Result<StandardizedData, LmmError> {
    let subjects = features.subjects();
    let mut rows = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let r = demo.row_of(s).ok_or_else(|| LmmError::MissingSubject(s.clone()))?;
        let mut vals = [0.0; N_DEMOGRAPHICS];
        for (j, v) in vals.iter_mut().enumerate() {
            *v = demo.cells[r][j].ok_or_else(|| LmmError::MissingCell {
                subject: s.clone(),
                column: DEMOGRAPHIC_COLUMNS[j].to_string(),
            })?;
        }
        rows.push(vals);
    }

    let mut standardized = vec![[0.0; N_DEMOGRAPHICS]; subjects.len()];
    let mut column_stats = Vec::with_capacity(N_DEMOGRAPHICS);
    for j in 0..N_DEMOGRAPHICS {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64).sqrt();
        if sd <= 0.0 {
            return Err(LmmError::ZeroVariance(DEMOGRAPHIC_COLUMNS[j].to_string()));
        }
        column_stats.push((mean, sd));
        let scale = if j == SEX_COLUMN { 1.0 } else { sd };
        for (out, v) in standardized.iter_mut().zip(&col) {
            out[j] = (v - mean) / scale;
        }
    }

    let subject_pos = |s: &str| subjects.iter().position(|x| x == s).expect("subject listed");
    let obs_subject: Vec<usize> = features.rows.iter().map(|r| subject_pos(&r.subject)).collect();
    let covariates = DMatrix::from_fn(features.n_rows(), N_DEMOGRAPHICS, |i, j| standardized[obs_subject[i]][j]);
    let factors = vec![
        GroupingFactor {
            name: "subject".into(),
            levels: subjects.clone(),
            n_levels: subjects.len(),
            index: obs_subject,
        },
        GroupingFactor::from_labels("gesture", &features.rows.iter().map(|r| r.gesture).collect::<Vec<_>>()),
        GroupingFactor::from_labels("channel", &features.rows.iter().map(|r| r.channel).collect::<Vec<_>>()),
    ];
    let design = LmmDesign::with_intercept(DEMOGRAPHIC_COLUMNS.iter().map(|s| s.to_string()).collect(), &covariates, factors);

    let responses = (0..features.n_features())
        .map(|j| {
            let col = features.column(j);
            zscore(&col).unwrap_or_else(|| vec![0.0; col.len()])
        })
        .collect();
    Ok(StandardizedData { design, feature_names: features.feature_names.clone(), responses, column_stats })
}

/// Fits every response on one shared design; output order matches input.
pub fn fit_all(data: &StandardizedData, opts: &LmmOptions) -> Result<Vec<LmmFit>, LmmError> {
    let problem = LmmProblem::new(&data.design)?;
    let one = |j: usize| problem.fit(&data.feature_names[j], &data.responses[j], opts);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..data.responses.len()).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..data.responses.len()).map(one).collect()
    }
}

/// `t^2 / (t^2 + df)`.
pub fn partial_eta2_from_t(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    if t2 == 0.0 || df <= 0.0 {
        0.0
    } else if t2.is_finite() {
        t2 / (t2 + df)
    } else {
        1.0 - f64::EPSILON
    }
}

pub fn partial_eta2(fit: &LmmFit) -> Vec<f64> {
    fit.t[1..].iter().map(|&t| partial_eta2_from_t(t, fit.df_residual)).collect()
}

pub(crate) fn r2_from_components(fixed_var: f64, random: &[f64], residual: f64) -> (f64, f64) {
    let rand: f64 = random.iter().sum();
    let total = fixed_var + rand + residual;
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    ((fixed_var / total).clamp(0.0, 1.0), ((fixed_var + rand) / total).clamp(0.0, 1.0))
}

/// (marginal, conditional) R^2 of a fit.
pub fn r2_decomposition(fit: &LmmFit) -> (f64, f64) {
    (fit.r2_marginal, fit.r2_conditional)
}

pub fn results_csv(fits: &[LmmFit], preamble: &str) -> String {
    let mut out = String::from(preamble);
    out.push_str("feature,demographic,beta,se,t,p,eta2_partial\n");
    for f in fits {
        for j in 1..f.beta.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                f.feature_name, f.coef_names[j], f.beta[j], f.se[j], f.t[j], f.p[j], f.eta2_partial[j - 1]
            ));
        }
    }
    out
}

pub fn variance_csv(fits: &[LmmFit], factor_names: &[String], preamble: &str) -> String {
    let mut out = String::from(preamble);
    out.push_str("feature");
    for n in factor_names {
        out.push_str(&format!(",sigma2_{n}"));
    }
    out.push_str(",sigma2_residual,r2_marginal,r2_conditional,n_obs,converged,iterations,loglik_reml\n");
    for f in fits {
        out.push_str(&f.feature_name);
        for v in &f.sigma2_random {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(
            ",{},{},{},{},{},{},{}\n",
            f.sigma2_residual, f.r2_marginal, f.r2_conditional, f.n_obs, f.converged, f.iterations, f.loglik_reml
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn zscore_examples() {
        let z = zscore(&[1.0, 2.0, 3.0]).unwrap();
        assert!((z[0] + 1.224744871391589).abs() < 1e-12 && z[1].abs() < 1e-15);
        let again = zscore(&z).unwrap();
        assert!(z.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(zscore(&[4.0, 4.0]).is_none());
    }

    #[test]
    fn eta2_identities() {
        assert_eq!(partial_eta2_from_t(0.0, 100.0), 0.0);
        assert!((partial_eta2_from_t(10.0, 100.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_way_balanced_closed_form() {
        let (a, m) = (12, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut y = Vec::new();
        let mut idx = Vec::new();
        for g in 0..a {
            let u: f64 = StandardNormal.sample(&mut rng);
            for _ in 0..m {
                let e: f64 = StandardNormal.sample(&mut rng);
                y.push(2.0 + 1.5 * u + e);
                idx.push(g);
            }
        }
        let n = y.len();
        let factor = GroupingFactor { name: "g".into(), levels: (0..a).map(|g| g.to_string()).collect(), n_levels: a, index: idx };
        let design = LmmDesign { fixed_names: vec![], x: DMatrix::from_element(n, 1, 1.0), factors: vec![factor] };
        let fit = LmmProblem::new(&design).unwrap().fit("y", &y, &LmmOptions::default()).unwrap();

        let grand = y.iter().sum::<f64>() / n as f64;
        let means: Vec<f64> = (0..a).map(|g| y[g * m..(g + 1) * m].iter().sum::<f64>() / m as f64).collect();
        let ssb: f64 = means.iter().map(|mu| m as f64 * (mu - grand).powi(2)).sum();
        let ssw: f64 = (0..n).map(|i| (y[i] - means[i / m]).powi(2)).sum();
        let msb = ssb / (a - 1) as f64;
        let msw = ssw / (n - a) as f64;
        assert!(msb > msw);
        assert!((fit.sigma2_residual - msw).abs() < 1e-6, "{} vs {msw}", fit.sigma2_residual);
        assert!((fit.sigma2_random[0] - (msb - msw) / m as f64).abs() < 1e-6);
        assert!((fit.beta[0] - grand).abs() < 1e-9);
        assert!(fit.converged);
    }
}
