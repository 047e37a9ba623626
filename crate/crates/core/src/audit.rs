use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::lmm::LmmFit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdrFamily {
    /// One family over every feature-demographic slope.
    Joint,
    /// A separate family per demographic.
    PerDemographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub fdr_family: FdrFamily,
    pub p_threshold: f64,
    pub eta2_threshold: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { fdr_family: FdrFamily::Joint, p_threshold: 0.05, eta2_threshold: 0.06 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub feature_name: String,
    pub demographic_name: String,
    pub beta: f64,
    pub p_raw: f64,
    pub p_fdr: f64,
    pub eta2_partial: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSensitivitySummary {
    pub feature_name: String,
    pub n_significant: usize,
    pub eta2_sum: f64,
    pub eta2_mean: f64,
    pub eta2_max: f64,
    /// Significant demographics, strongest first.
    pub top_demographics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub demographic: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutput {
    pub results: Vec<SensitivityResult>,
    pub summaries: Vec<FeatureSensitivitySummary>,
    pub distributions: Vec<BoxStats>,
    pub n_significant: usize,
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn bh_fdr(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adj = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        adj[i] = running.min(1.0);
    }
    adj
}

/// Collects slope results from fits and adjusts p-values per `cfg`.
pub fn collect_results(fits: &[LmmFit], cfg: &AuditConfig) -> Vec<SensitivityResult> {
    let mut results = Vec::new();
    for f in fits {
        for j in 1..f.beta.len() {
            results.push(SensitivityResult {
                feature_name: f.feature_name.clone(),
                demographic_name: f.coef_names[j].clone(),
                beta: f.beta[j],
                p_raw: f.p[j],
                p_fdr: f.p[j],
                eta2_partial: f.eta2_partial[j - 1],
                significant: false,
            });
        }
    }
    adjust(&mut results, cfg.fdr_family);
    results
}

fn adjust(results: &mut [SensitivityResult], family: FdrFamily) {
    match family {
        FdrFamily::Joint => {
            let adj = bh_fdr(&results.iter().map(|r| r.p_raw).collect::<Vec<_>>());
            results.iter_mut().zip(adj).for_each(|(r, a)| r.p_fdr = a);
        }
        FdrFamily::PerDemographic => {
            for demo in demographic_order(results) {
                let idx: Vec<usize> = (0..results.len()).filter(|&i| results[i].demographic_name == demo).collect();
                let adj = bh_fdr(&idx.iter().map(|&i| results[i].p_raw).collect::<Vec<_>>());
                for (i, a) in idx.into_iter().zip(adj) {
                    results[i].p_fdr = a;
                }
            }
        }
    }
}

fn demographic_order(results: &[SensitivityResult]) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for r in results {
        if !seen.contains(&r.demographic_name) {
            seen.push(r.demographic_name.clone());
        }
    }
    seen
}

pub fn is_significant(p_fdr: f64, eta2: f64, cfg: &AuditConfig) -> bool {
    p_fdr < cfg.p_threshold && eta2 >= cfg.eta2_threshold
}

/// Sets the dual-threshold flags and returns the number of significant pairs.
pub fn apply_dual_threshold(results: &mut [SensitivityResult], cfg: &AuditConfig) -> usize {
    let mut n = 0;
    for r in results.iter_mut() {
        r.significant = is_significant(r.p_fdr, r.eta2_partial, cfg);
        n += usize::from(r.significant);
    }
    n
}

fn rank_order(a: &FeatureSensitivitySummary, b: &FeatureSensitivitySummary) -> Ordering {
    b.n_significant
        .cmp(&a.n_significant)
        .then(b.eta2_max.total_cmp(&a.eta2_max))
        .then_with(|| a.feature_name.cmp(&b.feature_name))
}

/// Per-feature aggregates ranked by (count desc, max eta2 desc, name asc).
pub fn aggregate_features(results: &[SensitivityResult]) -> Vec<FeatureSensitivitySummary> {
    let mut features: Vec<&str> = Vec::new();
    for r in results {
        if features.last() != Some(&r.feature_name.as_str()) && !features.contains(&r.feature_name.as_str()) {
            features.push(&r.feature_name);
        }
    }
    let mut out: Vec<FeatureSensitivitySummary> = features
        .into_iter()
        .map(|name| {
            let rows: Vec<&SensitivityResult> = results.iter().filter(|r| r.feature_name == name).collect();
            let eta2_sum: f64 = rows.iter().map(|r| r.eta2_partial).sum();
            let eta2_max = rows.iter().map(|r| r.eta2_partial).fold(f64::NEG_INFINITY, f64::max).max(0.0);
            let mut sig: Vec<&&SensitivityResult> = rows.iter().filter(|r| r.significant).collect();
            sig.sort_by(|a, b| b.eta2_partial.total_cmp(&a.eta2_partial).then_with(|| a.demographic_name.cmp(&b.demographic_name)));
            FeatureSensitivitySummary {
                feature_name: name.to_string(),
                n_significant: sig.len(),
                eta2_sum,
                eta2_mean: if rows.is_empty() { 0.0 } else { eta2_sum / rows.len() as f64 },
                eta2_max,
                top_demographics: sig.iter().map(|r| r.demographic_name.clone()).collect(),
            }
        })
        .collect();
    out.sort_by(rank_order);
    out
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(demographic: &str, values: &[f64]) -> BoxStats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
    BoxStats {
        demographic: demographic.to_string(),
        n: v.len(),
        min: v.first().copied().unwrap_or(0.0),
        q1,
        median: quantile_sorted(&v, 0.5),
        q3,
        max: v.last().copied().unwrap_or(0.0),
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
    }
}

/// Boxplot statistics of partial eta2 per demographic, by descending median.
pub fn effectsize_distributions(results: &[SensitivityResult]) -> Vec<BoxStats> {
    let mut out: Vec<BoxStats> = demographic_order(results)
        .iter()
        .map(|d| {
            let vals: Vec<f64> = results.iter().filter(|r| &r.demographic_name == d).map(|r| r.eta2_partial).collect();
            box_stats(d, &vals)
        })
        .collect();
    out.sort_by(|a, b| b.median.total_cmp(&a.median).then_with(|| a.demographic.cmp(&b.demographic)));
    out
}

pub fn run_audit(fits: &[LmmFit], cfg: &AuditConfig) -> AuditOutput {
    let mut results = collect_results(fits, cfg);
    let n_significant = apply_dual_threshold(&mut results, cfg);
    let summaries = aggregate_features(&results);
    let distributions = effectsize_distributions(&results);
    AuditOutput { results, summaries, distributions, n_significant }
}

pub fn sensitivity_csv(results: &[SensitivityResult], preamble: &str) -> String {
    let mut out = String::from(preamble);
    out.push_str("feature,demographic,beta,p_raw,p_fdr,eta2_partial,significant\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.feature_name, r.demographic_name, r.beta, r.p_raw, r.p_fdr, r.eta2_partial, r.significant
        ));
    }
    out
}

pub fn summary_csv(summaries: &[FeatureSensitivitySummary], preamble: &str) -> String {
    let mut out = String::from(preamble);
    out.push_str("rank,feature,n_significant,eta2_sum,eta2_mean,eta2_max,top_demographics\n");
    for (i, s) in summaries.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i + 1,
            s.feature_name,
            s.n_significant,
            s.eta2_sum,
            s.eta2_mean,
            s.eta2_max,
            s.top_demographics.join(";")
        ));
    }
    out
}

pub fn distributions_csv(stats: &[BoxStats], preamble: &str) -> String {
    let mut out = String::from(preamble);
    out.push_str("demographic,n,min,q1,median,q3,max,whisker_low,whisker_high,n_outliers\n");
    for b in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            b.demographic, b.n, b.min, b.q1, b.median, b.q3, b.max, b.whisker_low, b.whisker_high, b.outliers.len()
        ));
    }
    out
}
