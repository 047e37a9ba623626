use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optim::{minimize_box, OptimOptions};
use super::{LmmDesign, LmmError};

/// Bounds on the log variance ratios `ln(sigma2_f / sigma2_residual)`.
const LOG_RATIO_MIN: f64 = -27.631021115928547; // ln 1e-12
const LOG_RATIO_MAX: f64 = 13.815510557964274; // ln 1e6
/// Variance components below this are reported as exactly zero.
pub const COMPONENT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmmOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
}

impl Default for LmmOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-6, max_iter: 200, fd_step: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    pub feature_name: String,
    /// Names of the fixed effects, intercept first.
    pub coef_names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    /// Random-intercept variances, in the design's factor order.
    pub sigma2_random: Vec<f64>,
    pub sigma2_residual: f64,
    /// Partial eta squared for each non-intercept coefficient.
    pub eta2_partial: Vec<f64>,
    pub r2_marginal: f64,
    pub r2_conditional: f64,
    pub n_obs: usize,
    pub df_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub loglik_reml: f64,
    pub deviance_history: Vec<f64>,
}

/// Cross-product blocks shared by every response fitted on one design.
///
/// Random-effect columns are grouped factor by factor; the factor with the
/// most levels comes first so that its diagonal block of `Z'Z` can be
/// eliminated without fill-in.
#[derive(Debug, Clone)]
pub struct LmmProblem {
    n: usize,
    p: usize,
    rank: usize,
    x: DMatrix<f64>,
    xtx: DMatrix<f64>,
    /// Factor order used internally (indices into `design.factors`).
    order: Vec<usize>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    /// Global random-effect column for every observation and ordered factor.
    cols: Vec<Vec<usize>>,
    q: usize,
    q1: usize,
    d11: Vec<f64>,
    ztz_12: DMatrix<f64>,
    ztz_22: DMatrix<f64>,
    ztx: DMatrix<f64>,
    coef_names: Vec<String>,
}

struct Response {
    xty: DVector<f64>,
    zty: DVector<f64>,
    yty: f64,
}

struct Eval {
    deviance: f64,
    beta: DVector<f64>,
    minv: DMatrix<f64>,
    r2: f64,
}

impl LmmProblem {
    pub fn new(design: &LmmDesign) -> Result<Self, LmmError> {
        let n = design.x.nrows();
        let p = design.x.ncols();
        let k = design.factors.len();
        if k == 0 {
            return Err(LmmError::Design("at least one grouping factor is required".into()));
        }
        for f in &design.factors {
            if f.index.len() != n {
                return Err(LmmError::Design(format!("factor {} has {} entries for {n} observations", f.name, f.index.len())));
            }
            if f.n_levels < 2 {
                return Err(LmmError::Design(format!("factor {} needs at least 2 levels", f.name)));
            }
            if let Some(&bad) = f.index.iter().find(|&&l| l >= f.n_levels) {
                return Err(LmmError::Design(format!("factor {} level {bad} out of range", f.name)));
            }
        }
        if n <= p + k {
            return Err(LmmError::Design(format!("{n} observations cannot support {p} fixed effects and {k} factors")));
        }
        let rank = design.x.rank(1e-10 * design.x.norm().max(1.0));
        if rank < p {
            return Err(LmmError::SingularDesign { rank, p });
        }

        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| design.factors[b].n_levels.cmp(&design.factors[a].n_levels).then(a.cmp(&b)));
        let sizes: Vec<usize> = order.iter().map(|&f| design.factors[f].n_levels).collect();
        let mut offsets = Vec::with_capacity(k);
        let mut q = 0;
        for s in &sizes {
            offsets.push(q);
            q += s;
        }
        let q1 = sizes[0];
        let cols: Vec<Vec<usize>> = (0..n)
            .map(|i| order.iter().zip(&offsets).map(|(&f, &o)| o + design.factors[f].index[i]).collect())
            .collect();

        let mut ztz = DMatrix::<f64>::zeros(q, q);
        let mut ztx = DMatrix::<f64>::zeros(q, p);
        for (i, c) in cols.iter().enumerate() {
            for &a in c {
                for &b in c {
                    ztz[(a, b)] += 1.0;
                }
                for j in 0..p {
                    ztx[(a, j)] += design.x[(i, j)];
                }
            }
        }
        let d11 = (0..q1).map(|a| ztz[(a, a)]).collect();
        let ztz_12 = ztz.view((0, q1), (q1, q - q1)).into_owned();
        let ztz_22 = ztz.view((q1, q1), (q - q1, q - q1)).into_owned();
        let mut coef_names = vec!["(Intercept)".to_string()];
        coef_names.extend(design.fixed_names.iter().cloned());
        Ok(Self {
            n,
            p,
            rank,
            xtx: design.x.transpose() * &design.x,
            x: design.x.clone(),
            order,
            offsets,
            sizes,
            cols,
            q,
            q1,
            d11,
            ztz_12,
            ztz_22,
            ztx,
            coef_names,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn n_factors(&self) -> usize {
        self.order.len()
    }

    /// Residual degrees of freedom for the effect-size mapping.
    pub fn df_residual(&self) -> f64 {
        (self.n as f64 - self.rank as f64 - self.n_factors() as f64).max(0.0)
    }

    fn response(&self, y: &[f64]) -> Response {
        let xty = self.x.tr_mul(&DVector::from_column_slice(y));
        let mut zty = DVector::zeros(self.q);
        for (c, &v) in self.cols.iter().zip(y) {
            for &a in c {
                zty[a] += v;
            }
        }
        Response { xty, zty, yty: y.iter().map(|v| v * v).sum() }
    }

    fn lambda(&self, t: &[f64]) -> Vec<f64> {
        let mut lam = vec![0.0; self.q];
        for (f, (&o, &s)) in self.offsets.iter().zip(&self.sizes).enumerate() {
            let l = (0.5 * t[f]).exp();
            lam[o..o + s].iter_mut().for_each(|v| *v = l);
        }
        lam
    }

    /// Profiled REML deviance at log variance ratios `t` (internal factor order).
    fn evaluate(&self, t: &[f64], r: &Response) -> Option<Eval> {
        let (q, q1, p) = (self.q, self.q1, self.p);
        let q2 = q - q1;
        let lam = self.lambda(t);

        // A = Lambda Z'Z Lambda + I, factored blockwise: the leading block is diagonal.
        let l11: Vec<f64> = (0..q1).map(|a| (lam[a] * lam[a] * self.d11[a] + 1.0).sqrt()).collect();
        let mut l21 = DMatrix::<f64>::zeros(q2, q1);
        for a in 0..q1 {
            for b in 0..q2 {
                l21[(b, a)] = lam[a] * self.ztz_12[(a, b)] * lam[q1 + b] / l11[a];
            }
        }
        let mut logdet_l: f64 = l11.iter().map(|v| v.ln()).sum();
        let l22 = if q2 > 0 {
            let mut s = DMatrix::<f64>::from_fn(q2, q2, |i, j| {
                lam[q1 + i] * self.ztz_22[(i, j)] * lam[q1 + j] + if i == j { 1.0 } else { 0.0 }
            });
            s -= &l21 * l21.transpose();
            let chol = Cholesky::new(s)?;
            logdet_l += chol.l_dirty().diagonal().iter().take(q2).map(|v| v.ln()).sum::<f64>();
            Some(chol)
        } else {
            None
        };
        let solve_l = |b: &mut DMatrix<f64>| {
            for a in 0..q1 {
                for j in 0..b.ncols() {
                    b[(a, j)] /= l11[a];
                }
            }
            if let Some(chol) = &l22 {
                let top = b.rows(0, q1).into_owned();
                let mut bottom = b.rows(q1, q2) - &l21 * top;
                chol.l_dirty().solve_lower_triangular_mut(&mut bottom);
                b.rows_mut(q1, q2).copy_from(&bottom);
            }
        };

        let mut cu = DMatrix::from_fn(q, 1, |a, _| lam[a] * r.zty[a]);
        solve_l(&mut cu);
        let mut rzx = DMatrix::from_fn(q, p, |a, j| lam[a] * self.ztx[(a, j)]);
        solve_l(&mut rzx);

        let m = &self.xtx - rzx.tr_mul(&rzx);
        let lx = Cholesky::new(m)?;
        let logdet_x: f64 = lx.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        let rhs = &r.xty - rzx.tr_mul(&cu).column(0);
        let beta = lx.solve(&rhs);
        let r2 = (r.yty - cu.norm_squared() - beta.dot(&rhs)).max(f64::MIN_POSITIVE * r.yty.max(1.0));
        let dfr = (self.n - p) as f64;
        let deviance =
            2.0 * logdet_l + 2.0 * logdet_x + dfr * (1.0 + (2.0 * std::f64::consts::PI * r2 / dfr).ln());
        deviance.is_finite().then(|| Eval { deviance, beta, minv: lx.inverse(), r2 })
    }

    /// Fits one response. `y` is in observation order.
    pub fn fit(&self, feature_name: &str, y: &[f64], opts: &LmmOptions) -> Result<LmmFit, LmmError> {
        if y.len() != self.n {
            return Err(LmmError::Design(format!("response has {} values for {} observations", y.len(), self.n)));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(LmmError::NonFinite { feature: feature_name.to_string(), index: i });
        }
        let k = self.n_factors();
        let mean = y.iter().sum::<f64>() / self.n as f64;
        let ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        if ss <= 1e-24 * (1.0 + mean * mean) * self.n as f64 {
            return Ok(self.degenerate(feature_name, mean));
        }

        let r = self.response(y);
        let lo = vec![LOG_RATIO_MIN; k];
        let hi = vec![LOG_RATIO_MAX; k];
        let optim = OptimOptions { grad_tol: opts.grad_tol, max_iter: opts.max_iter, fd_step: opts.fd_step, ..Default::default() };
        let objective = |t: &[f64]| self.evaluate(t, &r).map_or(f64::INFINITY, |e| e.deviance);
        let res = minimize_box(objective, &vec![0.0; k], &lo, &hi, &optim);
        let ev = self.evaluate(&res.x, &r).ok_or_else(|| LmmError::Numeric(format!("{feature_name}: factorization failed at optimum")))?;
        if !res.converged {
            log::warn!("{feature_name}: REML optimizer stopped after {} iterations (|grad| = {:.2e})", res.iterations, res.grad_norm);
        }

        let sigma2 = ev.r2 / (self.n - self.p) as f64;
        let mut sigma2_random = vec![0.0; k];
        for (pos, &f) in self.order.iter().enumerate() {
            let v = res.x[pos].exp() * sigma2;
            sigma2_random[f] = if v < COMPONENT_FLOOR { 0.0 } else { v };
        }
        let beta: Vec<f64> = ev.beta.iter().copied().collect();
        let se: Vec<f64> = (0..self.p).map(|j| (sigma2 * ev.minv[(j, j)]).max(0.0).sqrt()).collect();
        let t: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 }).collect();
        let p: Vec<f64> = t.iter().map(|&t| wald_p(t)).collect();
        let df = self.df_residual();
        let eta2_partial = t[1..].iter().map(|&t| super::partial_eta2_from_t(t, df)).collect();
        let fixed_var = self.fixed_variance(&beta);
        let (r2_marginal, r2_conditional) = super::r2_from_components(fixed_var, &sigma2_random, sigma2);
        Ok(LmmFit {
            feature_name: feature_name.to_string(),
            coef_names: self.coef_names.clone(),
            beta,
            se,
            t,
            p,
            sigma2_random,
            sigma2_residual: sigma2,
            eta2_partial,
            r2_marginal,
            r2_conditional,
            n_obs: self.n,
            df_residual: df,
            converged: res.converged,
            iterations: res.iterations,
            loglik_reml: -0.5 * ev.deviance,
            deviance_history: res.history,
        })
    }

    fn fixed_variance(&self, beta: &[f64]) -> f64 {
        let fitted: Vec<f64> = (0..self.n).map(|i| (1..self.p).map(|j| self.x[(i, j)] * beta[j]).sum()).collect();
        let m = fitted.iter().sum::<f64>() / self.n as f64;
        fitted.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.n as f64
    }

    fn degenerate(&self, feature_name: &str, mean: f64) -> LmmFit {
        let mut beta = vec![0.0; self.p];
        beta[0] = mean;
        LmmFit {
            feature_name: feature_name.to_string(),
            coef_names: self.coef_names.clone(),
            beta,
            se: vec![0.0; self.p],
            t: vec![0.0; self.p],
            p: vec![1.0; self.p],
            sigma2_random: vec![0.0; self.n_factors()],
            sigma2_residual: 0.0,
            eta2_partial: vec![0.0; self.p - 1],
            r2_marginal: 0.0,
            r2_conditional: 0.0,
            n_obs: self.n,
            df_residual: self.df_residual(),
            converged: true,
            iterations: 0,
            loglik_reml: 0.0,
            deviance_history: Vec::new(),
        }
    }
}

/// Two-tailed normal-reference p-value.
pub fn wald_p(t: f64) -> f64 {
    statrs::function::erf::erfc(t.abs() / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
}
