//! Box-constrained quasi-Newton minimizer with finite-difference gradients.

#[derive(Debug, Clone)]
pub struct OptimOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub max_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-6, max_iter: 200, fd_step: 1e-4, max_step: 4.0 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

fn gradient(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], fx: f64, lo: &[f64], hi: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let up = (x[i] + h).min(hi[i]);
        let down = (x[i] - h).max(lo[i]);
        probe[i] = up;
        let fu = if up > x[i] { f(&probe) } else { fx };
        probe[i] = down;
        let fd = if down < x[i] { f(&probe) } else { fx };
        probe[i] = x[i];
        g[i] = if up > down { (fu - fd) / (up - down) } else { 0.0 };
    }
    g
}

fn projected(g: &[f64], x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    g.iter()
        .enumerate()
        .map(|(i, &gi)| {
            if (x[i] <= lo[i] && gi > 0.0) || (x[i] >= hi[i] && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0`.
///
/// Every accepted step satisfies an Armijo decrease, so `history` is
/// non-increasing.
pub fn minimize_box(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &OptimOptions,
) -> OptimResult {
    let k = x0.len();
    let mut x: Vec<f64> = x0.iter().enumerate().map(|(i, v)| v.clamp(lo[i], hi[i])).collect();
    let mut fx = f(&x);
    let mut g = gradient(&mut f, &x, fx, lo, hi, opts.fd_step);
    let mut pg = projected(&g, &x, lo, hi);
    let mut hinv = identity(k);
    let mut history = vec![fx];
    let mut converged = norm(&pg) < opts.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut d = direction(&hinv, &pg);
        let slope: f64 = d.iter().zip(&pg).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            hinv = identity(k);
            d = pg.iter().map(|v| -v).collect();
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dmax > opts.max_step {
            d.iter_mut().for_each(|v| *v *= opts.max_step / dmax);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..k).map(|i| (x[i] + alpha * d[i]).clamp(lo[i], hi[i])).collect();
            let moved: f64 = (0..k).map(|i| (trial[i] - x[i]) * pg[i]).sum();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * moved {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            converged = norm(&pg) < 1e-3;
            if !converged && hinv != identity(k) {
                hinv = identity(k);
                continue;
            }
            break;
        };

        let gn = gradient(&mut f, &xn, fxn, lo, hi, opts.fd_step);
        let s: Vec<f64> = (0..k).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..k).map(|i| gn[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        let small_step = norm(&s) < 1e-12 && (fx - fxn).abs() <= 1e-14 * (1.0 + fx.abs());
        x = xn;
        fx = fxn;
        g = gn;
        pg = projected(&g, &x, lo, hi);
        history.push(fx);
        converged = norm(&pg) < opts.grad_tol || (small_step && norm(&pg) < 1e-3);
        if small_step && !converged {
            break;
        }
    }
    OptimResult { grad_norm: norm(&pg), x, value: fx, iterations, converged, history }
}

fn identity(k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn direction(hinv: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    hinv.iter().map(|row| -row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()).collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let k = s.len();
    let hy: Vec<f64> = (0..k).map(|i| (0..k).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    let rho = 1.0 / sy;
    for i in 0..k {
        for j in 0..k {
            h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_interior() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize_box(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &OptimOptions { max_iter: 500, ..Default::default() });
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn active_bound() {
        let f = |x: &[f64]| (x[0] + 3.0).powi(2) + (x[1] - 0.5).powi(2);
        let r = minimize_box(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &OptimOptions::default());
        assert_eq!(r.x[0], -1.0);
        assert!((r.x[1] - 0.5).abs() < 1e-6);
        assert!(r.converged);
    }
}
