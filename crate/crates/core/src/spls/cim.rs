use serde::{Deserialize, Serialize};

use super::{SplsError, SplsModel};

/// One agglomeration step. Leaves are `0..n`; the cluster formed at step `s`
/// has id `n + s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CimLayout {
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    /// Cell values in original row/column order, row-major.
    pub cells: Vec<f64>,
    pub row_order: Vec<usize>,
    pub col_order: Vec<usize>,
    pub row_merges: Vec<Merge>,
    pub col_merges: Vec<Merge>,
    pub components: usize,
    pub linkage: String,
    pub metric: String,
}

impl CimLayout {
    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.col_names.len() + col]
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Complete-linkage agglomerative clustering of the rows of `points`.
///
/// Ties go to the pair with the smallest (left, right) cluster ids.
pub fn hac_complete(points: &[Vec<f64>]) -> Vec<Merge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let total = 2 * n - 1;
    let mut dist = vec![vec![f64::INFINITY; total]; total];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; total];
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let d = dist[a][b];
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (d, a, b) = best;
        let id = n + step;
        size[id] = size[a] + size[b];
        active.retain(|&c| c != a && c != b);
        for &c in &active {
            let nd = dist[a][c].max(dist[b][c]);
            dist[id][c] = nd;
            dist[c][id] = nd;
        }
        active.push(id);
        merges.push(Merge { left: a.min(b), right: a.max(b), distance: d, size: size[id] });
    }
    merges
}

/// Leaves in dendrogram order (left subtree first).
pub fn leaf_order(n: usize, merges: &[Merge]) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    if merges.is_empty() {
        return (0..n).collect();
    }
    let mut out = Vec::with_capacity(n);
    let mut stack = vec![n + merges.len() - 1];
    while let Some(c) = stack.pop() {
        if c < n {
            out.push(c);
        } else {
            let m = &merges[c - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    out
}

/// Clustered image map over the first `components` components: cell
/// `(i, j)` is `sum_h u_hi v_hj`.
pub fn build_cim(
    model: &SplsModel,
    components: usize,
    row_names: &[String],
    col_names: &[String],
) -> Result<CimLayout, SplsError> {
    if components == 0 || components > model.n_components() {
        return Err(SplsError::Invalid(format!("cannot render {components} of {} components", model.n_components())));
    }
    let p = model.components[0].u.len();
    let q = model.components[0].v.len();
    let mut cells = vec![0.0; p * q];
    for c in &model.components[..components] {
        for i in 0..p {
            for j in 0..q {
                cells[i * q + j] += c.u[i] * c.v[j];
            }
        }
    }
    let rows: Vec<Vec<f64>> = (0..p).map(|i| cells[i * q..(i + 1) * q].to_vec()).collect();
    let cols: Vec<Vec<f64>> = (0..q).map(|j| (0..p).map(|i| cells[i * q + j]).collect()).collect();
    let row_merges = hac_complete(&rows);
    let col_merges = hac_complete(&cols);
    Ok(CimLayout {
        row_names: row_names.to_vec(),
        col_names: col_names.to_vec(),
        row_order: leaf_order(p, &row_merges),
        col_order: leaf_order(q, &col_merges),
        cells,
        row_merges,
        col_merges,
        components,
        linkage: "complete".into(),
        metric: "euclidean".into(),
    })
}
