//! One-sided Jacobi SVD for the small dense matrices used here.

/// Thin SVD: `a = u * diag(s) * v^T` with `s` sorted descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub rows: usize,
    pub cols: usize,
    /// `rows x k`, row-major.
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    /// `cols x k`, row-major.
    pub v: Vec<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn left(&self, idx: usize) -> Vec<f64> {
        let k = self.rank();
        (0..self.rows).map(|r| self.u[r * k + idx]).collect()
    }

    pub fn right(&self, idx: usize) -> Vec<f64> {
        let k = self.rank();
        (0..self.cols).map(|c| self.v[c * k + idx]).collect()
    }
}

const OFF_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 200;

/// SVD of a `rows x cols` row-major matrix.
pub fn svd(a: &[f64], rows: usize, cols: usize) -> Svd {
    assert_eq!(a.len(), rows * cols);
    if cols > rows {
        let t: Vec<f64> = (0..cols).flat_map(|c| (0..rows).map(move |r| a[r * cols + c])).collect();
        let s = svd(&t, cols, rows);
        return Svd { rows, cols, u: s.v, s: s.s, v: s.u };
    }
    let (m, n) = (rows, cols);
    let mut u = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..m {
                    let (x, y) = (u[r * n + i], u[r * n + j]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let measure = gamma.abs() / (alpha * beta).sqrt();
                off = off.max(measure);
                if measure < OFF_TOL {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let (x, y) = (u[r * n + i], u[r * n + j]);
                    u[r * n + i] = c * x - s * y;
                    u[r * n + j] = s * x + c * y;
                }
                for r in 0..n {
                    let (x, y) = (v[r * n + i], v[r * n + j]);
                    v[r * n + i] = c * x - s * y;
                    v[r * n + j] = s * x + c * y;
                }
            }
        }
        if off < OFF_TOL {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| (0..m).map(|r| u[r * n + j].powi(2)).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut uu = vec![0.0; m * n];
    let mut vv = vec![0.0; n * n];
    let mut ss = vec![0.0; n];
    for (k, &j) in order.iter().enumerate() {
        ss[k] = norms[j];
        for r in 0..m {
            uu[r * n + k] = if norms[j] > 0.0 { u[r * n + j] / norms[j] } else { 0.0 };
        }
        for r in 0..n {
            vv[r * n + k] = v[r * n + j];
        }
    }
    Svd { rows: m, cols: n, u: uu, s: ss, v: vv }
}
