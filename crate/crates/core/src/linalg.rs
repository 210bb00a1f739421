//! Small linear-algebra kernels used by the solvers: a compressed-row
//! stencil matrix, Thomas elimination, conjugate gradients, a banded LU with
//! partial pivoting, and a Sherman–Morrison rank-one correction.

use crate::error::{MemsError, Result};

/// Compressed sparse rows. Rows without entries act as zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut start = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        start.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            start.push(cols.len());
        }
        Self { start, cols, vals }
    }

    pub fn n_rows(&self) -> usize {
        self.start.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.start[i]..self.start[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(c, v)| v * x[c]).sum()
    }
}

/// Thomas elimination for a tridiagonal system. `lower[0]` and
/// `upper[n-1]` are ignored. No pivoting: callers pass diagonally dominant
/// systems.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(MemsError::SingularMatrix);
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(MemsError::SingularMatrix);
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients for a symmetric positive definite operator given as
/// `apply(x, out)`. Stops when `‖r‖ ≤ rel_tol·‖b‖`.
pub fn conjugate_gradient<F>(apply: F, rhs: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= rel_tol * b_norm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(MemsError::SolverNoConvergence { residual: rr.sqrt() / b_norm });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= rel_tol * b_norm {
        Ok(x)
    } else {
        Err(MemsError::SolverNoConvergence { residual: rr.sqrt() / b_norm })
    }
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the `kl` extra super-diagonals that partial pivoting fills in.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        // column offset j - i lies in [-kl, kl + ku]
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Gaussian elimination with partial pivoting (LAPACK `gbtrf` layout).
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl) = (self.n, self.kl);
        let reach = self.kl + self.ku;
        let mut pivots = vec![0usize; n];
        let mut mult = vec![0.0; n * kl.max(1)];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(MemsError::SingularMatrix);
            }
            pivots[k] = p;
            let col_end = (k + reach).min(n - 1);
            if p != k {
                for j in k..=col_end {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let s = self.slot(i, k);
                let m = self.data[s] / pivot;
                self.data[s] = 0.0;
                mult[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=col_end {
                        let (dst, src) = (self.slot(i, j), self.slot(k, j));
                        self.data[dst] -= m * self.data[src];
                    }
                }
            }
        }
        Ok(BandedLu { a: self, pivots, mult })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    a: BandedMatrix,
    pivots: Vec<usize>,
    mult: Vec<f64>,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.a.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let a = &self.a;
        let (n, kl) = (a.n, a.kl);
        let reach = a.kl + a.ku;
        let mut b = rhs.to_vec();
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.mult[k * kl + (i - k - 1)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= a.data[a.slot(i, j)] * b[j];
            }
            b[i] = s / a.data[a.slot(i, i)];
        }
        b
    }
}

/// Solves `(A + u·vᵀ) x = b` given a solver for `A`.
///
/// `x = A⁻¹b − A⁻¹u · (vᵀA⁻¹b) / (1 + vᵀA⁻¹u)`.
pub fn sherman_morrison_solve<S>(solve_a: S, u: &[f64], v: &[f64], b: &[f64]) -> Result<Vec<f64>>
where
    S: Fn(&[f64]) -> Vec<f64>,
{
    let z = solve_a(b);
    let y = solve_a(u);
    let denom = 1.0 + dot(v, &y);
    let scale = dot(v, &y).abs().max(1.0);
    if denom.abs() <= 1e-14 * scale || !denom.is_finite() {
        return Err(MemsError::SingularMatrix);
    }
    let coef = dot(v, &z) / denom;
    Ok(z.iter().zip(&y).map(|(zi, yi)| zi - coef * yi).collect())
}
