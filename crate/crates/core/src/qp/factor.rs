//! Updatable orthogonal factorization `A = J₁ R` of a column set `A` (n × q),
//! with `J = [J₁ J₂]` a full n × n orthogonal matrix.
//!
//! Columns are appended and deleted with Givens rotations, so an update costs
//! O(n²) for an append and O(n·q) for a delete.

use crate::linalg::dot;

#[derive(Debug, Clone)]
pub(crate) struct OrthoFactor {
    n: usize,
    /// Column-major: column `k` is `j[k*n .. (k+1)*n]`.
    j: Vec<f64>,
    /// Upper-triangular factor stored by column; column `k` holds `k + 1` entries.
    r: Vec<Vec<f64>>,
}

/// Outcome of trying to append a column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Append {
    Added,
    /// Column lies (numerically) in the span of the current columns.
    Dependent,
}

#[inline]
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    // returns (c, s, r) with [c s; -s c] [a; b] = [r; 0]
    if b == 0.0 {
        (1.0, 0.0, a)
    } else {
        let r = a.hypot(b);
        (a / r, b / r, r)
    }
}

impl OrthoFactor {
    pub fn new(n: usize) -> Self {
        let mut j = vec![0.0; n * n];
        for k in 0..n {
            j[k * n + k] = 1.0;
        }
        Self {
            n,
            j,
            r: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.r.len()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.j[k * self.n..(k + 1) * self.n]
    }

    /// `Jᵀ v`
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|k| dot(self.column(k), v)).collect()
    }

    /// `Σ_k coeffs[k] · J[:, offset + k]`
    pub fn combine(&self, offset: usize, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                crate::linalg::axpy(c, self.column(offset + k), &mut out);
            }
        }
        out
    }

    fn rotate_columns(&mut self, a: usize, b: usize, c: f64, s: f64) {
        let n = self.n;
        let (lo, hi) = (a.min(b), a.max(b));
        let (head, tail) = self.j.split_at_mut(hi * n);
        let (ca, cb) = if a < b {
            (&mut head[lo * n..lo * n + n], &mut tail[..n])
        } else {
            (&mut tail[..n], &mut head[lo * n..lo * n + n])
        };
        for (x, y) in ca.iter_mut().zip(cb.iter_mut()) {
            let (xa, yb) = (*x, *y);
            *x = c * xa + s * yb;
            *y = -s * xa + c * yb;
        }
    }

    /// Appends `v` as a new column given `d = Jᵀ v` (as returned by `project`).
    /// `rel_tol` is the smallest admissible `‖d₂‖ / ‖v‖`.
    pub fn append_projected(&mut self, mut d: Vec<f64>, v_norm: f64, rel_tol: f64) -> Append {
        let q = self.rank();
        let tail: f64 = d[q..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(tail > rel_tol * v_norm) {
            return Append::Dependent;
        }
        for k in (q + 1..self.n).rev() {
            if d[k] == 0.0 {
                continue;
            }
            let (c, s, r) = givens(d[k - 1], d[k]);
            d[k - 1] = r;
            d[k] = 0.0;
            self.rotate_columns(k - 1, k, c, s);
        }
        d.truncate(q + 1);
        self.r.push(d);
        Append::Added
    }

    pub fn append(&mut self, v: &[f64], rel_tol: f64) -> Append {
        let d = self.project(v);
        self.append_projected(d, crate::linalg::norm2(v), rel_tol)
    }

    /// Deletes column `l`, restoring triangularity with rotations.
    pub fn remove(&mut self, l: usize) {
        let q = self.rank();
        assert!(l < q);
        self.r.remove(l);
        // columns l.. now have one subdiagonal entry at row k+1
        for k in l..q - 1 {
            let a = self.r[k][k];
            let b = self.r[k][k + 1];
            let (c, s, r) = givens(a, b);
            self.r[k][k] = r;
            self.r[k].truncate(k + 1);
            for col in self.r.iter_mut().skip(k + 1) {
                let (x, y) = (col[k], col[k + 1]);
                col[k] = c * x + s * y;
                col[k + 1] = -s * x + c * y;
            }
            self.rotate_columns(k, k + 1, c, s);
        }
    }

    /// Solves `R x = b`.
    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let q = self.rank();
        let mut x = b[..q].to_vec();
        for k in (0..q).rev() {
            x[k] /= self.r[k][k];
            let xk = x[k];
            for i in 0..k {
                x[i] -= self.r[k][i] * xk;
            }
        }
        x
    }

    /// Solves `Rᵀ x = b`.
    pub fn solve_rt(&self, b: &[f64]) -> Vec<f64> {
        let q = self.rank();
        let mut x = vec![0.0; q];
        for k in 0..q {
            let col = &self.r[k];
            let s: f64 = (0..k).map(|i| col[i] * x[i]).sum();
            x[k] = (b[k] - s) / col[k];
        }
        x
    }
}
