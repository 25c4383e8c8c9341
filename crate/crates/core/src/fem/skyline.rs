//! Symmetric variable-band (skyline) storage with an in-place LDL^T factorization.

use crate::{Error, Result};

/// Upper triangle stored column by column, from the first structurally
/// nonzero row down to the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SkylineMatrix {
    n: usize,
    first_row: Vec<usize>,
    col_start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineMatrix {
    /// Creates a zero matrix whose column `j` spans rows `first_row[j]..=j`.
    pub fn with_profile(first_row: Vec<usize>) -> Self {
        let n = first_row.len();
        let mut col_start = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        col_start.push(0);
        for (j, &f) in first_row.iter().enumerate() {
            debug_assert!(f <= j);
            acc += j - f + 1;
            col_start.push(acc);
        }
        SkylineMatrix { n, first_row, col_start, values: vec![0.0; acc] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn stored(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        (r >= self.first_row[c]).then(|| self.col_start[c] + r - self.first_row[c])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.index(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    ///
    /// # Panics
    /// When the entry lies outside the profile.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j).expect("entry outside skyline profile");
        self.values[k] += v;
    }

    /// `self + alpha * other` for matrices sharing a profile.
    pub fn add_scaled(&self, alpha: f64, other: &SkylineMatrix) -> SkylineMatrix {
        assert_eq!(self.first_row, other.first_row, "profiles differ");
        let mut out = self.clone();
        for (v, o) in out.values.iter_mut().zip(&other.values) {
            *v += alpha * o;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n {
            let f = self.first_row[j];
            let col = &self.values[self.col_start[j]..self.col_start[j + 1]];
            let xj = x[j];
            let mut acc = 0.0;
            for (k, &a) in col[..col.len() - 1].iter().enumerate() {
                let i = f + k;
                y[i] += a * xj;
                acc += a * x[i];
            }
            y[j] += acc + col[col.len() - 1] * xj;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Factorizes in place as `L D L^T`; fails on a pivot that is zero relative
    /// to the original diagonal, or on any non-positive pivot when
    /// `require_positive` is set.
    pub fn factorize(&self, require_positive: bool) -> Result<LdlFactor> {
        self.factorize_detail(require_positive)
            .map_err(|(j, d)| Error::Singular(format!("pivot {d:e} at equation {j}")))
    }

    /// Like [`factorize`](Self::factorize), reporting the failing equation and pivot.
    pub fn factorize_detail(&self, require_positive: bool) -> std::result::Result<LdlFactor, (usize, f64)> {
        let mut f = self.clone();
        let n = self.n;
        for j in 0..n {
            let fj = f.first_row[j];
            let sj = f.col_start[j];
            // Column j of U = D L^T: u_ij = a_ij - sum_k l_ki u_kj.
            for i in fj..j {
                let fi = f.first_row[i];
                let si = f.col_start[i];
                let lo = fi.max(fj);
                let mut s = f.values[sj + i - fj];
                // values in column i (rows lo..i) hold l_ki after scaling below,
                // values in column j (rows lo..i) hold u_kj.
                for k in lo..i {
                    s -= f.values[si + k - fi] * f.values[sj + k - fj];
                }
                f.values[sj + i - fj] = s;
            }
            // Scale to L and update the diagonal.
            let mut d = f.values[sj + j - fj];
            let orig = d;
            for i in fj..j {
                let u = f.values[sj + i - fj];
                let di = f.values[f.col_start[i + 1] - 1];
                let l = u / di;
                d -= l * u;
                f.values[sj + i - fj] = l;
            }
            let tiny = 1e-14 * orig.abs().max(f64::MIN_POSITIVE);
            if (require_positive && d <= 0.0) || d.abs() <= tiny {
                return Err((j, d));
            }
            f.values[sj + j - fj] = d;
        }
        Ok(LdlFactor { f })
    }
}

/// `L D L^T` factor stored in skyline form (unit lower triangle by columns, D on the diagonal).
#[derive(Debug, Clone)]
pub struct LdlFactor {
    f: SkylineMatrix,
}

impl LdlFactor {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let f = &self.f;
        let n = f.n;
        // L y = b  (L^T stored by columns as rows of L)
        for j in 0..n {
            let fj = f.first_row[j];
            let sj = f.col_start[j];
            let mut s = x[j];
            for i in fj..j {
                s -= f.values[sj + i - fj] * x[i];
            }
            x[j] = s;
        }
        for j in 0..n {
            x[j] /= f.values[f.col_start[j + 1] - 1];
        }
        for j in (0..n).rev() {
            let fj = f.first_row[j];
            let sj = f.col_start[j];
            let xj = x[j];
            for i in fj..j {
                x[i] -= f.values[sj + i - fj] * xj;
            }
        }
    }

    pub fn negative_pivots(&self) -> usize {
        (0..self.f.n).filter(|&j| self.f.values[self.f.col_start[j + 1] - 1] < 0.0).count()
    }
}
