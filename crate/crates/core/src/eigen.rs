//! Dense symmetric eigendecomposition.
//!
//! Householder tridiagonalization followed by the implicit-shift QL
//! iteration, the classic EISPACK `tred2`/`tql2` pair. Deterministic,
//! allocation-light, and accurate to machine precision for the matrix
//! sizes this crate targets (a few hundred rows).
//!
//! Both routines work on a flat buffer holding the transformation matrix
//! transposed (one column per contiguous row), because the algorithm is
//! column-oriented: the Givens/Householder updates then stream over
//! contiguous memory.

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),

    #[error(
        "QL iteration failed to converge for eigenvalue {index} after {iterations} iterations \
         (matrix inf-norm {inf_norm:.3e}, residual off-diagonal {residual:.3e})"
    )]
    NoConvergence {
        index: usize,
        iterations: usize,
        inf_norm: f64,
        residual: f64,
    },
}

/// Full eigendecomposition of a symmetric matrix.
///
/// `eigenvalues[i]` pairs with column `i` of `eigenvectors`; pairs are
/// sorted by descending eigenvalue (ties keep the solver's output order).
/// The input is assumed symmetric.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

const MAX_QL_ITERATIONS: usize = 50;

/// Columns of the transformation matrix, stored contiguously: entry
/// `(row, col)` of V lives at `vt[col * n + row]`.
struct ColumnMajor {
    vt: Vec<f64>,
    n: usize,
}

impl ColumnMajor {
    fn from_symmetric(matrix: &Array2<f64>) -> Self {
        let n = matrix.nrows();
        let mut vt = vec![0.0; n * n];
        for col in 0..n {
            for row in 0..n {
                vt[col * n + row] = matrix[(row, col)];
            }
        }
        Self { vt, n }
    }

    #[inline(always)]
    fn get(&self, row: usize, col: usize) -> f64 {
        self.vt[col * self.n + row]
    }

    #[inline(always)]
    fn set(&mut self, row: usize, col: usize, value: f64) {
        self.vt[col * self.n + row] = value;
    }

    #[inline(always)]
    fn column(&self, col: usize) -> &[f64] {
        &self.vt[col * self.n..(col + 1) * self.n]
    }

    #[inline(always)]
    fn column_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.vt[col * self.n..(col + 1) * self.n]
    }

    /// Two distinct columns, mutably.
    fn column_pair_mut(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(a < b);
        let (lo, hi) = self.vt.split_at_mut(b * self.n);
        (&mut lo[a * self.n..(a + 1) * self.n], &mut hi[..self.n])
    }
}

/// Decompose a symmetric matrix into eigenvalues and orthonormal eigenvectors.
pub fn symmetric_eigen(matrix: &Array2<f64>) -> Result<SymmetricEigen, EigenError> {
    let (rows, cols) = matrix.dim();
    if rows != cols {
        return Err(EigenError::NotSquare(rows, cols));
    }
    let n = rows;
    if n == 0 {
        return Ok(SymmetricEigen {
            eigenvalues: Vec::new(),
            eigenvectors: Array2::zeros((0, 0)),
        });
    }

    let mut v = ColumnMajor::from_symmetric(matrix);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e, matrix)?;

    // Descending eigenvalue order, stable over the solver's output.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (out_col, &src_col) in order.iter().enumerate() {
        let column = v.column(src_col);
        for row in 0..n {
            eigenvectors[(row, out_col)] = column[row];
        }
    }

    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Householder reduction to symmetric tridiagonal form.
///
/// On exit `v` holds the accumulated orthogonal transformation, `d` the
/// diagonal, and `e[1..]` the subdiagonal.
fn tred2(v: &mut ColumnMajor, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();

    for j in 0..n {
        d[j] = v.get(n - 1, j);
    }

    for i in (1..n).rev() {
        // Scale to avoid under/overflow.
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
                v.set(j, i, 0.0);
            }
        } else {
            // Generate the Householder vector.
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            // Apply the similarity transformation to the remaining rows.
            // Column j of the active block is contiguous in `v`.
            for j in 0..i {
                f = d[j];
                v.set(j, i, f);
                let column_j = v.column(j);
                g = e[j] + column_j[j] * f;
                for k in (j + 1)..i {
                    g += column_j[k] * d[k];
                    e[k] += column_j[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let column_j = v.column_mut(j);
                for k in j..i {
                    column_j[k] -= f * e[k] + g * d[k];
                }
                d[j] = column_j[i - 1];
                column_j[i] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n.saturating_sub(1) {
        let v_ii = v.get(i, i);
        v.set(n - 1, i, v_ii);
        v.set(i, i, 1.0);
        let h = d[i + 1];
        if h != 0.0 {
            {
                let next = v.column(i + 1);
                for (k, item) in d.iter_mut().enumerate().take(i + 1) {
                    *item = next[k] / h;
                }
            }
            for j in 0..=i {
                let mut g = 0.0;
                {
                    let next = v.column(i + 1);
                    let column_j = v.column(j);
                    for k in 0..=i {
                        g += next[k] * column_j[k];
                    }
                }
                let column_j = v.column_mut(j);
                for k in 0..=i {
                    column_j[k] -= g * d[k];
                }
            }
        }
        let next = v.column_mut(i + 1);
        for item in next.iter_mut().take(i + 1) {
            *item = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v.get(n - 1, j);
        v.set(n - 1, j, 0.0);
    }
    v.set(n - 1, n - 1, 1.0);
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on the tridiagonal form produced by
/// [`tred2`]. Accumulated rotations touch column pairs, each contiguous.
fn tql2(
    v: &mut ColumnMajor,
    d: &mut [f64],
    e: &mut [f64],
    original: &Array2<f64>,
) -> Result<(), EigenError> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    let inf_norm = original
                        .rows()
                        .into_iter()
                        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
                        .fold(0.0, f64::max);
                    return Err(EigenError::NoConvergence {
                        index: l,
                        iterations: iter - 1,
                        inf_norm,
                        residual: e[l].abs(),
                    });
                }

                // Implicit shift from the leading 2x2.
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // Implicit QL sweep.
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    // Rotate eigenvector columns i and i+1.
                    let (col_i, col_next) = v.column_pair_mut(i, i + 1);
                    for (x, y) in col_i.iter_mut().zip(col_next.iter_mut()) {
                        let h = *y;
                        *y = s * *x + c * h;
                        *x = c * *x - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
