//! Minimal dense linear algebra for the small systems the integrator solves.
//!
//! Everything in scope is tiny: the mass matrix is `m x m` with `m <= 9` in
//! the bundled problems, and the stage multiplier system is `s*nu x s*nu`
//! with `s <= 8`, `nu <= 3`. Plain O(n^3) kernels over row-major storage are
//! therefore both adequate and easy to audit; no external BLAS is used.

use thiserror::Error;

/// Errors produced by the factorization and solve kernels.
#[derive(Debug, Error)]
pub enum LinalgError {
    /// A Cholesky pivot was non-positive: the matrix is not symmetric
    /// positive definite. For the multiplier Gram matrix this signals a
    /// violation of the constraint-regularity assumption.
    #[error("matrix is not symmetric positive definite (pivot {pivot:e} at row {row})")]
    NotSpd { row: usize, pivot: f64 },
    /// An LU pivot fell below the relative threshold: the system is singular
    /// to working precision. For the multiplier system this signals loss of
    /// full column rank of the constraint Jacobian, or a timestep too large.
    #[error("singular system: |pivot| {pivot:e} below threshold at elimination step {step}")]
    Singular { step: usize, pivot: f64 },
    /// Operands with incompatible dimensions.
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
}

/// Relative pivot threshold for [`lu_solve`]: a pivot with magnitude below
/// `LU_PIVOT_RTOL * max|A|` is treated as zero.
pub const LU_PIVOT_RTOL: f64 = 1e-14;

/// Dense row-major matrix of `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Matrix of zeros.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 1.0;
        }
        a
    }

    /// Matrix with entry `(i, j)` given by `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut a = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                a[(i, j)] = f(i, j);
            }
        }
        a
    }

    /// Matrix from a row-major slice of slices (convenient in tests).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec: x has length {}, need {}", x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// `y = A' x` without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_matvec: x has length {}, need {}", x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += a * x[i];
            }
        }
        y
    }

    /// `C = A B`.
    pub fn matmul(&self, b: &Self) -> Self {
        assert_eq!(self.cols, b.rows, "matmul: {}x{} times {}x{}", self.rows, self.cols, b.rows, b.cols);
        let mut c = Self::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..b.cols {
                    c[(i, j)] += aik * b[(k, j)];
                }
            }
        }
        c
    }

    /// Transposed copy.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Largest entry magnitude (zero for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factorization `A = L L'` of a symmetric positive definite matrix.
///
/// Used for the (constant) mass matrix and for the symmetric Gram matrix in
/// the exact-multiplier formula.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    n: usize,
    /// Lower-triangular factor, row-major with the strict upper triangle zero.
    l: Vec<f64>,
}

/// Factors a symmetric positive definite matrix.
///
/// `a` must be symmetric to within `1e-12 * max|a|`; a non-positive pivot
/// reports [`LinalgError::NotSpd`].
pub fn cholesky(a: &DenseMatrix) -> Result<SpdFactorization, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::ShapeMismatch {
            context: format!("cholesky of a {}x{} matrix", a.rows(), a.cols()),
        });
    }
    let sym_tol = 1e-12 * a.max_abs().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > sym_tol {
                return Err(LinalgError::ShapeMismatch {
                    context: format!(
                        "cholesky of an asymmetric matrix: |a[{i},{j}] - a[{j},{i}]| = {:e}",
                        (a[(i, j)] - a[(j, i)]).abs()
                    ),
                });
            }
        }
    }

    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(LinalgError::NotSpd { row: i, pivot: sum });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(SpdFactorization { n, l })
}

impl SpdFactorization {
    pub fn dimension(&self) -> usize {
        self.n
    }

    /// The lower-triangular factor `L`.
    pub fn lower(&self) -> DenseMatrix {
        DenseMatrix { rows: self.n, cols: self.n, data: self.l.clone() }
    }

    /// Solves `A x = b` by forward/backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "cholesky solve: b has length {}, need {}", b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        // L y = b
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.l[i * n + k] * x[k];
            }
            x[i] /= self.l[i * n + i];
        }
        // L' x = y
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.l[k * n + i] * x[k];
            }
            x[i] /= self.l[i * n + i];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.rows(), self.n, "cholesky solve: B has {} rows, need {}", b.rows(), self.n);
        let mut x = DenseMatrix::zeros(b.rows(), b.cols());
        let mut col = vec![0.0; self.n];
        for j in 0..b.cols() {
            for i in 0..self.n {
                col[i] = b[(i, j)];
            }
            let sol = self.solve(&col);
            for i in 0..self.n {
                x[(i, j)] = sol[i];
            }
        }
        x
    }
}

/// Solves `A X = B` with partially pivoted Gaussian elimination.
///
/// A pivot below [`LU_PIVOT_RTOL`]` * max|A|` reports
/// [`LinalgError::Singular`]. The multiplier coefficient matrix of the stage
/// equations is square but not symmetric in general, hence LU rather than
/// Cholesky.
pub fn lu_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::ShapeMismatch {
            context: format!("lu_solve with a {}x{} coefficient matrix", a.rows(), a.cols()),
        });
    }
    if b.rows() != n {
        return Err(LinalgError::ShapeMismatch {
            context: format!("lu_solve: B has {} rows, need {}", b.rows(), n),
        });
    }

    let mut lu = a.clone();
    let mut x = b.clone();
    let nrhs = b.cols();
    let threshold = LU_PIVOT_RTOL * a.max_abs();

    for col in 0..n {
        // Partial pivoting: bring the largest remaining entry of this column
        // to the diagonal.
        let mut pivot_row = col;
        let mut pivot_mag = lu[(col, col)].abs();
        for r in col + 1..n {
            let mag = lu[(r, col)].abs();
            if mag > pivot_mag {
                pivot_row = r;
                pivot_mag = mag;
            }
        }
        if pivot_mag <= threshold {
            return Err(LinalgError::Singular { step: col, pivot: lu[(pivot_row, col)] });
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
            for j in 0..nrhs {
                let tmp = x[(col, j)];
                x[(col, j)] = x[(pivot_row, j)];
                x[(pivot_row, j)] = tmp;
            }
        }
        let inv_pivot = 1.0 / lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] * inv_pivot;
            if factor == 0.0 {
                continue;
            }
            lu[(r, col)] = 0.0;
            for j in col + 1..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= factor * v;
            }
            for j in 0..nrhs {
                let v = x[(col, j)];
                x[(r, j)] -= factor * v;
            }
        }
    }
    // Back substitution on the upper triangle.
    for col in (0..n).rev() {
        let inv_pivot = 1.0 / lu[(col, col)];
        for j in 0..nrhs {
            let mut sum = x[(col, j)];
            for k in col + 1..n {
                sum -= lu[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = sum * inv_pivot;
        }
    }
    Ok(x)
}

/// Solves `A x = b` for a single right-hand side.
pub fn lu_solve_vec(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let col = DenseMatrix { rows: b.len(), cols: 1, data: b.to_vec() };
    let x = lu_solve(a, &col)?;
    Ok(x.data)
}

/// Applies `(C (x) I_blk)` to a block vector without materializing the
/// Kronecker product: with `V` made of `C.cols()` blocks of length `blk`,
/// output block `i` is `sum_j C[i][j] V_j`.
///
/// This is the workhorse behind the projections `P_s' Omega (x) I_m` and the
/// integration maps `I_s (x) I_m` of the stage equations.
///
/// # Panics
///
/// Panics if `v.len() != C.cols() * blk`.
pub fn block_kron_apply(c: &DenseMatrix, v: &[f64], blk: usize) -> Vec<f64> {
    assert_eq!(
        v.len(),
        c.cols() * blk,
        "block_kron_apply: v has length {}, need {} blocks of {}",
        v.len(),
        c.cols(),
        blk
    );
    let mut out = vec![0.0; c.rows() * blk];
    for i in 0..c.rows() {
        let dst = &mut out[i * blk..(i + 1) * blk];
        for j in 0..c.cols() {
            let cij = c[(i, j)];
            if cij == 0.0 {
                continue;
            }
            let src = &v[j * blk..(j + 1) * blk];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += cij * s;
            }
        }
    }
    out
}

/// Max-norm of a vector.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
