//! Minimal dense linear algebra: vectors, column-major matrices, Cholesky,
//! column-pivoted QR, a Jacobi symmetric eigensolver and a Hessenberg-QR
//! spectral radius routine.
//!
//! Everything is `f64` and dense; the problems this crate targets are small
//! (a few hundred variables at most), so simplicity and determinism win over
//! asymptotic tricks. All routines are pure functions of their inputs.

use thiserror::Error;

/// Errors from the factorization and eigenvalue routines.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    /// A pivot of the Cholesky factorization was not strictly positive.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    /// Input to the symmetric eigensolver was not symmetric.
    #[error("matrix is not symmetric")]
    NotSymmetric,
    /// Eigenvalue iteration hit its iteration cap.
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

// ── Vector ──────────────────────────────────────────────────────────

/// Dense column vector of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector { data: vec![0.0; len] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn from_slice(data: &[f64]) -> Self {
        Vector { data: data.to_vec() }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Self {
        Vector { data: (0..len).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self + alpha * other`, allocating.
    pub fn add_scaled(&self, alpha: f64, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "add_scaled: length mismatch");
        Vector::from_fn(self.len(), |i| self.data[i] + alpha * other.data[i])
    }

    /// `self += alpha * other`, in place.
    pub fn axpy(&mut self, alpha: f64, other: &Vector) {
        assert_eq!(self.len(), other.len(), "axpy: length mismatch");
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        self.add_scaled(-1.0, other)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        self.add_scaled(1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> Vector {
        Vector::from_fn(self.len(), |i| alpha * self.data[i])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Concatenate several vectors into one.
    pub fn concat(parts: &[&Vector]) -> Vector {
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            data.extend_from_slice(p.as_slice());
        }
        Vector { data }
    }

    /// Copy of the entries `range.start..range.end`.
    pub fn segment(&self, start: usize, len: usize) -> Vector {
        Vector::from_slice(&self.data[start..start + len])
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

// ── Matrix ──────────────────────────────────────────────────────────

/// Dense column-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// Build from row-major slices, one slice per row.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Matrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "from_rows: ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_vector(&self, j: usize) -> Vector {
        Vector::from_slice(self.col(j))
    }

    pub fn set_col(&mut self, j: usize, v: &Vector) {
        assert_eq!(v.len(), self.rows, "set_col: length mismatch");
        self.col_mut(j).copy_from_slice(v.as_slice());
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * v`.
    pub fn matvec(&self, v: &Vector) -> Vector {
        assert_eq!(self.cols, v.len(), "matvec: dimension mismatch");
        let mut out = Vector::zeros(self.rows);
        for j in 0..self.cols {
            let x = v[j];
            if x != 0.0 {
                let col = self.col(j);
                for i in 0..self.rows {
                    out[i] += col[i] * x;
                }
            }
        }
        out
    }

    /// `selfᵀ * v`.
    pub fn matvec_transpose(&self, v: &Vector) -> Vector {
        assert_eq!(self.rows, v.len(), "matvec_transpose: dimension mismatch");
        Vector::from_fn(self.cols, |j| {
            self.col(j).iter().zip(v.as_slice()).map(|(a, b)| a * b).sum()
        })
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul: dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let x = other[(k, j)];
                if x != 0.0 {
                    let col = self.col(k);
                    let ocol = out.col_mut(j);
                    for i in 0..self.rows {
                        ocol[i] += col[i] * x;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add_scaled(-1.0, other)
    }

    pub fn add_scaled(&self, alpha: f64, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add: shape mismatch");
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
        out
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x *= alpha;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self[(i, j)].abs();
            }
            best = best.max(s);
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = 1.0 + self.max_abs();
        for j in 0..self.cols {
            for i in 0..j {
                if (self[(i, j)] - self[(j, i)]).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// `(self + selfᵀ) / 2`.
    pub fn symmetrize(&self) -> Matrix {
        assert!(self.is_square(), "symmetrize: not square");
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// Copy `block` into `self` with top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols, "set_block: out of range");
        for j in 0..block.cols {
            for i in 0..block.rows {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Copy of the `rows × cols` block with top-left corner at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block: out of range");
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn hcat(parts: &[&Matrix]) -> Matrix {
        assert!(!parts.is_empty(), "hcat: empty");
        let rows = parts[0].rows;
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut c = 0;
        for p in parts {
            assert_eq!(p.rows, rows, "hcat: row mismatch");
            out.set_block(0, c, p);
            c += p.cols;
        }
        out
    }

    /// Vertical concatenation of matrices with equal column counts.
    pub fn vcat(parts: &[&Matrix]) -> Matrix {
        assert!(!parts.is_empty(), "vcat: empty");
        let cols = parts[0].cols;
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut r = 0;
        for p in parts {
            assert_eq!(p.cols, cols, "vcat: col mismatch");
            out.set_block(r, 0, p);
            r += p.rows;
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols, "index out of range");
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols, "index out of range");
        &mut self.data[j * self.rows + i]
    }
}

// ── Cholesky ────────────────────────────────────────────────────────

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = m`.
///
/// Fails with [`LinalgError::NotPositiveDefinite`] when a pivot is not
/// strictly positive. The input must be symmetric to `1e-12` relative.
pub fn cholesky(m: &Matrix) -> Result<Matrix, LinalgError> {
    assert!(m.is_square(), "cholesky: matrix not square");
    assert!(m.is_symmetric(1e-12), "cholesky: matrix not symmetric");
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solve `L·Lᵀ·x = b` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &Vector) -> Vector {
    let n = l.rows();
    assert_eq!(b.len(), n, "cholesky_solve: dimension mismatch");
    let mut x = b.clone();
    // forward:  L y = b
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

// ── Column-pivoted Householder QR ───────────────────────────────────

/// Relative pivot threshold below which trailing columns are treated as
/// numerically rank deficient.
pub const QR_DROP_TOL: f64 = 1e-12;

/// Column-pivoted Householder QR of an `m × n` matrix (`m ≥ n` is not
/// required; rank is `min(m, n)` at most).
///
/// `A·P = Q·R` with orthogonal `Q` (`m × m`) and upper-trapezoidal `R`.
/// Used for least squares, minimum-norm consistent solves and orthonormal
/// nullspace bases.
#[derive(Debug, Clone)]
pub struct Qr {
    // Householder vectors stored below the diagonal, R on and above it.
    qr: Matrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
    m: usize,
    n: usize,
}

impl Qr {
    /// Factor with column pivoting and the default drop tolerance.
    pub fn new(a: &Matrix) -> Qr {
        Qr::with_drop_tol(a, QR_DROP_TOL)
    }

    /// Factor with column pivoting; pivots smaller than
    /// `drop_tol * |largest pivot|` mark the numerical rank.
    pub fn with_drop_tol(a: &Matrix, drop_tol: f64) -> Qr {
        let m = a.rows();
        let n = a.cols();
        let kmax = m.min(n);
        let mut qr = a.clone();
        let mut tau = vec![0.0; kmax];
        let mut perm: Vec<usize> = (0..n).collect();
        // squared norms of the trailing parts of each column
        let mut colnorm: Vec<f64> = (0..n)
            .map(|j| qr.col(j).iter().map(|x| x * x).sum())
            .collect();

        for k in 0..kmax {
            // pivot: column with largest remaining norm (smallest index on ties)
            let mut p = k;
            for j in k + 1..n {
                if colnorm[j] > colnorm[p] {
                    p = j;
                }
            }
            if p != k {
                perm.swap(k, p);
                colnorm.swap(k, p);
                for i in 0..m {
                    let t = qr[(i, k)];
                    qr[(i, k)] = qr[(i, p)];
                    qr[(i, p)] = t;
                }
            }

            // Householder vector for column k below row k
            let normx = {
                let mut s = 0.0;
                for i in k..m {
                    s += qr[(i, k)] * qr[(i, k)];
                }
                s.sqrt()
            };
            if normx == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let alpha = if qr[(k, k)] >= 0.0 { -normx } else { normx };
            let v0 = qr[(k, k)] - alpha;
            // v = (v0, x[k+1..]) scaled so v[0] = 1
            for i in k + 1..m {
                qr[(i, k)] /= v0;
            }
            tau[k] = -v0 / alpha; // = 2 / (vᵀv) with v[0] = 1 scaling
            qr[(k, k)] = alpha;

            // apply reflector to trailing columns
            for j in k + 1..n {
                let mut s = qr[(k, j)];
                for i in k + 1..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau[k];
                qr[(k, j)] -= s;
                for i in k + 1..m {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= s * vik;
                }
                // downdate trailing column norm
                colnorm[j] = (k + 1..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
            }
        }

        // numerical rank from the pivot magnitudes
        let pivot0 = qr[(0, 0)].abs().max(f64::MIN_POSITIVE);
        let mut rank = 0;
        for k in 0..kmax {
            if qr[(k, k)].abs() > drop_tol * pivot0 {
                rank = k + 1;
            } else {
                break;
            }
        }
        if kmax > 0 && qr[(0, 0)] == 0.0 {
            rank = 0;
        }

        Qr { qr, tau, perm, rank, m, n }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Apply `Qᵀ` to a length-`m` vector in place.
    pub fn apply_qt(&self, v: &mut Vector) {
        assert_eq!(v.len(), self.m, "apply_qt: dimension mismatch");
        for k in 0..self.tau.len() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = v[k];
            for i in k + 1..self.m {
                s += self.qr[(i, k)] * v[i];
            }
            s *= self.tau[k];
            v[k] -= s;
            for i in k + 1..self.m {
                v[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Apply `Q` to a length-`m` vector in place.
    pub fn apply_q(&self, v: &mut Vector) {
        assert_eq!(v.len(), self.m, "apply_q: dimension mismatch");
        for k in (0..self.tau.len()).rev() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = v[k];
            for i in k + 1..self.m {
                s += self.qr[(i, k)] * v[i];
            }
            s *= self.tau[k];
            v[k] -= s;
            for i in k + 1..self.m {
                v[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Full `m × m` orthogonal factor.
    pub fn q_full(&self) -> Matrix {
        let mut q = Matrix::identity(self.m);
        for j in 0..self.m {
            let mut col = q.col_vector(j);
            self.apply_q(&mut col);
            q.set_col(j, &col);
        }
        q
    }

    /// Orthonormal basis of the orthogonal complement of the column span,
    /// i.e. the nullspace of `Aᵀ`: the trailing `m − rank` columns of `Q`.
    pub fn nullspace_of_transpose(&self) -> Matrix {
        let q = self.q_full();
        q.block(0, self.rank, self.m, self.m - self.rank)
    }

    /// Least-squares solution of `min ‖b − A·x‖₂` via the rank-truncated
    /// triangular solve; dropped pivots get zero coefficients.
    pub fn solve_least_squares(&self, b: &Vector) -> Vector {
        assert_eq!(b.len(), self.m, "solve_least_squares: dimension mismatch");
        let mut c = b.clone();
        self.apply_qt(&mut c);
        let r = self.rank;
        let mut xr = vec![0.0; r];
        for i in (0..r).rev() {
            let mut s = c[i];
            for j in i + 1..r {
                s -= self.qr[(i, j)] * xr[j];
            }
            xr[i] = s / self.qr[(i, i)];
        }
        let mut x = Vector::zeros(self.n);
        for (j, &xj) in xr.iter().enumerate() {
            x[self.perm[j]] = xj;
        }
        x
    }

    /// Minimum-norm solution of the (possibly underdetermined) system
    /// `Aᵀ·y = c`, together with the residual norm `‖Aᵀ·y − c‖₂`.
    ///
    /// With `A·P = Q·R` this solves `Rᵀ·w = Pᵀ·c` forward and sets
    /// `y = Q·(w, 0)`. A nonzero residual signals an inconsistent system.
    pub fn solve_transpose_min_norm(&self, c: &Vector) -> (Vector, f64) {
        assert_eq!(c.len(), self.n, "solve_transpose_min_norm: dimension mismatch");
        let r = self.rank;
        // permuted right-hand side
        let cp = Vector::from_fn(self.n, |i| c[self.perm[i]]);
        let mut w = Vector::zeros(self.m);
        for i in 0..r {
            let mut s = cp[i];
            for j in 0..i {
                s -= self.qr[(j, i)] * w[j];
            }
            w[i] = s / self.qr[(i, i)];
        }
        // residual on the dropped rows: rows r..n of Rᵀ w − Pᵀc
        let mut res = 0.0f64;
        for i in r..self.n {
            let mut s = -cp[i];
            for j in 0..r {
                s += self.qr[(j, i)] * w[j];
            }
            res += s * s;
        }
        let mut y = w;
        self.apply_q(&mut y);
        (y, res.sqrt())
    }
}

/// Minimizer of `‖b − A·x‖₂` with `rows ≥ cols`; rank deficiency is
/// resolved by column pivoting with the default drop tolerance.
pub fn qr_least_squares(a: &Matrix, b: &Vector) -> Vector {
    assert!(a.rows() >= a.cols(), "qr_least_squares: needs rows >= cols");
    Qr::new(a).solve_least_squares(b)
}

// ── Symmetric eigendecomposition (cyclic Jacobi) ────────────────────

/// Eigendecomposition `M = V·diag(λ)·Vᵀ` of a symmetric matrix.
///
/// Returns eigenvalues in ascending order with matching orthonormal
/// eigenvector columns. Cyclic Jacobi; accurate and simple for the
/// desk-scale matrices used here (n ≲ 200).
pub fn sym_eig(m: &Matrix) -> Result<(Vector, Matrix), LinalgError> {
    assert!(m.is_square(), "sym_eig: matrix not square");
    if !m.is_symmetric(1e-10) {
        return Err(LinalgError::NotSymmetric);
    }
    let n = m.rows();
    let mut a = m.symmetrize();
    let mut v = Matrix::identity(n);
    if n <= 1 {
        return Ok((Vector::from_fn(n, |i| a[(i, i)]), v));
    }

    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
        (2.0 * s).sqrt()
    };
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        if off(&a) <= 1e-14 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                // Jacobi rotation annihilating a[p][q]
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    // sort ascending, permuting eigenvector columns along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let vals = Vector::from_fn(n, |i| a[(order[i], order[i])]);
    let mut vecs = Matrix::zeros(n, n);
    for (j, &oj) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, j)] = v[(i, oj)];
        }
    }
    Ok((vals, vecs))
}

// ── Spectral radius via Hessenberg QR ───────────────────────────────

/// Default cap on QR iterations for [`spectral_radius`].
pub const SPECTRAL_RADIUS_ITER_CAP: usize = 10_000;

/// All eigenvalues of a general square matrix as `(re, im)` pairs,
/// via Householder Hessenberg reduction followed by the shifted
/// double-step QR iteration.
pub fn eigenvalues(m: &Matrix, iter_cap: usize) -> Result<Vec<(f64, f64)>, LinalgError> {
    assert!(m.is_square(), "eigenvalues: matrix not square");
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = hessenberg(m);
    hessenberg_eigenvalues(&mut h, iter_cap)
}

/// Largest eigenvalue modulus of a general square matrix.
///
/// Errors with [`LinalgError::NoConvergence`] if the QR iteration exceeds
/// `SPECTRAL_RADIUS_ITER_CAP` steps.
pub fn spectral_radius(m: &Matrix) -> Result<f64, LinalgError> {
    let eigs = eigenvalues(m, SPECTRAL_RADIUS_ITER_CAP)?;
    Ok(eigs
        .iter()
        .map(|&(re, im)| (re * re + im * im).sqrt())
        .fold(0.0, f64::max))
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut a = m.clone();
    for k in 0..n.saturating_sub(2) {
        let mut normx = 0.0;
        for i in k + 1..n {
            normx += a[(i, k)] * a[(i, k)];
        }
        normx = normx.sqrt();
        if normx == 0.0 {
            continue;
        }
        let alpha = if a[(k + 1, k)] >= 0.0 { -normx } else { normx };
        let v0 = a[(k + 1, k)] - alpha;
        let mut v = vec![0.0; n];
        v[k + 1] = 1.0;
        for i in k + 2..n {
            v[i] = a[(i, k)] / v0;
        }
        let tau = -v0 / alpha;
        // A ← (I − τ v vᵀ) A
        for j in 0..n {
            let mut s = 0.0;
            for i in k + 1..n {
                s += v[i] * a[(i, j)];
            }
            s *= tau;
            for i in k + 1..n {
                a[(i, j)] -= s * v[i];
            }
        }
        // A ← A (I − τ v vᵀ)
        for i in 0..n {
            let mut s = 0.0;
            for j in k + 1..n {
                s += a[(i, j)] * v[j];
            }
            s *= tau;
            for j in k + 1..n {
                a[(i, j)] -= s * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
    a
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns all
/// eigenvalues. Follows the classical `hqr` scheme with exceptional
/// shifts every 10 stalled iterations.
fn hessenberg_eigenvalues(h: &mut Matrix, iter_cap: usize) -> Result<Vec<(f64, f64)>, LinalgError> {
    let n = h.rows();
    let mut eig: Vec<(f64, f64)> = Vec::with_capacity(n);
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![(0.0, 0.0); n]);
    }

    let mut total_iters = 0usize;
    let mut nn = n as isize - 1;
    let mut t = 0.0;

    while nn >= 0 {
        let mut its = 0;
        loop {
            // find small subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let s = h[(l as usize - 1, l as usize - 1)].abs() + h[(l as usize, l as usize)].abs();
                let s = if s == 0.0 { anorm } else { s };
                if h[(l as usize, l as usize - 1)].abs() <= eps * s {
                    h[(l as usize, l as usize - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let x = h[(nn as usize, nn as usize)];
            if l == nn {
                // one real root
                eig.push((x + t, 0.0));
                nn -= 1;
                break;
            }
            let y = h[(nn as usize - 1, nn as usize - 1)];
            let w = h[(nn as usize, nn as usize - 1)] * h[(nn as usize - 1, nn as usize)];
            if l == nn - 1 {
                // a 2×2 block: two roots
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    eig.push((x + z, 0.0));
                    eig.push((if z != 0.0 { x - w / z } else { x + z }, 0.0));
                } else {
                    eig.push((x + p, z));
                    eig.push((x + p, -z));
                }
                nn -= 2;
                break;
            }
            // QR step
            total_iters += 1;
            if total_iters > iter_cap {
                return Err(LinalgError::NoConvergence);
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nn as usize {
                    h[(i, i)] -= x;
                }
                let s = h[(nn as usize, nn as usize - 1)].abs()
                    + h[(nn as usize - 1, nn as usize - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if its == 30 {
                return Err(LinalgError::NoConvergence);
            }
            its += 1;

            // form first column of (H − s1 I)(H − s2 I) and find a good m
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            let mut m = nn - 2;
            while m >= l {
                let mu = m as usize;
                let z = h[(mu, mu)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(mu + 1, mu)] + h[(mu, mu + 1)];
                q = h[(mu + 1, mu + 1)] - z - rr - ss;
                r = h[(mu + 2, mu + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[(mu, mu - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (h[(mu - 1, mu - 1)].abs() + z.abs() + h[(mu + 1, mu + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            let m = m.max(l) as usize;
            for i in m + 2..=nn as usize {
                h[(i, i - 2)] = 0.0;
            }
            for i in m + 3..=nn as usize {
                h[(i, i - 3)] = 0.0;
            }

            // double QR sweep: chase the bulge from m to nn−1
            let lu = l as usize;
            let nnu = nn as usize;
            for k in m..nnu {
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if k != nnu - 1 { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if lu != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                } else {
                    h[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                // row modification
                for j in k..=nnu {
                    let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                    if k != nnu - 1 {
                        pp += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= pp * z;
                    }
                    h[(k + 1, j)] -= pp * y;
                    h[(k, j)] -= pp * x;
                }
                // column modification
                let imax = nnu.min(k + 3);
                for i in lu..=imax {
                    let mut pp = x * h[(i, k)] + y * h[(i, k + 1)];
                    if k != nnu - 1 {
                        pp += z * h[(i, k + 2)];
                        h[(i, k + 2)] -= pp * r;
                    }
                    h[(i, k + 1)] -= pp * q;
                    h[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(eig)
}
