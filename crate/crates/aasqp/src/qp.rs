//! Dense active-set solver for strictly convex quadratic programs
//!
//! ```text
//!     minimize   ½ dᵀW d + qᵀd
//!     subject to g0 + Gᵀd  = 0
//!                h0 + Hᵀd ≤ 0
//! ```
//!
//! Equalities are eliminated through an orthonormal nullspace basis; the
//! inequality-constrained reduced problem is then solved by an active-set
//! iteration that starts from the equality-only optimum and shifts into
//! feasibility with ratio steps: the most violated constraint is driven to
//! its boundary, dropping working constraints whose multipliers would turn
//! negative along the way. The reduced Hessian must be positive definite;
//! regularization is the caller's job.
//!
//! The iteration is deterministic: ties in the blocking tests are broken
//! by smallest constraint index, so identical inputs produce bitwise
//! identical outputs.

use crate::linalg::{cholesky, cholesky_solve, Matrix, Qr, Vector};
use std::fmt::Write as _;
use thiserror::Error;

/// Dense convex QP subproblem data.
///
/// `G` and `H` hold one column per constraint, so the equality rows read
/// `g0 + Gᵀd = 0` and the inequality rows `h0 + Hᵀd ≤ 0`.
#[derive(Debug, Clone)]
pub struct QpData {
    pub w: Matrix,
    pub q: Vector,
    pub g: Matrix,
    pub g0: Vector,
    pub h: Matrix,
    pub h0: Vector,
}

impl QpData {
    pub fn n_v(&self) -> usize {
        self.q.len()
    }

    pub fn n_g(&self) -> usize {
        self.g0.len()
    }

    pub fn n_h(&self) -> usize {
        self.h0.len()
    }

    /// Objective value `½ dᵀW d + qᵀd`.
    pub fn objective(&self, d: &Vector) -> f64 {
        0.5 * d.dot(&self.w.matvec(d)) + self.q.dot(d)
    }

    /// Plain-text dump for failure diagnostics. Layout: one block per
    /// field, `name rows cols` header line followed by one text row per
    /// matrix row (vectors are single-column).
    pub fn dump_plaintext(&self) -> String {
        let mut s = String::new();
        let mat = |s: &mut String, name: &str, m: &Matrix| {
            let _ = writeln!(s, "{} {} {}", name, m.rows(), m.cols());
            for i in 0..m.rows() {
                let row: Vec<String> = (0..m.cols()).map(|j| format!("{:e}", m[(i, j)])).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        };
        let vec = |s: &mut String, name: &str, v: &Vector| {
            let _ = writeln!(s, "{} {} 1", name, v.len());
            for i in 0..v.len() {
                let _ = writeln!(s, "{:e}", v[i]);
            }
        };
        mat(&mut s, "W", &self.w);
        vec(&mut s, "q", &self.q);
        mat(&mut s, "G", &self.g);
        vec(&mut s, "g0", &self.g0);
        mat(&mut s, "H", &self.h);
        vec(&mut s, "h0", &self.h0);
        s
    }
}

/// Primal-dual QP solution with the final active set.
#[derive(Debug, Clone)]
pub struct QpSolution {
    /// Primal step `d`.
    pub d: Vector,
    /// Equality multipliers.
    pub lambda: Vector,
    /// Inequality multipliers, `µ ≥ 0`, zero off the active set.
    pub mu: Vector,
    /// Indices of inequalities held as equalities at the solution, ascending.
    pub active_set: Vec<usize>,
    /// Active-set iterations used.
    pub iterations: usize,
    /// ∞-norm of the stationarity residual at the returned point.
    pub stationarity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QpError {
    /// Equalities inconsistent, or no feasible point for the inequalities.
    #[error("QP is infeasible")]
    Infeasible,
    /// Cycling guard tripped (iteration cap exceeded).
    #[error("active-set iteration exceeded its cycling cap")]
    Degenerate,
    /// Reduced Hessian not positive definite.
    #[error("reduced Hessian is not positive definite")]
    NotPositiveDefinite,
    /// Equality constraint matrix is rank deficient.
    #[error("equality constraints are rank deficient")]
    RankDeficientConstraints,
}

/// Default stopping tolerance for [`solve_qp`].
pub const QP_DEFAULT_TOL: f64 = 1e-10;

/// Tolerance below which a least-squares equality solve is accepted as
/// consistent.
const EQ_CONSISTENCY_TOL: f64 = 1e-8;

struct Reduced {
    /// Particular solution of the equalities.
    d_particular: Vector,
    /// Orthonormal nullspace basis of `Gᵀ`.
    z: Matrix,
    /// Cholesky factor of `ZᵀWZ`.
    w_chol: Matrix,
    /// Reduced gradient `Zᵀ(q + W d_p)`.
    q_red: Vector,
    /// Reduced inequality normals, one column per constraint.
    a: Matrix,
    /// Reduced inequality right-hand sides (`aᵢᵀy ≤ bᵢ`).
    b: Vector,
    qr_g: Option<Qr>,
}

fn reduce(qp: &QpData) -> Result<Reduced, QpError> {
    let n_v = qp.n_v();
    assert_eq!(qp.w.rows(), n_v, "solve_qp: W shape mismatch");
    assert_eq!(qp.w.cols(), n_v, "solve_qp: W shape mismatch");
    assert_eq!(qp.g.rows(), n_v, "solve_qp: G shape mismatch");
    assert_eq!(qp.g.cols(), qp.n_g(), "solve_qp: G shape mismatch");
    assert_eq!(qp.h.rows(), n_v, "solve_qp: H shape mismatch");
    assert_eq!(qp.h.cols(), qp.n_h(), "solve_qp: H shape mismatch");
    assert!(qp.w.is_symmetric(1e-10), "solve_qp: W not symmetric");

    let (d_particular, z, qr_g) = if qp.n_g() > 0 {
        let qr_g = Qr::new(&qp.g);
        let (dp, res) = qr_g.solve_transpose_min_norm(&qp.g0.scale(-1.0));
        if res > EQ_CONSISTENCY_TOL * (1.0 + qp.g0.norm_inf()) {
            return Err(QpError::Infeasible);
        }
        let z = qr_g.nullspace_of_transpose();
        (dp, z, Some(qr_g))
    } else {
        (Vector::zeros(n_v), Matrix::identity(n_v), None)
    };

    let w_sym = qp.w.symmetrize();
    let w_red = z.transpose().matmul(&w_sym).matmul(&z).symmetrize();
    let w_chol = if z.cols() > 0 {
        cholesky(&w_red).map_err(|_| QpError::NotPositiveDefinite)?
    } else {
        Matrix::zeros(0, 0)
    };
    let q_red = z.matvec_transpose(&qp.q.add(&w_sym.matvec(&d_particular)));

    let n_h = qp.n_h();
    let mut a = Matrix::zeros(z.cols(), n_h);
    let mut b = Vector::zeros(n_h);
    for i in 0..n_h {
        let hi = qp.h.col_vector(i);
        a.set_col(i, &z.matvec_transpose(&hi));
        b[i] = -qp.h0[i] - hi.dot(&d_particular);
    }

    Ok(Reduced { d_particular, z, w_chol, q_red, a, b, qr_g })
}

/// Solve the equality-constrained QP KKT system for the working set `n_set`
/// given the unconstrained reduced minimizer `y0`. Returns `(y, nu)`.
fn eqp_solve(
    red: &Reduced,
    y0: &Vector,
    n_set: &[usize],
) -> Result<(Vector, Vec<f64>), QpError> {
    if n_set.is_empty() {
        return Ok((y0.clone(), Vec::new()));
    }
    let nz = red.z.cols();
    let k = n_set.len();
    // columns Ŵ⁻¹ a_j and Schur complement M = A_Nᵀ Ŵ⁻¹ A_N
    let mut winv_a = Matrix::zeros(nz, k);
    for (j, &cj) in n_set.iter().enumerate() {
        winv_a.set_col(j, &cholesky_solve(&red.w_chol, &red.a.col_vector(cj)));
    }
    let mut m = Matrix::zeros(k, k);
    for j in 0..k {
        let wa = winv_a.col_vector(j);
        for i in 0..k {
            m[(i, j)] = red.a.col_vector(n_set[i]).dot(&wa);
        }
    }
    let m_chol = cholesky(&m.symmetrize()).map_err(|_| QpError::Degenerate)?;
    let rhs = Vector::from_fn(k, |i| red.a.col_vector(n_set[i]).dot(y0) - red.b[n_set[i]]);
    let nu = cholesky_solve(&m_chol, &rhs);
    let mut y = y0.clone();
    for j in 0..k {
        y.axpy(-nu[j], &winv_a.col_vector(j));
    }
    Ok((y, nu.as_slice().to_vec()))
}

/// Step direction for driving constraint `p` into the working set `n_set`:
/// `Ŵz + A_N r = a_p`, `A_Nᵀ z = 0`. Returns `(z, r)`.
fn step_direction(
    red: &Reduced,
    n_set: &[usize],
    p: usize,
) -> Result<(Vector, Vec<f64>), QpError> {
    let u = cholesky_solve(&red.w_chol, &red.a.col_vector(p));
    if n_set.is_empty() {
        return Ok((u, Vec::new()));
    }
    let nz = red.z.cols();
    let k = n_set.len();
    let mut winv_a = Matrix::zeros(nz, k);
    for (j, &cj) in n_set.iter().enumerate() {
        winv_a.set_col(j, &cholesky_solve(&red.w_chol, &red.a.col_vector(cj)));
    }
    let mut m = Matrix::zeros(k, k);
    for j in 0..k {
        let wa = winv_a.col_vector(j);
        for i in 0..k {
            m[(i, j)] = red.a.col_vector(n_set[i]).dot(&wa);
        }
    }
    let m_chol = cholesky(&m.symmetrize()).map_err(|_| QpError::Degenerate)?;
    let rhs = Vector::from_fn(k, |i| red.a.col_vector(n_set[i]).dot(&u));
    let r = cholesky_solve(&m_chol, &rhs);
    let mut zdir = u;
    for j in 0..k {
        zdir.axpy(-r[j], &winv_a.col_vector(j));
    }
    Ok((zdir, r.as_slice().to_vec()))
}

/// Solve the QP; `warm_start` optionally seeds the working set with the
/// active set of a previous related solve.
pub fn solve_qp(
    qp: &QpData,
    warm_start: Option<&[usize]>,
    tol: f64,
) -> Result<QpSolution, QpError> {
    assert!(tol > 0.0, "solve_qp: tol must be positive");
    let red = reduce(qp)?;
    let n_h = qp.n_h();
    let nz = red.z.cols();
    let iter_cap = 50 * (qp.n_v() + n_h);
    let feas_scale = 1.0 + red.b.norm_inf();

    let y0 = if nz > 0 {
        cholesky_solve(&red.w_chol, &red.q_red).scale(-1.0)
    } else {
        Vector::zeros(0)
    };

    let mut n_set: Vec<usize> = Vec::new();
    let mut mu_n: Vec<f64> = Vec::new();
    let mut y = y0.clone();
    let mut iterations = 0usize;

    // Warm-start pre-phase: adopt the provided working set, then drop
    // members with negative multipliers until the EQP is dual feasible.
    if let Some(ws) = warm_start {
        let mut set: Vec<usize> = ws.iter().copied().filter(|&i| i < n_h).collect();
        set.sort_unstable();
        set.dedup();
        if set.len() <= nz {
            loop {
                iterations += 1;
                if iterations > iter_cap {
                    return Err(QpError::Degenerate);
                }
                match eqp_solve(&red, &y0, &set) {
                    Ok((y_try, nu)) => {
                        // most negative multiplier, smallest index on ties
                        let mut drop = None;
                        let mut worst = -tol;
                        for (j, &nuj) in nu.iter().enumerate() {
                            if nuj < worst {
                                worst = nuj;
                                drop = Some(j);
                            }
                        }
                        match drop {
                            Some(j) => {
                                set.remove(j);
                            }
                            None => {
                                y = y_try;
                                mu_n = nu;
                                n_set = set;
                                break;
                            }
                        }
                    }
                    Err(_) => {
                        // dependent warm set: fall back to a cold start
                        n_set = Vec::new();
                        mu_n = Vec::new();
                        y = y0.clone();
                        break;
                    }
                }
            }
        }
    }

    // Main loop: pick the most violated inequality and drive it to its
    // boundary with full or partial ratio steps.
    loop {
        iterations += 1;
        if iterations > iter_cap {
            return Err(QpError::Degenerate);
        }

        let mut p = usize::MAX;
        let mut worst = tol * feas_scale;
        for i in 0..n_h {
            if n_set.contains(&i) {
                continue;
            }
            let viol = red.a.col_vector(i).dot(&y) - red.b[i];
            if viol > worst {
                worst = viol;
                p = i;
            }
        }
        if p == usize::MAX {
            break; // primal feasible, dual feasible by construction: done
        }

        let mut mu_p = 0.0f64;
        // inner loop: move toward constraint p, dropping dual blockers
        loop {
            iterations += 1;
            if iterations > iter_cap {
                return Err(QpError::Degenerate);
            }
            let (zdir, r) = step_direction(&red, &n_set, p)?;
            let descent = red.a.col_vector(p).dot(&zdir);
            let viol = red.a.col_vector(p).dot(&y) - red.b[p];
            let t_full = if descent > 1e-14 * feas_scale.max(1.0) {
                viol / descent
            } else {
                f64::INFINITY
            };
            // dual blocking ratio
            let mut t_dual = f64::INFINITY;
            let mut blocker = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let ratio = mu_n[j] / rj;
                    if ratio < t_dual - 1e-15
                        || (ratio < t_dual + 1e-15
                            && blocker.map_or(true, |bj: usize| n_set[j] < n_set[bj]))
                    {
                        t_dual = ratio;
                        blocker = Some(j);
                    }
                }
            }
            if t_full.is_infinite() && t_dual.is_infinite() {
                return Err(QpError::Infeasible);
            }
            let t = t_full.min(t_dual);
            if t > 0.0 {
                for (j, &rj) in r.iter().enumerate() {
                    mu_n[j] -= t * rj;
                }
                mu_p += t;
                y.axpy(-t, &zdir);
            }
            if t_full <= t_dual {
                n_set.push(p);
                mu_n.push(mu_p);
                break;
            }
            let j = blocker.expect("finite dual ratio without blocker");
            n_set.remove(j);
            mu_n.remove(j);
        }
    }

    // Assemble the full-space solution.
    let mut d = red.d_particular.clone();
    if nz > 0 {
        d = d.add(&red.z.matvec(&y));
    }
    let mut mu = Vector::zeros(n_h);
    for (j, &cj) in n_set.iter().enumerate() {
        mu[cj] = mu_n[j].max(0.0);
    }
    // equality multipliers from stationarity: G λ = −(W d + q + H µ)
    let mut rhs = qp.q.add(&qp.w.symmetrize().matvec(&d));
    rhs.axpy(1.0, &qp.h.matvec(&mu));
    rhs = rhs.scale(-1.0);
    let lambda = match &red.qr_g {
        Some(qr_g) => qr_g.solve_least_squares(&rhs),
        None => Vector::zeros(0),
    };

    let mut stat = qp.q.add(&qp.w.symmetrize().matvec(&d));
    stat.axpy(1.0, &qp.g.matvec(&lambda));
    stat.axpy(1.0, &qp.h.matvec(&mu));
    let mut active_set = n_set;
    active_set.sort_unstable();

    Ok(QpSolution {
        d,
        lambda,
        mu,
        active_set,
        iterations,
        stationarity_residual: stat.norm_inf(),
    })
}

/// Solve the equality-constrained QP
/// `min ½dᵀWd + qᵀd  s.t.  g0 + Gᵀd = 0`
/// via the nullspace method; `G` must have full column rank.
pub fn solve_eq_qp(
    w: &Matrix,
    q: &Vector,
    g: &Matrix,
    g0: &Vector,
) -> Result<(Vector, Vector), QpError> {
    let n_v = q.len();
    assert_eq!(w.rows(), n_v, "solve_eq_qp: W shape mismatch");
    assert_eq!(g.rows(), n_v, "solve_eq_qp: G shape mismatch");
    assert_eq!(g.cols(), g0.len(), "solve_eq_qp: g0 length mismatch");

    if g.cols() == 0 {
        let chol = cholesky(&w.symmetrize()).map_err(|_| QpError::NotPositiveDefinite)?;
        return Ok((cholesky_solve(&chol, q).scale(-1.0), Vector::zeros(0)));
    }
    let qr_g = Qr::new(g);
    if qr_g.rank() < g.cols() {
        return Err(QpError::RankDeficientConstraints);
    }
    let (dp, res) = qr_g.solve_transpose_min_norm(&g0.scale(-1.0));
    if res > EQ_CONSISTENCY_TOL * (1.0 + g0.norm_inf()) {
        return Err(QpError::Infeasible);
    }
    let z = qr_g.nullspace_of_transpose();
    let mut d = dp;
    if z.cols() > 0 {
        let w_sym = w.symmetrize();
        let w_red = z.transpose().matmul(&w_sym).matmul(&z).symmetrize();
        let chol = cholesky(&w_red).map_err(|_| QpError::NotPositiveDefinite)?;
        let q_red = z.matvec_transpose(&q.add(&w_sym.matvec(&d)));
        let y = cholesky_solve(&chol, &q_red).scale(-1.0);
        d = d.add(&z.matvec(&y));
    }
    let rhs = q.add(&w.symmetrize().matvec(&d)).scale(-1.0);
    let lambda = qr_g.solve_least_squares(&rhs);
    Ok((d, lambda))
}
