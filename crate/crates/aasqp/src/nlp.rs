//! Nonlinear program representation
//!
//! An [`Nlp`] bundles callbacks for
//!
//! ```text
//!     minimize f(v)   subject to   g(v) = 0,   h(v) ≤ 0
//! ```
//!
//! together with first derivatives, an optional Lagrangian Hessian and
//! optional convex-over-nonlinear structure descriptors `φ(F(v))` used by
//! the Gauss-Newton and SCQP Hessian strategies. Jacobians use the
//! row-per-constraint layout (`jac_g` is `n_g × n_v`).

use crate::linalg::{Matrix, Vector};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown dynamics model `{0}`")]
    UnknownDynamics(String),
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
}

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
type HessFn = Arc<dyn Fn(&Vector, &Vector, &Vector) -> Matrix + Send + Sync>;

/// Convex-over-nonlinear composite `φ(F(v))` with convex outer `φ`.
///
/// `inner_jac` returns the `dim_out × n_v` Jacobian of `F`; `outer_hessian`
/// returns `∇²φ` evaluated at `y = F(v)`.
pub struct ConvexComposite {
    pub dim_out: usize,
    pub inner: VectorFn,
    pub inner_jac: MatrixFn,
    pub outer_hessian: Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>,
}

impl ConvexComposite {
    /// Gauss-Newton style curvature `Jᵀ ∇²φ(F(v)) J` of the composite at `v`.
    pub fn curvature(&self, v: &Vector) -> Matrix {
        let y = (self.inner)(v);
        assert_eq!(y.len(), self.dim_out, "composite: inner dimension mismatch");
        let j = (self.inner_jac)(v);
        assert_eq!(j.rows(), self.dim_out, "composite: inner Jacobian shape");
        let phi = (self.outer_hessian)(&y);
        j.transpose().matmul(&phi).matmul(&j).symmetrize()
    }
}

/// Nonlinear program with callbacks and structure metadata.
pub struct Nlp {
    n_v: usize,
    n_g: usize,
    n_h: usize,
    f: ScalarFn,
    g: VectorFn,
    h: VectorFn,
    grad_f: VectorFn,
    jac_g: MatrixFn,
    jac_h: MatrixFn,
    hess_lagrangian: Option<HessFn>,
    objective_structure: Option<ConvexComposite>,
    /// `(inequality row, composite)` pairs for constraints of the form
    /// `φᵢ(Fᵢ(v)) ≤ 0`.
    constraint_structure: Vec<(usize, ConvexComposite)>,
}

impl Nlp {
    pub fn builder(n_v: usize, n_g: usize, n_h: usize) -> NlpBuilder {
        NlpBuilder {
            n_v,
            n_g,
            n_h,
            f: None,
            g: None,
            h: None,
            grad_f: None,
            jac_g: None,
            jac_h: None,
            hess_lagrangian: None,
            objective_structure: None,
            constraint_structure: Vec::new(),
        }
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_g(&self) -> usize {
        self.n_g
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn eval_f(&self, v: &Vector) -> f64 {
        assert_eq!(v.len(), self.n_v, "eval_f: dimension mismatch");
        (self.f)(v)
    }

    pub fn eval_g(&self, v: &Vector) -> Vector {
        let out = (self.g)(v);
        assert_eq!(out.len(), self.n_g, "eval_g: dimension mismatch");
        out
    }

    pub fn eval_h(&self, v: &Vector) -> Vector {
        let out = (self.h)(v);
        assert_eq!(out.len(), self.n_h, "eval_h: dimension mismatch");
        out
    }

    pub fn eval_grad_f(&self, v: &Vector) -> Vector {
        let out = (self.grad_f)(v);
        assert_eq!(out.len(), self.n_v, "eval_grad_f: dimension mismatch");
        out
    }

    /// `n_g × n_v` Jacobian of the equalities.
    pub fn eval_jac_g(&self, v: &Vector) -> Matrix {
        let out = (self.jac_g)(v);
        assert_eq!((out.rows(), out.cols()), (self.n_g, self.n_v), "eval_jac_g: shape");
        out
    }

    /// `n_h × n_v` Jacobian of the inequalities.
    pub fn eval_jac_h(&self, v: &Vector) -> Matrix {
        let out = (self.jac_h)(v);
        assert_eq!((out.rows(), out.cols()), (self.n_h, self.n_v), "eval_jac_h: shape");
        out
    }

    pub fn has_hess_lagrangian(&self) -> bool {
        self.hess_lagrangian.is_some()
    }

    /// Hessian of the Lagrangian `∇²_v [f + λᵀg + µᵀh]` when the callback
    /// is available.
    pub fn eval_hess_lagrangian(&self, v: &Vector, lambda: &Vector, mu: &Vector) -> Option<Matrix> {
        let cb = self.hess_lagrangian.as_ref()?;
        assert_eq!(lambda.len(), self.n_g, "hess_lagrangian: lambda length");
        assert_eq!(mu.len(), self.n_h, "hess_lagrangian: mu length");
        let out = cb(v, lambda, mu);
        assert_eq!((out.rows(), out.cols()), (self.n_v, self.n_v), "hess_lagrangian: shape");
        debug_assert!(out.is_symmetric(1e-10), "hess_lagrangian: not symmetric");
        Some(out)
    }

    pub fn objective_structure(&self) -> Option<&ConvexComposite> {
        self.objective_structure.as_ref()
    }

    pub fn constraint_structure(&self) -> &[(usize, ConvexComposite)] {
        &self.constraint_structure
    }

    /// Lagrangian value `f + λᵀg + µᵀh`.
    pub fn lagrangian(&self, v: &Vector, lambda: &Vector, mu: &Vector) -> f64 {
        self.eval_f(v) + lambda.dot(&self.eval_g(v)) + mu.dot(&self.eval_h(v))
    }

    /// Gradient of the Lagrangian with respect to `v`.
    pub fn grad_lagrangian(&self, v: &Vector, lambda: &Vector, mu: &Vector) -> Vector {
        let mut grad = self.eval_grad_f(v);
        if self.n_g > 0 {
            grad.axpy(1.0, &self.eval_jac_g(v).matvec_transpose(lambda));
        }
        if self.n_h > 0 {
            grad.axpy(1.0, &self.eval_jac_h(v).matvec_transpose(mu));
        }
        grad
    }
}

pub struct NlpBuilder {
    n_v: usize,
    n_g: usize,
    n_h: usize,
    f: Option<ScalarFn>,
    g: Option<VectorFn>,
    h: Option<VectorFn>,
    grad_f: Option<VectorFn>,
    jac_g: Option<MatrixFn>,
    jac_h: Option<MatrixFn>,
    hess_lagrangian: Option<HessFn>,
    objective_structure: Option<ConvexComposite>,
    constraint_structure: Vec<(usize, ConvexComposite)>,
}

impl NlpBuilder {
    pub fn objective(
        mut self,
        f: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad_f: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.f = Some(Arc::new(f));
        self.grad_f = Some(Arc::new(grad_f));
        self
    }

    pub fn equalities(
        mut self,
        g: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jac_g: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.g = Some(Arc::new(g));
        self.jac_g = Some(Arc::new(jac_g));
        self
    }

    pub fn inequalities(
        mut self,
        h: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jac_h: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.h = Some(Arc::new(h));
        self.jac_h = Some(Arc::new(jac_h));
        self
    }

    pub fn hess_lagrangian(
        mut self,
        hl: impl Fn(&Vector, &Vector, &Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.hess_lagrangian = Some(Arc::new(hl));
        self
    }

    pub fn objective_structure(mut self, cc: ConvexComposite) -> Self {
        self.objective_structure = Some(cc);
        self
    }

    pub fn constraint_structure(mut self, row: usize, cc: ConvexComposite) -> Self {
        self.constraint_structure.push((row, cc));
        self
    }

    pub fn build(self) -> Nlp {
        let n_v = self.n_v;
        let n_g = self.n_g;
        let n_h = self.n_h;
        assert!(self.f.is_some() && self.grad_f.is_some(), "NlpBuilder: objective required");
        assert!(
            n_g == 0 || self.g.is_some(),
            "NlpBuilder: equalities declared but not provided"
        );
        assert!(
            n_h == 0 || self.h.is_some(),
            "NlpBuilder: inequalities declared but not provided"
        );
        for (row, _) in &self.constraint_structure {
            assert!(*row < n_h, "NlpBuilder: constraint structure row out of range");
        }
        Nlp {
            n_v,
            n_g,
            n_h,
            f: self.f.unwrap(),
            g: self.g.unwrap_or_else(|| Arc::new(|_| Vector::zeros(0))),
            h: self.h.unwrap_or_else(|| Arc::new(|_| Vector::zeros(0))),
            grad_f: self.grad_f.unwrap(),
            jac_g: self
                .jac_g
                .unwrap_or_else(move || Arc::new(move |_| Matrix::zeros(0, n_v))),
            jac_h: self
                .jac_h
                .unwrap_or_else(move || Arc::new(move |_| Matrix::zeros(0, n_v))),
            hess_lagrangian: self.hess_lagrangian,
            objective_structure: self.objective_structure,
            constraint_structure: self.constraint_structure,
        }
    }
}

// ── Primal-dual iterate ─────────────────────────────────────────────

/// Primal-dual point `z = (v, λ, µ)`: the state of the SQP fixed-point map.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualIterate {
    pub v: Vector,
    pub lambda: Vector,
    pub mu: Vector,
}

impl PrimalDualIterate {
    pub fn zeros(nlp: &Nlp) -> Self {
        PrimalDualIterate {
            v: Vector::zeros(nlp.n_v()),
            lambda: Vector::zeros(nlp.n_g()),
            mu: Vector::zeros(nlp.n_h()),
        }
    }

    pub fn new(v: Vector, lambda: Vector, mu: Vector) -> Self {
        PrimalDualIterate { v, lambda, mu }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.v.len(), self.lambda.len(), self.mu.len())
    }

    /// Stack into a flat vector `(v, λ, µ)`.
    pub fn to_flat(&self) -> Vector {
        Vector::concat(&[&self.v, &self.lambda, &self.mu])
    }

    pub fn from_flat(flat: &Vector, n_v: usize, n_g: usize, n_h: usize) -> Self {
        assert_eq!(flat.len(), n_v + n_g + n_h, "from_flat: length mismatch");
        PrimalDualIterate {
            v: flat.segment(0, n_v),
            lambda: flat.segment(n_v, n_g),
            mu: flat.segment(n_v + n_g, n_h),
        }
    }

    pub fn norm_inf_diff(&self, other: &Self) -> f64 {
        self.to_flat().sub(&other.to_flat()).norm_inf()
    }
}

// ── Derivative checking ─────────────────────────────────────────────

/// Worst-entry relative errors of each derivative block against central
/// finite differences.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeCheck {
    pub grad_f: f64,
    pub jac_g: f64,
    pub jac_h: f64,
    /// `None` when the NLP has no Lagrangian Hessian callback.
    pub hess_lagrangian: Option<f64>,
}

impl DerivativeCheck {
    pub fn worst(&self) -> f64 {
        self.grad_f
            .max(self.jac_g)
            .max(self.jac_h)
            .max(self.hess_lagrangian.unwrap_or(0.0))
    }
}

fn rel_err(analytic: f64, reference: f64) -> f64 {
    (analytic - reference).abs() / (1.0 + reference.abs())
}

/// Compare the NLP's derivative callbacks against central finite
/// differences with step `h_fd` and report the worst entry per block.
///
/// The Hessian block is contracted with deterministic non-trivial
/// multipliers `λᵢ = sin(i+1)`, `µᵢ = |cos(i+1)|` so constraint curvature
/// is exercised.
pub fn check_derivatives(nlp: &Nlp, v: &Vector, h_fd: f64) -> DerivativeCheck {
    assert!(h_fd > 0.0, "check_derivatives: h_fd must be positive");
    let n_v = nlp.n_v();

    let fd_scalar = |f: &dyn Fn(&Vector) -> f64, i: usize| -> f64 {
        let mut vp = v.clone();
        let mut vm = v.clone();
        vp[i] += h_fd;
        vm[i] -= h_fd;
        (f(&vp) - f(&vm)) / (2.0 * h_fd)
    };

    let grad = nlp.eval_grad_f(v);
    let mut grad_err = 0.0f64;
    for i in 0..n_v {
        grad_err = grad_err.max(rel_err(grad[i], fd_scalar(&|x| nlp.eval_f(x), i)));
    }

    let mut jac_g_err = 0.0f64;
    if nlp.n_g() > 0 {
        let jac = nlp.eval_jac_g(v);
        for i in 0..n_v {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += h_fd;
            vm[i] -= h_fd;
            let col = nlp.eval_g(&vp).sub(&nlp.eval_g(&vm)).scale(1.0 / (2.0 * h_fd));
            for r in 0..nlp.n_g() {
                jac_g_err = jac_g_err.max(rel_err(jac[(r, i)], col[r]));
            }
        }
    }

    let mut jac_h_err = 0.0f64;
    if nlp.n_h() > 0 {
        let jac = nlp.eval_jac_h(v);
        for i in 0..n_v {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += h_fd;
            vm[i] -= h_fd;
            let col = nlp.eval_h(&vp).sub(&nlp.eval_h(&vm)).scale(1.0 / (2.0 * h_fd));
            for r in 0..nlp.n_h() {
                jac_h_err = jac_h_err.max(rel_err(jac[(r, i)], col[r]));
            }
        }
    }

    let hess_err = if nlp.has_hess_lagrangian() {
        let lambda = Vector::from_fn(nlp.n_g(), |i| ((i + 1) as f64).sin());
        let mu = Vector::from_fn(nlp.n_h(), |i| ((i + 1) as f64).cos().abs());
        let hess = nlp.eval_hess_lagrangian(v, &lambda, &mu).unwrap();
        let mut err = 0.0f64;
        for i in 0..n_v {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += h_fd;
            vm[i] -= h_fd;
            let col = nlp
                .grad_lagrangian(&vp, &lambda, &mu)
                .sub(&nlp.grad_lagrangian(&vm, &lambda, &mu))
                .scale(1.0 / (2.0 * h_fd));
            for r in 0..n_v {
                err = err.max(rel_err(hess[(r, i)], col[r]));
            }
        }
        Some(err)
    } else {
        None
    };

    DerivativeCheck { grad_f: grad_err, jac_g: jac_g_err, jac_h: jac_h_err, hess_lagrangian: hess_err }
}

// ── L1 penalty reformulation ────────────────────────────────────────

/// One exact-penalty term `weight · |coeffsᵀv + offset|`.
#[derive(Debug, Clone)]
pub struct L1Term {
    pub weight: f64,
    pub coeffs: Vector,
    pub offset: f64,
}

/// Reformulate `f(v) + Σ wᵢ|aᵢᵀv + bᵢ|` as a smooth NLP by introducing a
/// slack pair `(s⁺, s⁻) ≥ 0` per term with `aᵢᵀv + bᵢ = s⁺ − s⁻` and
/// objective term `wᵢ(s⁺ + s⁻)`.
///
/// Variable layout: `v' = (v, s⁺₁, s⁻₁, …)`. The original solution is
/// recovered by dropping the slacks.
pub fn reformulate_l1_penalty(nlp: Nlp, terms: &[L1Term]) -> Nlp {
    for t in terms {
        assert!(t.weight > 0.0, "reformulate_l1_penalty: weights must be positive");
        assert_eq!(t.coeffs.len(), nlp.n_v(), "reformulate_l1_penalty: coeff length");
    }
    if terms.is_empty() {
        return nlp;
    }
    let base = Arc::new(nlp);
    let n_v0 = base.n_v();
    let n_g0 = base.n_g();
    let n_h0 = base.n_h();
    let k = terms.len();
    let n_v = n_v0 + 2 * k;
    let n_g = n_g0 + k;
    let n_h = n_h0 + 2 * k;
    let terms: Arc<Vec<L1Term>> = Arc::new(terms.to_vec());

    let split = move |v: &Vector| -> Vector { v.segment(0, n_v0) };

    let b = base.clone();
    let t = terms.clone();
    let f = move |v: &Vector| -> f64 {
        let v0 = split(v);
        let mut val = b.eval_f(&v0);
        for (i, term) in t.iter().enumerate() {
            val += term.weight * (v[n_v0 + 2 * i] + v[n_v0 + 2 * i + 1]);
        }
        val
    };
    let b = base.clone();
    let t = terms.clone();
    let grad_f = move |v: &Vector| -> Vector {
        let v0 = split(v);
        let g0 = b.eval_grad_f(&v0);
        let mut out = Vector::zeros(n_v);
        out.as_mut_slice()[..n_v0].copy_from_slice(g0.as_slice());
        for (i, term) in t.iter().enumerate() {
            out[n_v0 + 2 * i] = term.weight;
            out[n_v0 + 2 * i + 1] = term.weight;
        }
        out
    };
    let b = base.clone();
    let t = terms.clone();
    let g = move |v: &Vector| -> Vector {
        let v0 = split(v);
        let mut out = Vector::zeros(n_g);
        out.as_mut_slice()[..n_g0].copy_from_slice(b.eval_g(&v0).as_slice());
        for (i, term) in t.iter().enumerate() {
            out[n_g0 + i] =
                term.coeffs.dot(&v0) + term.offset - v[n_v0 + 2 * i] + v[n_v0 + 2 * i + 1];
        }
        out
    };
    let b = base.clone();
    let t = terms.clone();
    let jac_g = move |v: &Vector| -> Matrix {
        let v0 = split(v);
        let mut out = Matrix::zeros(n_g, n_v);
        if n_g0 > 0 {
            out.set_block(0, 0, &b.eval_jac_g(&v0));
        }
        for (i, term) in t.iter().enumerate() {
            for j in 0..n_v0 {
                out[(n_g0 + i, j)] = term.coeffs[j];
            }
            out[(n_g0 + i, n_v0 + 2 * i)] = -1.0;
            out[(n_g0 + i, n_v0 + 2 * i + 1)] = 1.0;
        }
        out
    };
    let b = base.clone();
    let h = move |v: &Vector| -> Vector {
        let v0 = split(v);
        let mut out = Vector::zeros(n_h);
        out.as_mut_slice()[..n_h0].copy_from_slice(b.eval_h(&v0).as_slice());
        for i in 0..k {
            out[n_h0 + 2 * i] = -v[n_v0 + 2 * i];
            out[n_h0 + 2 * i + 1] = -v[n_v0 + 2 * i + 1];
        }
        out
    };
    let b = base.clone();
    let jac_h = move |v: &Vector| -> Matrix {
        let v0 = split(v);
        let mut out = Matrix::zeros(n_h, n_v);
        if n_h0 > 0 {
            out.set_block(0, 0, &b.eval_jac_h(&v0));
        }
        for i in 0..k {
            out[(n_h0 + 2 * i, n_v0 + 2 * i)] = -1.0;
            out[(n_h0 + 2 * i + 1, n_v0 + 2 * i + 1)] = -1.0;
        }
        out
    };

    let mut builder = Nlp::builder(n_v, n_g, n_h)
        .objective(f, grad_f)
        .equalities(g, jac_g)
        .inequalities(h, jac_h);

    if base.has_hess_lagrangian() {
        let b = base.clone();
        builder = builder.hess_lagrangian(move |v, lambda, mu| {
            // slacks and penalty rows are affine: curvature lives in the
            // original block only
            let v0 = split(v);
            let l0 = lambda.segment(0, n_g0);
            let m0 = mu.segment(0, n_h0);
            let h0 = b.eval_hess_lagrangian(&v0, &l0, &m0).unwrap();
            let mut out = Matrix::zeros(n_v, n_v);
            out.set_block(0, 0, &h0);
            out
        });
    }
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_nlp() -> Nlp {
        // f = ½(v₁² + 4v₂²) + v₁,  g = v₁ + v₂ − 1
        Nlp::builder(2, 1, 0)
            .objective(
                |v| 0.5 * (v[0] * v[0] + 4.0 * v[1] * v[1]) + v[0],
                |v| Vector::from_slice(&[v[0] + 1.0, 4.0 * v[1]]),
            )
            .equalities(
                |v| Vector::from_slice(&[v[0] + v[1] - 1.0]),
                |_| Matrix::from_rows(&[&[1.0, 1.0]]),
            )
            .hess_lagrangian(|_, _, _| Matrix::diag(&[1.0, 4.0]))
            .build()
    }

    #[test]
    fn derivative_check_quadratic_is_exact() {
        let nlp = quadratic_nlp();
        let v = Vector::from_slice(&[0.3, -0.7]);
        let check = check_derivatives(&nlp, &v, 1e-5);
        assert!(check.worst() < 1e-9, "worst error {}", check.worst());
    }

    #[test]
    fn derivative_check_flags_wrong_gradient() {
        let nlp = Nlp::builder(1, 0, 0)
            .objective(|v| v[0] * v[0], |v| Vector::from_slice(&[2.0 * v[0] + 0.5]))
            .build();
        let check = check_derivatives(&nlp, &Vector::from_slice(&[0.2]), 1e-5);
        assert!(check.grad_f > 1e-2);
    }

    #[test]
    fn flat_roundtrip() {
        let z = PrimalDualIterate::new(
            Vector::from_slice(&[1.0, 2.0]),
            Vector::from_slice(&[3.0]),
            Vector::from_slice(&[4.0, 5.0]),
        );
        let flat = z.to_flat();
        assert_eq!(flat.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let back = PrimalDualIterate::from_flat(&flat, 2, 1, 2);
        assert_eq!(back, z);
    }

    #[test]
    fn l1_reformulation_empty_terms_is_identity() {
        let nlp = quadratic_nlp();
        let v = Vector::from_slice(&[0.4, 0.6]);
        let f_before = nlp.eval_f(&v);
        let same = reformulate_l1_penalty(nlp, &[]);
        assert_eq!(same.n_v(), 2);
        assert_eq!(same.eval_f(&v), f_before);
    }

    #[test]
    fn l1_reformulation_exact_fit_point() {
        // minimize |v − 1|: at (v, s⁺, s⁻) = (1, 0, 0) everything vanishes
        let base = Nlp::builder(1, 0, 0)
            .objective(|_| 0.0, |_| Vector::zeros(1))
            .build();
        let terms = [L1Term { weight: 1.0, coeffs: Vector::from_slice(&[1.0]), offset: -1.0 }];
        let nlp = reformulate_l1_penalty(base, &terms);
        assert_eq!((nlp.n_v(), nlp.n_g(), nlp.n_h()), (3, 1, 2));
        let at = Vector::from_slice(&[1.0, 0.0, 0.0]);
        assert_eq!(nlp.eval_f(&at), 0.0);
        assert!(nlp.eval_g(&at).norm_inf() < 1e-15);
        assert!(nlp.eval_h(&at).norm_inf() < 1e-15);
    }

    #[test]
    fn l1_reformulation_dominates_exact_penalty() {
        // for any feasible slack assignment, objective ≥ original + exact L1,
        // with equality at s⁺ = max(expr, 0), s⁻ = max(−expr, 0)
        let base = Nlp::builder(1, 0, 0)
            .objective(|v| v[0] * v[0], |v| Vector::from_slice(&[2.0 * v[0]]))
            .build();
        let w = 2.0;
        let terms = [L1Term { weight: w, coeffs: Vector::from_slice(&[1.0]), offset: -1.0 }];
        let nlp = reformulate_l1_penalty(base, &terms);
        for i in 0..50 {
            let v = -2.0 + 0.08 * i as f64;
            let expr = v - 1.0;
            let exact = v * v + w * expr.abs();
            // equality case
            let tight =
                Vector::from_slice(&[v, expr.max(0.0), (-expr).max(0.0)]);
            assert!(nlp.eval_g(&tight).norm_inf() < 1e-12);
            assert!((nlp.eval_f(&tight) - exact).abs() < 1e-12);
            // padded slacks stay feasible but cost more
            let padded = Vector::from_slice(&[v, expr.max(0.0) + 0.3, (-expr).max(0.0) + 0.3]);
            assert!(nlp.eval_g(&padded).norm_inf() < 1e-12);
            assert!(nlp.eval_f(&padded) > exact);
        }
    }

    #[test]
    fn l1_reformulation_derivatives_consistent() {
        let base = Nlp::builder(2, 0, 0)
            .objective(
                |v| v[0] * v[0] + 0.5 * v[1] * v[1],
                |v| Vector::from_slice(&[2.0 * v[0], v[1]]),
            )
            .hess_lagrangian(|_, _, _| Matrix::diag(&[2.0, 1.0]))
            .build();
        let terms = [L1Term {
            weight: 1.5,
            coeffs: Vector::from_slice(&[1.0, -1.0]),
            offset: 0.25,
        }];
        let nlp = reformulate_l1_penalty(base, &terms);
        let v = Vector::from_slice(&[0.1, -0.2, 0.3, 0.4]);
        let check = check_derivatives(&nlp, &v, 1e-5);
        assert!(check.worst() < 1e-9, "worst error {}", check.worst());
    }
}
