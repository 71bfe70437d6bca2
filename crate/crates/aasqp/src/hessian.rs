//! Hessian strategies for the QP subproblem
//!
//! Produces the matrix `W(z)` used in the local QP: the exact Lagrangian
//! Hessian (optionally shifted by a Levenberg-Marquardt term or projected
//! onto the positive-definite cone), the Gauss-Newton curvature of the
//! objective (GGN), or GGN plus the convex constraint curvature weighted
//! by the current multipliers (SCQP).
//!
//! Every strategy except raw `Exact` guarantees a positive-semidefinite
//! result. The exact Hessian is in general indefinite and must not reach
//! the QP solver unregularized; selecting it without a regularizer is
//! rejected at configuration time by the solve driver.

use crate::linalg::{sym_eig, Matrix, Vector};
use crate::nlp::{Nlp, PrimalDualIterate};
use thiserror::Error;

/// Default eigenvalue floor for the projection regularizer.
pub const DEFAULT_PROJECTION_EPS: f64 = 1e-6;
/// Default Levenberg-Marquardt shift.
pub const DEFAULT_LM_GAMMA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HessianError {
    /// GGN/SCQP requested but the NLP carries no structure descriptor.
    #[error("NLP has no convex-over-nonlinear structure descriptor")]
    MissingStructure,
    /// Exact Hessian requested but the NLP has no Lagrangian Hessian callback.
    #[error("NLP has no Lagrangian Hessian callback")]
    MissingHessian,
}

/// Hessian strategy selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HessianStrategy {
    /// Exact Lagrangian Hessian, unregularized. Only valid where the
    /// caller guarantees positive definiteness (analysis and tests).
    Exact,
    /// Exact Hessian shifted by `γ_lm · I`.
    ExactLm { gamma: f64 },
    /// Exact Hessian with eigenvalues clipped from below at `ε_proj`.
    ExactProject { epsilon: f64 },
    /// Gauss-Newton curvature of the objective composite.
    Ggn,
    /// GGN plus multiplier-weighted convex constraint curvature.
    Scqp,
}

impl HessianStrategy {
    /// Parse the configuration string used by the CLI and config files:
    /// `exact+project`, `exact+lm`, `ggn`, `scqp`.
    pub fn parse(s: &str) -> Option<HessianStrategy> {
        match s {
            "exact+project" => Some(HessianStrategy::ExactProject { epsilon: DEFAULT_PROJECTION_EPS }),
            "exact+lm" => Some(HessianStrategy::ExactLm { gamma: DEFAULT_LM_GAMMA }),
            "ggn" => Some(HessianStrategy::Ggn),
            "scqp" => Some(HessianStrategy::Scqp),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HessianStrategy::Exact => "exact",
            HessianStrategy::ExactLm { .. } => "exact+lm",
            HessianStrategy::ExactProject { .. } => "exact+project",
            HessianStrategy::Ggn => "ggn",
            HessianStrategy::Scqp => "scqp",
        }
    }

    /// Whether the produced `W` depends only on structure that is exact at
    /// the solution (raw exact Hessian).
    pub fn is_exact(&self) -> bool {
        matches!(self, HessianStrategy::Exact)
    }

    /// Evaluate the strategy at `z`.
    pub fn evaluate(&self, nlp: &Nlp, z: &PrimalDualIterate) -> Result<Matrix, HessianError> {
        match *self {
            HessianStrategy::Exact => exact_hessian(nlp, z),
            HessianStrategy::ExactLm { gamma } => {
                Ok(levenberg_marquardt(&exact_hessian(nlp, z)?, gamma))
            }
            HessianStrategy::ExactProject { epsilon } => {
                Ok(project_regularize(&exact_hessian(nlp, z)?, epsilon))
            }
            HessianStrategy::Ggn => ggn_hessian(nlp, z),
            HessianStrategy::Scqp => scqp_hessian(nlp, z),
        }
    }
}

/// Exact Lagrangian Hessian `∇²_v L(v, λ, µ)`.
pub fn exact_hessian(nlp: &Nlp, z: &PrimalDualIterate) -> Result<Matrix, HessianError> {
    nlp.eval_hess_lagrangian(&z.v, &z.lambda, &z.mu)
        .ok_or(HessianError::MissingHessian)
}

/// Gauss-Newton curvature `J₀ᵀ ∇²φ₀(F₀(v)) J₀` of the objective composite.
///
/// Independent of the multipliers; positive semidefinite whenever the
/// outer Hessian is.
pub fn ggn_hessian(nlp: &Nlp, z: &PrimalDualIterate) -> Result<Matrix, HessianError> {
    let cc = nlp.objective_structure().ok_or(HessianError::MissingStructure)?;
    Ok(cc.curvature(&z.v))
}

/// SCQP curvature: GGN objective term plus `Σ max(µᵢ, 0) · Jᵢᵀ∇²φᵢJᵢ`
/// over the inequalities carrying convex structure.
///
/// Transiently negative multiplier estimates are clamped at zero so the
/// result stays positive semidefinite.
pub fn scqp_hessian(nlp: &Nlp, z: &PrimalDualIterate) -> Result<Matrix, HessianError> {
    let mut w = ggn_hessian(nlp, z)?;
    for (row, cc) in nlp.constraint_structure() {
        let weight = z.mu[*row].max(0.0);
        if weight > 0.0 {
            w = w.add_scaled(weight, &cc.curvature(&z.v));
        }
    }
    Ok(w)
}

/// Levenberg-Marquardt shift `W + γ·I`; every eigenvalue moves up by
/// exactly `γ`.
pub fn levenberg_marquardt(w: &Matrix, gamma: f64) -> Matrix {
    assert!(gamma >= 0.0, "levenberg_marquardt: gamma must be nonnegative");
    assert!(w.is_square(), "levenberg_marquardt: matrix not square");
    let mut out = w.clone();
    for i in 0..w.rows() {
        out[(i, i)] += gamma;
    }
    out
}

/// Eigenvalue projection: `V·diag(max(λᵢ, ε))·Vᵀ`, so the result is
/// symmetric with minimum eigenvalue at least `ε`.
pub fn project_regularize(w: &Matrix, epsilon: f64) -> Matrix {
    assert!(epsilon > 0.0, "project_regularize: epsilon must be positive");
    let (vals, vecs) = sym_eig(w).expect("project_regularize: matrix must be symmetric");
    if (0..vals.len()).all(|i| vals[i] >= epsilon) {
        return w.clone();
    }
    let clipped = Vector::from_fn(vals.len(), |i| vals[i].max(epsilon));
    vecs.matmul(&Matrix::diag(clipped.as_slice()))
        .matmul(&vecs.transpose())
        .symmetrize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::nlp::ConvexComposite;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn min_eig(w: &Matrix) -> f64 {
        let (vals, _) = sym_eig(w).unwrap();
        vals[0]
    }

    /// f(v) = ½ sin(v)², structure φ(y) = ½y², F(v) = sin(v).
    fn sine_composite_nlp() -> Nlp {
        Nlp::builder(1, 0, 0)
            .objective(
                |v| 0.5 * v[0].sin().powi(2),
                |v| Vector::from_slice(&[v[0].sin() * v[0].cos()]),
            )
            .hess_lagrangian(|v, _, _| {
                // d/dv [sin cos] = cos² − sin²
                Matrix::from_rows(&[&[v[0].cos().powi(2) - v[0].sin().powi(2)]])
            })
            .objective_structure(ConvexComposite {
                dim_out: 1,
                inner: Arc::new(|v: &Vector| Vector::from_slice(&[v[0].sin()])),
                inner_jac: Arc::new(|v: &Vector| Matrix::from_rows(&[&[v[0].cos()]])),
                outer_hessian: Arc::new(|_| Matrix::identity(1)),
            })
            .build()
    }

    #[test]
    fn exact_hessian_constant_quadratic() {
        let nlp = Nlp::builder(2, 0, 0)
            .objective(
                |v| v[0] * v[0] + 2.0 * v[1] * v[1],
                |v| Vector::from_slice(&[2.0 * v[0], 4.0 * v[1]]),
            )
            .hess_lagrangian(|_, _, _| Matrix::diag(&[2.0, 4.0]))
            .build();
        let z = PrimalDualIterate::zeros(&nlp);
        let w = exact_hessian(&nlp, &z).unwrap();
        assert_eq!(w, Matrix::diag(&[2.0, 4.0]));
    }

    #[test]
    fn ggn_scalar_sine_is_cos_squared() {
        let nlp = sine_composite_nlp();
        for v0 in [-1.2, 0.0, 0.4, 2.0] {
            let z = PrimalDualIterate::new(Vector::from_slice(&[v0]), Vector::zeros(0), Vector::zeros(0));
            let w = ggn_hessian(&nlp, &z).unwrap();
            assert!((w[(0, 0)] - v0.cos().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn ggn_missing_structure_errors() {
        let nlp = Nlp::builder(1, 0, 0)
            .objective(|v| v[0] * v[0], |v| Vector::from_slice(&[2.0 * v[0]]))
            .build();
        let z = PrimalDualIterate::zeros(&nlp);
        assert!(matches!(ggn_hessian(&nlp, &z), Err(HessianError::MissingStructure)));
    }

    /// NLP with one structured inequality φ(F(v)) = ‖v‖² − 1 ≤ 0.
    fn structured_constraint_nlp() -> Nlp {
        Nlp::builder(2, 0, 1)
            .objective(|v| v[0] + v[1], |_| Vector::from_slice(&[1.0, 1.0]))
            .inequalities(
                |v| Vector::from_slice(&[v[0] * v[0] + v[1] * v[1] - 1.0]),
                |v| Matrix::from_rows(&[&[2.0 * v[0], 2.0 * v[1]]]),
            )
            .objective_structure(ConvexComposite {
                dim_out: 2,
                inner: Arc::new(|v: &Vector| v.clone()),
                inner_jac: Arc::new(|_| Matrix::identity(2)),
                outer_hessian: Arc::new(|_| Matrix::zeros(2, 2)),
            })
            .constraint_structure(
                0,
                ConvexComposite {
                    dim_out: 2,
                    inner: Arc::new(|v: &Vector| v.clone()),
                    inner_jac: Arc::new(|_| Matrix::identity(2)),
                    outer_hessian: Arc::new(|_| Matrix::identity(2).scale(2.0)),
                },
            )
            .build()
    }

    #[test]
    fn scqp_without_constraint_weight_equals_ggn() {
        let nlp = structured_constraint_nlp();
        let z = PrimalDualIterate::new(
            Vector::from_slice(&[0.3, 0.4]),
            Vector::zeros(0),
            Vector::from_slice(&[0.0]),
        );
        let ggn = ggn_hessian(&nlp, &z).unwrap();
        let scqp = scqp_hessian(&nlp, &z).unwrap();
        assert_eq!(ggn, scqp);
    }

    #[test]
    fn scqp_adds_weighted_constraint_curvature() {
        let nlp = structured_constraint_nlp();
        let z = PrimalDualIterate::new(
            Vector::from_slice(&[0.3, 0.4]),
            Vector::zeros(0),
            Vector::from_slice(&[1.5]),
        );
        let w = scqp_hessian(&nlp, &z).unwrap();
        // GGN part zero, constraint term 1.5 · 2I
        assert!((w[(0, 0)] - 3.0).abs() < 1e-14);
        assert!((w[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(w[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn scqp_clamps_negative_multipliers() {
        let nlp = structured_constraint_nlp();
        let z_neg = PrimalDualIterate::new(
            Vector::from_slice(&[0.3, 0.4]),
            Vector::zeros(0),
            Vector::from_slice(&[-2.0]),
        );
        let w = scqp_hessian(&nlp, &z_neg).unwrap();
        assert!(min_eig(&w) >= -1e-12);
        assert_eq!(w, Matrix::zeros(2, 2));
    }

    #[test]
    fn ggn_and_scqp_independent_of_lambda() {
        let nlp = sine_composite_nlp();
        let z_a = PrimalDualIterate::new(Vector::from_slice(&[0.7]), Vector::zeros(0), Vector::zeros(0));
        let w_a = ggn_hessian(&nlp, &z_a).unwrap();
        // a second NLP with equalities to perturb lambda on
        let nlp2 = Nlp::builder(2, 1, 0)
            .objective(|v| v[0] * v[0], |v| Vector::from_slice(&[2.0 * v[0], 0.0]))
            .equalities(
                |v| Vector::from_slice(&[v[0] + v[1]]),
                |_| Matrix::from_rows(&[&[1.0, 1.0]]),
            )
            .objective_structure(ConvexComposite {
                dim_out: 1,
                inner: Arc::new(|v: &Vector| Vector::from_slice(&[v[0]])),
                inner_jac: Arc::new(|_| Matrix::from_rows(&[&[1.0, 0.0]])),
                outer_hessian: Arc::new(|_| Matrix::identity(1).scale(2.0)),
            })
            .build();
        let mk = |lam: f64| {
            PrimalDualIterate::new(
                Vector::from_slice(&[0.2, -0.2]),
                Vector::from_slice(&[lam]),
                Vector::zeros(0),
            )
        };
        let w0 = ggn_hessian(&nlp2, &mk(0.0)).unwrap();
        let w1 = ggn_hessian(&nlp2, &mk(17.0)).unwrap();
        assert_eq!(w0, w1); // bitwise
        let _ = w_a;
    }

    #[test]
    fn lm_shift_examples() {
        let w = Matrix::diag(&[-1.0, 2.0]);
        assert_eq!(levenberg_marquardt(&w, 0.0), w);
        assert_eq!(levenberg_marquardt(&w, 2.0), Matrix::diag(&[1.0, 4.0]));
    }

    #[test]
    fn lm_shifts_every_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let a = Matrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let w = a.symmetrize();
        let gamma = 0.37;
        let (before, _) = sym_eig(&w).unwrap();
        let (after, _) = sym_eig(&levenberg_marquardt(&w, gamma)).unwrap();
        for i in 0..5 {
            assert!((after[i] - before[i] - gamma).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_examples() {
        // already sufficiently positive definite: unchanged
        let w = Matrix::diag(&[0.5, 2.0]);
        let out = project_regularize(&w, 1e-4);
        assert!(out.sub(&w).max_abs() < 1e-10);
        // diagonal clip
        let w = Matrix::diag(&[-3.0, 5.0]);
        let out = project_regularize(&w, 1e-4);
        assert!((out[(0, 0)] - 1e-4).abs() < 1e-12);
        assert!((out[(1, 1)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn projection_floors_random_indefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..10 {
            let a = Matrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
            let w = a.symmetrize();
            let eps = 1e-4;
            let out = project_regularize(&w, eps);
            assert!(min_eig(&out) >= eps * (1.0 - 1e-8));
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let a = Matrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let w = a.symmetrize();
        let eps = 1e-4;
        let once = project_regularize(&w, eps);
        let twice = project_regularize(&once, eps);
        assert!(twice.sub(&once).max_abs() < 1e-10);
    }

    #[test]
    fn lm_and_projection_commute_on_diagonals() {
        // both orders act entrywise on a diagonal matrix; they agree exactly
        // whenever the eigenvalue clip stays inactive under either order
        let eps = 1e-4;
        let gamma = 0.5;
        let w = Matrix::diag(&[2e-4, 1.0, 3.0]);
        let a = project_regularize(&levenberg_marquardt(&w, gamma), eps);
        let b = levenberg_marquardt(&project_regularize(&w, eps), gamma);
        assert!(a.sub(&b).max_abs() < 1e-12);
        for i in 0..3 {
            assert!((a[(i, i)] - (w[(i, i)] + gamma)).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_strategy_strings() {
        assert_eq!(
            HessianStrategy::parse("exact+project"),
            Some(HessianStrategy::ExactProject { epsilon: DEFAULT_PROJECTION_EPS })
        );
        assert_eq!(
            HessianStrategy::parse("exact+lm"),
            Some(HessianStrategy::ExactLm { gamma: DEFAULT_LM_GAMMA })
        );
        assert_eq!(HessianStrategy::parse("ggn"), Some(HessianStrategy::Ggn));
        assert_eq!(HessianStrategy::parse("scqp"), Some(HessianStrategy::Scqp));
        assert_eq!(HessianStrategy::parse("bfgs"), None);
    }
}
