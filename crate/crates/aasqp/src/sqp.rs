//! The SQP-type fixed-point map and its driver loop
//!
//! One iteration linearizes the NLP at the current primal-dual point
//! `z_k = (v_k, λ_k, µ_k)`, builds the convex QP subproblem with the
//! configured Hessian strategy, solves it, and takes the full primal-dual
//! step `z_{k+1} = π(z_k)`. No globalization is performed: the methods
//! here are studied in their local regime and experiments start inside the
//! basin of attraction.
//!
//! Zero-order mode freezes the equality constraint Jacobian at a reference
//! point; the iteration then converges to the solution of a perturbed
//! problem whose gradient offset is reported by [`perturbation_vector`].
//! Termination for such inexact methods is therefore on the step norm,
//! while the true KKT residual is still logged.

use crate::anderson::{aa_step, should_activate, AndersonState};
use crate::hessian::{HessianError, HessianStrategy};
use crate::linalg::{Matrix, Vector};
use crate::nlp::{Nlp, PrimalDualIterate};
use crate::qp::{solve_qp, QpData, QpError, QpSolution, QP_DEFAULT_TOL};
use crate::report::{ConvergenceReport, IterationRecord, SolveMode};
use thiserror::Error;

pub use crate::anderson::AndersonConfig;

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct SqpConfig {
    pub hessian: HessianStrategy,
    /// Freeze the equality Jacobian at this point (zero-order mode).
    pub zero_order: Option<Vector>,
    /// Correct the QP gradient with `(∇g(v) − A)ᵀλ` so the zero-order
    /// fixed point satisfies the original stationarity conditions.
    pub adjoint_correction: bool,
    pub max_iter: usize,
    /// Termination threshold: on the true KKT residual ∞-norm in exact
    /// mode, on the step ∞-norm in zero-order mode.
    pub kkt_tol: f64,
    pub anderson: AndersonConfig,
    /// Tolerance handed to the QP solver.
    pub qp_tol: f64,
}

impl Default for SqpConfig {
    fn default() -> Self {
        SqpConfig {
            hessian: HessianStrategy::Scqp,
            zero_order: None,
            adjoint_correction: false,
            max_iter: 200,
            kkt_tol: 1e-8,
            anderson: AndersonConfig::default(),
            qp_tol: QP_DEFAULT_TOL,
        }
    }
}

impl SqpConfig {
    pub fn validate(&self) -> Result<(), SqpError> {
        if self.max_iter < 1 {
            return Err(SqpError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(SqpError::InvalidConfig("kkt_tol must be positive".into()));
        }
        if self.hessian.is_exact() {
            return Err(SqpError::InvalidConfig(
                "the exact Hessian must be paired with a regularizer (exact+project or exact+lm)"
                    .into(),
            ));
        }
        if self.adjoint_correction && self.zero_order.is_none() {
            return Err(SqpError::InvalidConfig(
                "adjoint correction requires zero-order mode".into(),
            ));
        }
        self.anderson.validate().map_err(SqpError::InvalidConfig)?;
        Ok(())
    }

    pub fn mode(&self) -> SolveMode {
        if self.zero_order.is_some() {
            SolveMode::ZeroOrder
        } else {
            SolveMode::Exact
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum SqpError {
    #[error("QP subproblem failed: {0}")]
    Qp(#[from] QpError),
    #[error("Hessian strategy failed: {0}")]
    Hessian(#[from] HessianError),
    #[error("linearization produced non-finite values")]
    LinearizationFailure,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("iteration limit reached without convergence")]
    MaxIterReached(Box<(PrimalDualIterate, ConvergenceReport)>),
}

/// Blockwise KKT residual of the original NLP at `z`, always with exact
/// derivatives: termination measures true optimality regardless of the
/// strategy's inexactness.
#[derive(Debug, Clone)]
pub struct KktResidual {
    pub stationarity: Vector,
    pub eq_feas: Vector,
    /// Entrywise positive parts of `h(v)`.
    pub ineq_feas: Vector,
    /// Entrywise products `µᵢ hᵢ(v)`.
    pub comp: Vector,
    pub norm_inf: f64,
}

pub fn kkt_residual(nlp: &Nlp, z: &PrimalDualIterate) -> KktResidual {
    let stationarity = nlp.grad_lagrangian(&z.v, &z.lambda, &z.mu);
    let eq_feas = nlp.eval_g(&z.v);
    let h = nlp.eval_h(&z.v);
    let ineq_feas = Vector::from_fn(h.len(), |i| h[i].max(0.0));
    let comp = Vector::from_fn(h.len(), |i| z.mu[i] * h[i]);
    let norm_inf = stationarity
        .norm_inf()
        .max(eq_feas.norm_inf())
        .max(ineq_feas.norm_inf())
        .max(comp.norm_inf());
    KktResidual { stationarity, eq_feas, ineq_feas, comp, norm_inf }
}

/// Frozen data reused across all iterations of one solve.
struct Frozen {
    /// Equality Jacobian at the reference point (zero-order mode).
    jac_g: Option<Matrix>,
}

impl Frozen {
    fn prepare(nlp: &Nlp, config: &SqpConfig) -> Frozen {
        let jac_g = config.zero_order.as_ref().map(|v_bar| nlp.eval_jac_g(v_bar));
        Frozen { jac_g }
    }
}

/// Assemble the QP subproblem at `z` under `config`.
fn linearize(
    nlp: &Nlp,
    z: &PrimalDualIterate,
    config: &SqpConfig,
    frozen: &Frozen,
) -> Result<QpData, SqpError> {
    let w = config.hessian.evaluate(nlp, z)?;
    let mut q = nlp.eval_grad_f(&z.v);
    let jac_g_used = match &frozen.jac_g {
        Some(frozen_jac) => frozen_jac.clone(),
        None => nlp.eval_jac_g(&z.v),
    };
    if config.adjoint_correction {
        if let Some(frozen_jac) = &frozen.jac_g {
            let diff = nlp.eval_jac_g(&z.v).sub(frozen_jac);
            q.axpy(1.0, &diff.matvec_transpose(&z.lambda));
        }
    }
    let g0 = nlp.eval_g(&z.v);
    let h0 = nlp.eval_h(&z.v);
    let h_jac = nlp.eval_jac_h(&z.v);
    if !(w.all_finite() && q.all_finite() && g0.all_finite() && h0.all_finite()) {
        return Err(SqpError::LinearizationFailure);
    }
    Ok(QpData {
        w,
        q,
        g: jac_g_used.transpose(),
        g0,
        h: h_jac.transpose(),
        h0,
    })
}

fn apply_qp_step(z: &PrimalDualIterate, qp_sol: &QpSolution) -> PrimalDualIterate {
    PrimalDualIterate::new(z.v.add(&qp_sol.d), qp_sol.lambda.clone(), qp_sol.mu.clone())
}

/// One application of the fixed-point map `π`: build the QP at `z`, solve
/// it, return the full-step primal-dual successor.
pub fn sqp_step(
    nlp: &Nlp,
    z: &PrimalDualIterate,
    config: &SqpConfig,
) -> Result<PrimalDualIterate, SqpError> {
    let frozen = Frozen::prepare(nlp, config);
    let (z_next, _) = sqp_step_with_details(nlp, z, config, &frozen, None)?;
    Ok(z_next)
}

/// Result of [`evaluate_map`]: the successor iterate and the QP active set
/// that produced it.
pub struct StepOutcome {
    pub z_next: PrimalDualIterate,
    pub active_set: Vec<usize>,
}

/// Apply `π` once and expose the QP active set; used by the convergence
/// analysis to differentiate the map numerically while guarding against
/// active-set changes.
pub fn evaluate_map(
    nlp: &Nlp,
    z: &PrimalDualIterate,
    config: &SqpConfig,
    warm_start: Option<&[usize]>,
) -> Result<StepOutcome, SqpError> {
    let frozen = Frozen::prepare(nlp, config);
    let (z_next, qp_sol) = sqp_step_with_details(nlp, z, config, &frozen, warm_start)?;
    Ok(StepOutcome { z_next, active_set: qp_sol.active_set })
}

fn sqp_step_with_details(
    nlp: &Nlp,
    z: &PrimalDualIterate,
    config: &SqpConfig,
    frozen: &Frozen,
    warm_start: Option<&[usize]>,
) -> Result<(PrimalDualIterate, QpSolution), SqpError> {
    let qp = linearize(nlp, z, config, frozen)?;
    let sol = solve_qp(&qp, warm_start, config.qp_tol)?;
    Ok((apply_qp_step(z, &sol), sol))
}

/// Gradient perturbation of the problem the iteration actually solves:
/// the vector `p` for which the fixed point `z★` is a KKT point of
/// `min f(v) + pᵀv` subject to the original constraints.
///
/// `p = (q★ − ∇f(v★)) + (G★ − ∇g(v★))ᵀλ★ + (H★ − ∇h(v★))ᵀµ★`, built from
/// the strategy's possibly inexact first-order quantities; it vanishes
/// when all first derivatives are exact.
pub fn perturbation_vector(nlp: &Nlp, z_star: &PrimalDualIterate, config: &SqpConfig) -> Vector {
    let frozen = Frozen::prepare(nlp, config);
    let grad_f = nlp.eval_grad_f(&z_star.v);
    let jac_g_exact = nlp.eval_jac_g(&z_star.v);

    // q★ as used by the QP
    let mut q_used = grad_f.clone();
    if config.adjoint_correction {
        if let Some(frozen_jac) = &frozen.jac_g {
            let diff = jac_g_exact.sub(frozen_jac);
            q_used.axpy(1.0, &diff.matvec_transpose(&z_star.lambda));
        }
    }
    let mut p = q_used.sub(&grad_f);
    if let Some(frozen_jac) = &frozen.jac_g {
        let diff = frozen_jac.sub(&jac_g_exact);
        p.axpy(1.0, &diff.matvec_transpose(&z_star.lambda));
    }
    // inequality Jacobians are always evaluated exactly here, so the
    // `H` contribution vanishes
    p
}

/// Stationarity residual of the perturbed problem `min f(v) + pᵀv` at
/// `z`: `∇f(v) + p + ∇g(v)ᵀλ + ∇h(v)ᵀµ` with exact derivatives.
pub fn perturbed_stationarity(nlp: &Nlp, z: &PrimalDualIterate, p: &Vector) -> Vector {
    nlp.grad_lagrangian(&z.v, &z.lambda, &z.mu).add(p)
}

/// Outcome of [`solve`].
pub struct SolveResult {
    pub z: PrimalDualIterate,
    pub report: ConvergenceReport,
    /// QP active set at the final iterate.
    pub final_active_set: Vec<usize>,
}

/// Driver loop: iterate `z_{k+1} = π(z_k)`, optionally Anderson
/// accelerated, until the termination measure drops below `kkt_tol` or
/// `max_iter` is reached (which returns [`SqpError::MaxIterReached`]
/// carrying the report).
pub fn solve(
    nlp: &Nlp,
    z0: &PrimalDualIterate,
    config: &SqpConfig,
) -> Result<SolveResult, SqpError> {
    solve_labeled(nlp, z0, config, "solve")
}

/// [`solve`] with a label recorded in the report (used for experiment CSVs).
pub fn solve_labeled(
    nlp: &Nlp,
    z0: &PrimalDualIterate,
    config: &SqpConfig,
    label: &str,
) -> Result<SolveResult, SqpError> {
    config.validate()?;
    let frozen = Frozen::prepare(nlp, config);
    let mode = config.mode();
    let mut report = ConvergenceReport::new(label, mode);
    let mut state = AndersonState::new(config.anderson.depth);
    let mut z = z0.clone();
    let mut warm: Option<Vec<usize>> = None;
    let mut prev_active_set: Option<Vec<usize>> = None;
    let mut aa_was_active = false;

    let (n_v, n_g, n_h) = (nlp.n_v(), nlp.n_g(), nlp.n_h());

    for k in 0..config.max_iter {
        let kkt = kkt_residual(nlp, &z);
        let obj = nlp.eval_f(&z.v);
        if mode == SolveMode::Exact && kkt.norm_inf <= config.kkt_tol {
            report.push(IterationRecord {
                iter: k,
                kkt_inf: kkt.norm_inf,
                step_inf: 0.0,
                theta: None,
                aa_active: false,
                obj,
            });
            report.converged = true;
            return Ok(SolveResult {
                z,
                report,
                final_active_set: prev_active_set.unwrap_or_default(),
            });
        }

        let (phi, qp_sol) =
            sqp_step_with_details(nlp, &z, config, &frozen, warm.as_deref())?;

        // stale secants across an active-set change are meaningless: the
        // map is smooth only on a fixed active set
        if let Some(prev) = &prev_active_set {
            if *prev != qp_sol.active_set {
                state.reset();
            }
        }

        let aa_on = config.anderson.enabled && should_activate(kkt.norm_inf, &config.anderson);
        let (z_next, theta) = if aa_on {
            if !aa_was_active && !config.anderson.seed_history_on_activation {
                state.reset();
            }
            let z_flat = z.to_flat();
            let phi_flat = phi.to_flat();
            let (next_flat, theta) = aa_step(&mut state, &z_flat, &phi_flat, &config.anderson);
            (PrimalDualIterate::from_flat(&next_flat, n_v, n_g, n_h), Some(theta))
        } else {
            let z_flat = z.to_flat();
            let r_flat = phi.to_flat().sub(&z_flat);
            state.record(&z_flat, &r_flat);
            (phi, None)
        };
        aa_was_active = aa_on;

        let step_inf = z_next.norm_inf_diff(&z);
        report.push(IterationRecord {
            iter: k,
            kkt_inf: kkt.norm_inf,
            step_inf,
            theta,
            aa_active: aa_on,
            obj,
        });

        warm = Some(qp_sol.active_set.clone());
        prev_active_set = Some(qp_sol.active_set);
        z = z_next;

        if mode == SolveMode::ZeroOrder && step_inf <= config.kkt_tol {
            let kkt_final = kkt_residual(nlp, &z);
            report.push(IterationRecord {
                iter: k + 1,
                kkt_inf: kkt_final.norm_inf,
                step_inf: 0.0,
                theta: None,
                aa_active: false,
                obj: nlp.eval_f(&z.v),
            });
            report.converged = true;
            return Ok(SolveResult { z, report, final_active_set: prev_active_set.unwrap_or_default() });
        }
    }
    Err(SqpError::MaxIterReached(Box::new((z, report))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hessian::HessianStrategy;
    use crate::nlp::{reformulate_l1_penalty, ConvexComposite, L1Term};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn project_cfg() -> SqpConfig {
        SqpConfig {
            hessian: HessianStrategy::ExactProject { epsilon: 1e-6 },
            ..SqpConfig::default()
        }
    }

    /// min ½(v₁² + 2v₂²)  s.t.  v₁ + v₂ = 1; solution v = (2/3, 1/3),
    /// λ = −2/3.
    fn eq_quadratic() -> Nlp {
        Nlp::builder(2, 1, 0)
            .objective(
                |v| 0.5 * (v[0] * v[0] + 2.0 * v[1] * v[1]),
                |v| Vector::from_slice(&[v[0], 2.0 * v[1]]),
            )
            .equalities(
                |v| Vector::from_slice(&[v[0] + v[1] - 1.0]),
                |_| Matrix::from_rows(&[&[1.0, 1.0]]),
            )
            .hess_lagrangian(|_, _, _| Matrix::diag(&[1.0, 2.0]))
            .build()
    }

    #[test]
    fn fixed_point_property_at_kkt_point() {
        let nlp = eq_quadratic();
        let z_star = PrimalDualIterate::new(
            Vector::from_slice(&[2.0 / 3.0, 1.0 / 3.0]),
            Vector::from_slice(&[-2.0 / 3.0]),
            Vector::zeros(0),
        );
        assert!(kkt_residual(&nlp, &z_star).norm_inf < 1e-15);
        let z_next = sqp_step(&nlp, &z_star, &project_cfg()).unwrap();
        assert!(z_next.norm_inf_diff(&z_star) <= 1e-9);
    }

    #[test]
    fn newton_converges_in_one_step_on_quadratic() {
        let nlp = eq_quadratic();
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for _ in 0..10 {
            let z0 = PrimalDualIterate::new(
                Vector::from_fn(2, |_| rng.gen_range(-5.0..5.0)),
                Vector::from_fn(1, |_| rng.gen_range(-5.0..5.0)),
                Vector::zeros(0),
            );
            let z1 = sqp_step(&nlp, &z0, &project_cfg()).unwrap();
            assert!(kkt_residual(&nlp, &z1).norm_inf < 1e-12);
        }
    }

    #[test]
    fn kkt_blocks_match_recomputation() {
        let nlp = Nlp::builder(2, 1, 2)
            .objective(
                |v| (v[0] - 1.0).powi(2) + v[1].powi(2),
                |v| Vector::from_slice(&[2.0 * (v[0] - 1.0), 2.0 * v[1]]),
            )
            .equalities(
                |v| Vector::from_slice(&[v[0] * v[0] + v[1] - 2.0]),
                |v| Matrix::from_rows(&[&[2.0 * v[0], 1.0]]),
            )
            .inequalities(
                |v| Vector::from_slice(&[v[0] - 3.0, -v[1] - 4.0]),
                |_| Matrix::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]),
            )
            .build();
        let z = PrimalDualIterate::new(
            Vector::from_slice(&[0.5, -0.25]),
            Vector::from_slice(&[0.7]),
            Vector::from_slice(&[0.2, 0.3]),
        );
        let kkt = kkt_residual(&nlp, &z);
        // direct recomputation
        let stat = nlp.eval_grad_f(&z.v)
            .add(&nlp.eval_jac_g(&z.v).matvec_transpose(&z.lambda))
            .add(&nlp.eval_jac_h(&z.v).matvec_transpose(&z.mu));
        assert!(kkt.stationarity.sub(&stat).norm_inf() < 1e-15);
        let g = nlp.eval_g(&z.v);
        assert!(kkt.eq_feas.sub(&g).norm_inf() < 1e-15);
        let h = nlp.eval_h(&z.v);
        for i in 0..2 {
            assert_eq!(kkt.ineq_feas[i], h[i].max(0.0));
            assert_eq!(kkt.comp[i], z.mu[i] * h[i]);
        }
        let expected = stat
            .norm_inf()
            .max(g.norm_inf())
            .max(kkt.ineq_feas.norm_inf())
            .max(kkt.comp.norm_inf());
        assert_eq!(kkt.norm_inf, expected);
    }

    fn ggn_structure_for_sine() -> ConvexComposite {
        ConvexComposite {
            dim_out: 2,
            inner: Arc::new(|v: &Vector| v.clone()),
            inner_jac: Arc::new(|_| Matrix::identity(2)),
            outer_hessian: Arc::new(|_| Matrix::identity(2)),
        }
    }

    #[test]
    fn zero_order_uses_frozen_jacobian_bitwise() {
        let nlp = sine_with_structure();
        let v_bar = Vector::from_slice(&[0.5, 0.0]);
        let config = SqpConfig {
            hessian: HessianStrategy::Ggn,
            zero_order: Some(v_bar.clone()),
            ..SqpConfig::default()
        };
        let frozen = Frozen::prepare(&nlp, &config);
        let z_a = PrimalDualIterate::new(
            Vector::from_slice(&[1.0, -1.0]),
            Vector::zeros(1),
            Vector::zeros(0),
        );
        let z_b = PrimalDualIterate::new(
            Vector::from_slice(&[-2.0, 0.7]),
            Vector::zeros(1),
            Vector::zeros(0),
        );
        let qp_a = linearize(&nlp, &z_a, &config, &frozen).unwrap();
        let qp_b = linearize(&nlp, &z_b, &config, &frozen).unwrap();
        let expected = nlp.eval_jac_g(&v_bar).transpose();
        assert_eq!(qp_a.g, expected);
        assert_eq!(qp_b.g, expected);
    }

    fn sine_with_structure() -> Nlp {
        Nlp::builder(2, 1, 0)
            .objective(
                |v| 0.5 * (v[0] * v[0] + v[1] * v[1]),
                |v| Vector::from_slice(&[v[0], v[1]]),
            )
            .equalities(
                |v| Vector::from_slice(&[v[0].sin() + v[1] - 0.3]),
                |v| Matrix::from_rows(&[&[v[0].cos(), 1.0]]),
            )
            .objective_structure(ggn_structure_for_sine())
            .build()
    }

    #[test]
    fn zero_order_converges_to_perturbed_point() {
        let nlp = sine_with_structure();
        let v_bar = Vector::from_slice(&[0.5, 0.0]);
        let config = SqpConfig {
            hessian: HessianStrategy::Ggn,
            zero_order: Some(v_bar),
            kkt_tol: 1e-12,
            ..SqpConfig::default()
        };
        let z0 = PrimalDualIterate::zeros(&nlp);
        let result = solve(&nlp, &z0, &config).unwrap();
        assert!(result.report.converged);
        let z_star = &result.z;

        // the true KKT residual stalls away from zero
        let true_kkt = kkt_residual(&nlp, z_star).norm_inf;
        assert!(true_kkt > 1e-6, "true KKT unexpectedly small: {true_kkt}");

        // but the perturbed problem's KKT conditions hold
        let p = perturbation_vector(&nlp, z_star, &config);
        assert!(p.norm_inf() > 1e-8);
        let stat = perturbed_stationarity(&nlp, z_star, &p);
        assert!(stat.norm_inf() < 1e-6, "perturbed stationarity {}", stat.norm_inf());
        assert!(nlp.eval_g(&z_star.v).norm_inf() < 1e-9);
    }

    #[test]
    fn perturbation_vanishes_with_exact_derivatives() {
        let nlp = sine_with_structure();
        let config = SqpConfig { hessian: HessianStrategy::Ggn, ..SqpConfig::default() };
        let z0 = PrimalDualIterate::zeros(&nlp);
        let result = solve(&nlp, &z0, &config).unwrap();
        let p = perturbation_vector(&nlp, &result.z, &config);
        assert!(p.norm_inf() <= 1e-10);
    }

    #[test]
    fn perturbation_vanishes_when_frozen_at_solution() {
        let nlp = sine_with_structure();
        let exact_cfg = SqpConfig { hessian: HessianStrategy::Ggn, ..SqpConfig::default() };
        let z0 = PrimalDualIterate::zeros(&nlp);
        let exact = solve(&nlp, &z0, &exact_cfg).unwrap();
        // freeze exactly at the exact solution: no perturbation remains
        let config = SqpConfig {
            hessian: HessianStrategy::Ggn,
            zero_order: Some(exact.z.v.clone()),
            kkt_tol: 1e-12,
            ..SqpConfig::default()
        };
        let result = solve(&nlp, &z0, &config).unwrap();
        let p = perturbation_vector(&nlp, &result.z, &config);
        assert!(p.norm_inf() < 1e-9, "p = {:?}", p);
    }

    #[test]
    fn adjoint_correction_restores_original_stationarity() {
        let nlp = sine_with_structure();
        let v_bar = Vector::from_slice(&[0.5, 0.0]);
        let config = SqpConfig {
            hessian: HessianStrategy::Ggn,
            zero_order: Some(v_bar),
            adjoint_correction: true,
            kkt_tol: 1e-12,
            ..SqpConfig::default()
        };
        let z0 = PrimalDualIterate::zeros(&nlp);
        let result = solve(&nlp, &z0, &config).unwrap();
        let kkt = kkt_residual(&nlp, &result.z);
        // stationarity and feasibility of the ORIGINAL problem hold
        assert!(kkt.stationarity.norm_inf() < 1e-6, "stationarity {}", kkt.stationarity.norm_inf());
        assert!(kkt.eq_feas.norm_inf() < 1e-9);
    }

    #[test]
    fn max_iter_carries_report() {
        // GGN on a problem whose Gauss-Newton map oscillates: tiny budget
        let nlp = sine_with_structure();
        let config = SqpConfig {
            hessian: HessianStrategy::Ggn,
            max_iter: 1,
            kkt_tol: 1e-14,
            ..SqpConfig::default()
        };
        let z0 = PrimalDualIterate::new(
            Vector::from_slice(&[2.0, 2.0]),
            Vector::zeros(1),
            Vector::zeros(0),
        );
        match solve(&nlp, &z0, &config) {
            Err(SqpError::MaxIterReached(boxed)) => {
                let (_, report) = *boxed;
                assert_eq!(report.records.len(), 1);
                assert!(!report.converged);
            }
            other => panic!("expected MaxIterReached, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn raw_exact_hessian_rejected_by_config() {
        let config = SqpConfig { hessian: HessianStrategy::Exact, ..SqpConfig::default() };
        assert!(matches!(config.validate(), Err(SqpError::InvalidConfig(_))));
    }

    #[test]
    fn anderson_disabled_reproduces_plain_iteration_bitwise() {
        let nlp = sine_with_structure();
        let z0 = PrimalDualIterate::new(
            Vector::from_slice(&[1.5, -0.5]),
            Vector::zeros(1),
            Vector::zeros(0),
        );
        let config = SqpConfig {
            hessian: HessianStrategy::Ggn,
            max_iter: 50,
            kkt_tol: 1e-11,
            ..SqpConfig::default()
        };
        assert!(!config.anderson.enabled);
        let result = solve(&nlp, &z0, &config).unwrap();
        // replay plain iterations by hand: both paths must agree bit for bit
        let frozen = Frozen::prepare(&nlp, &config);
        let mut z = z0.clone();
        let mut warm: Option<Vec<usize>> = None;
        for _ in 0..result.report.iterations() {
            let (next, qp_sol) =
                sqp_step_with_details(&nlp, &z, &config, &frozen, warm.as_deref()).unwrap();
            warm = Some(qp_sol.active_set);
            z = next;
        }
        assert_eq!(z.to_flat().as_slice(), result.z.to_flat().as_slice());
    }

    #[test]
    fn l1_penalty_solution_matches_grid_search() {
        // min v² + 2|v − 1|
        let base = Nlp::builder(1, 0, 0)
            .objective(|v| v[0] * v[0], |v| Vector::from_slice(&[2.0 * v[0]]))
            .hess_lagrangian(|_, _, _| Matrix::diag(&[2.0]))
            .build();
        let terms = [L1Term { weight: 2.0, coeffs: Vector::from_slice(&[1.0]), offset: -1.0 }];
        let nlp = reformulate_l1_penalty(base, &terms);

        // dense grid-search oracle on [−3, 3], step 1e-4
        let mut best_v = f64::NAN;
        let mut best = f64::INFINITY;
        let mut x: f64 = -3.0;
        while x <= 3.0 {
            let val = x * x + 2.0 * (x - 1.0).abs();
            if val < best {
                best = val;
                best_v = x;
            }
            x += 1e-4;
        }

        let config = SqpConfig {
            hessian: HessianStrategy::ExactLm { gamma: 1e-4 },
            max_iter: 300,
            kkt_tol: 1e-9,
            ..SqpConfig::default()
        };
        let z0 = PrimalDualIterate::zeros(&nlp);
        let result = solve(&nlp, &z0, &config).unwrap();
        assert!(
            (result.z.v[0] - best_v).abs() <= 2e-4,
            "solver {} vs grid {}",
            result.z.v[0],
            best_v
        );
    }
}
