//! Empirical verification of the local convergence theory
//!
//! The SQP-type iteration contracts locally at the rate given by the
//! spectral radius of the iteration matrix, the Jacobian of the map `π`
//! at its fixed point. This module estimates that Jacobian by central
//! differences of `π` restricted to the coordinates `(v, λ, µ_active)` of
//! the stable active set, computes the symmetric-case contraction bound
//! from reduced Hessian matrices, and extracts observed asymptotic rates
//! from iteration logs for comparison.

use crate::hessian::HessianError;
use crate::linalg::{sym_eig, Matrix, Qr, Vector};
use crate::nlp::{Nlp, PrimalDualIterate};
use crate::report::ConvergenceReport;
use crate::sqp::{evaluate_map, SqpConfig, SqpError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    /// A finite-difference perturbation changed the QP active set.
    #[error("perturbation changed the QP active set")]
    ActiveSetUnstable,
    /// Too few clean tail iterations for a rate estimate.
    #[error("not enough non-accelerated tail iterations above the noise floor")]
    InsufficientTail,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("active constraint Jacobian is rank deficient")]
    RankDeficientConstraints,
    #[error("hessian strategy failed: {0}")]
    Hessian(#[from] HessianError),
    #[error("map evaluation failed: {0}")]
    Solver(#[from] SqpError),
}

/// Default finite-difference step scale for [`estimate_iteration_matrix`].
pub fn default_fd_step(z_star: &PrimalDualIterate) -> f64 {
    1e-5 * (1.0 + z_star.to_flat().norm_inf())
}

/// Multiplier threshold above which an inequality counts as strictly
/// active when identifying the stable active set.
const ACTIVE_MU_TOL: f64 = 1e-6;

fn strictly_active_set(z_star: &PrimalDualIterate) -> Vec<usize> {
    let scale = 1.0 + z_star.mu.norm_inf();
    (0..z_star.mu.len()).filter(|&i| z_star.mu[i] > ACTIVE_MU_TOL * scale).collect()
}

/// Estimate the iteration matrix `A★ = ∂π/∂z(z★)` by central differences,
/// restricted to the coordinates `(v, λ, µ_active)` of the fixed active
/// set. Errors with [`AnalysisError::ActiveSetUnstable`] if any
/// perturbation flips the QP active set.
pub fn estimate_iteration_matrix(
    nlp: &Nlp,
    z_star: &PrimalDualIterate,
    config: &SqpConfig,
    h_fd: f64,
) -> Result<Matrix, AnalysisError> {
    assert!(h_fd > 0.0, "estimate_iteration_matrix: h_fd must be positive");
    let base = evaluate_map(nlp, z_star, config, None)?;
    let active = base.active_set.clone();

    let n_v = nlp.n_v();
    let n_g = nlp.n_g();
    // flat indices of the restricted coordinates
    let mut coords: Vec<usize> = (0..n_v + n_g).collect();
    coords.extend(active.iter().map(|&i| n_v + n_g + i));
    let dim = coords.len();

    let z_flat = z_star.to_flat();
    let mut a = Matrix::zeros(dim, dim);
    for (col, &cj) in coords.iter().enumerate() {
        let mut plus = z_flat.clone();
        let mut minus = z_flat.clone();
        plus[cj] += h_fd;
        minus[cj] -= h_fd;
        let zp = PrimalDualIterate::from_flat(&plus, n_v, n_g, nlp.n_h());
        let zm = PrimalDualIterate::from_flat(&minus, n_v, n_g, nlp.n_h());
        let out_p = evaluate_map(nlp, &zp, config, Some(&active))?;
        let out_m = evaluate_map(nlp, &zm, config, Some(&active))?;
        if out_p.active_set != active || out_m.active_set != active {
            return Err(AnalysisError::ActiveSetUnstable);
        }
        let fp = out_p.z_next.to_flat();
        let fm = out_m.z_next.to_flat();
        for (row, &ci) in coords.iter().enumerate() {
            a[(row, col)] = (fp[ci] - fm[ci]) / (2.0 * h_fd);
        }
    }
    Ok(a)
}

/// Smallest `κ` with `−κ·Ŵ ⪯ Ê ⪯ κ·Ŵ` for `Ê = Λ̂ − Ŵ`, computed as the
/// largest eigenvalue modulus of `Ŵ^{-1/2}·Ê·Ŵ^{-1/2}`.
pub fn kappa_bound_symmetric(w_hat: &Matrix, lambda_hat: &Matrix) -> Result<f64, AnalysisError> {
    assert_eq!(w_hat.rows(), lambda_hat.rows(), "kappa_bound: shape mismatch");
    assert_eq!(w_hat.cols(), lambda_hat.cols(), "kappa_bound: shape mismatch");
    let (vals, vecs) = sym_eig(w_hat).map_err(|_| AnalysisError::NotPositiveDefinite)?;
    if (0..vals.len()).any(|i| vals[i] <= 0.0) {
        return Err(AnalysisError::NotPositiveDefinite);
    }
    let inv_sqrt = Vector::from_fn(vals.len(), |i| 1.0 / vals[i].sqrt());
    let s = vecs.matmul(&Matrix::diag(inv_sqrt.as_slice())).matmul(&vecs.transpose());
    let e_hat = lambda_hat.sub(w_hat);
    let t = s.matmul(&e_hat).matmul(&s).symmetrize();
    let (tvals, _) = sym_eig(&t).map_err(|_| AnalysisError::NotPositiveDefinite)?;
    Ok((0..tvals.len()).map(|i| tvals[i].abs()).fold(0.0, f64::max))
}

/// Reduced matrices of the symmetric-case rate bound: an orthonormal
/// nullspace basis `Z` of the stacked active-constraint Jacobian gives
/// `Ŵ = ZᵀW★Z` (strategy Hessian) and `Λ̂ = Zᵀ∇²L★Z` (exact Lagrangian
/// Hessian).
pub fn reduced_matrices(
    nlp: &Nlp,
    z_star: &PrimalDualIterate,
    config: &SqpConfig,
) -> Result<(Matrix, Matrix), AnalysisError> {
    let active = strictly_active_set(z_star);
    let jac_g = nlp.eval_jac_g(&z_star.v);
    let jac_h = nlp.eval_jac_h(&z_star.v);
    let rows = nlp.n_g() + active.len();
    let n_v = nlp.n_v();

    let z = if rows == 0 {
        Matrix::identity(n_v)
    } else {
        let mut stacked = Matrix::zeros(rows, n_v);
        if nlp.n_g() > 0 {
            stacked.set_block(0, 0, &jac_g);
        }
        for (r, &i) in active.iter().enumerate() {
            for j in 0..n_v {
                stacked[(nlp.n_g() + r, j)] = jac_h[(i, j)];
            }
        }
        let qr = Qr::new(&stacked.transpose());
        if qr.rank() < rows {
            return Err(AnalysisError::RankDeficientConstraints);
        }
        qr.nullspace_of_transpose()
    };

    let w_star = config.hessian.evaluate(nlp, z_star)?;
    let hess_exact = nlp
        .eval_hess_lagrangian(&z_star.v, &z_star.lambda, &z_star.mu)
        .ok_or(HessianError::MissingHessian)?;
    let w_hat = z.transpose().matmul(&w_star).matmul(&z).symmetrize();
    let lambda_hat = z.transpose().matmul(&hess_exact).matmul(&z).symmetrize();
    Ok((w_hat, lambda_hat))
}

/// Observed asymptotic rate extracted from a convergence log.
#[derive(Debug, Clone, Copy)]
pub struct RateEstimate {
    /// Geometric mean of successive residual ratios over the tail.
    pub observed_rate: f64,
    /// Spectral radius prediction, when one was attached.
    pub predicted_kappa: Option<f64>,
    /// Iteration index where the tail starts.
    pub tail_start: usize,
    /// `|observed − predicted|`, when a prediction was attached.
    pub agreement: Option<f64>,
}

impl RateEstimate {
    pub fn with_prediction(mut self, kappa: f64) -> Self {
        self.predicted_kappa = Some(kappa);
        self.agreement = Some((self.observed_rate - kappa).abs());
        self
    }
}

/// Relative noise floor below which residuals count as converged noise.
const RATE_NOISE_FLOOR: f64 = 1e-12;
/// Minimum number of clean tail iterations required.
const RATE_MIN_TAIL: usize = 6;

/// Estimate the observed linear rate from the report's residual series
/// (KKT norms for exact solves, step norms for zero-order ones) as the
/// geometric mean of successive ratios over the last `tail_fraction` of
/// the longest non-accelerated suffix above the noise floor.
pub fn observed_rate(
    report: &ConvergenceReport,
    tail_fraction: f64,
) -> Result<RateEstimate, AnalysisError> {
    assert!(tail_fraction > 0.0 && tail_fraction <= 1.0, "tail_fraction in (0, 1]");
    let series = report.residual_series();
    let aa = report.aa_flags();
    observed_rate_of_series(&series, &aa, tail_fraction)
}

/// Rate estimation on a raw residual series with acceleration flags.
pub fn observed_rate_of_series(
    series: &[f64],
    aa_flags: &[bool],
    tail_fraction: f64,
) -> Result<RateEstimate, AnalysisError> {
    assert_eq!(series.len(), aa_flags.len(), "series/flags length mismatch");
    let r0 = series.first().copied().unwrap_or(0.0);
    let floor = RATE_NOISE_FLOOR * r0.max(f64::MIN_POSITIVE);
    // longest suffix of clean entries: non-accelerated, above the floor
    let mut start = series.len();
    while start > 0 {
        let i = start - 1;
        if !aa_flags[i] && series[i] > floor {
            start -= 1;
        } else {
            break;
        }
    }
    let clean = &series[start..];
    if clean.len() < RATE_MIN_TAIL {
        return Err(AnalysisError::InsufficientTail);
    }
    let tail_len = ((clean.len() as f64 * tail_fraction).ceil() as usize).max(2);
    let tail = &clean[clean.len() - tail_len..];
    let rate = (tail[tail_len - 1] / tail[0]).powf(1.0 / (tail_len as f64 - 1.0));
    Ok(RateEstimate {
        observed_rate: rate,
        predicted_kappa: None,
        tail_start: start + clean.len() - tail_len,
        agreement: None,
    })
}

/// Spectral radius of an estimated iteration matrix.
pub fn spectral_radius_of(a: &Matrix) -> Result<f64, AnalysisError> {
    crate::linalg::spectral_radius(a).map_err(|_| AnalysisError::InsufficientTail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hessian::HessianStrategy;
    use crate::linalg::spectral_radius;
    use crate::report::SolveMode;
    use crate::sqp::{kkt_residual, solve};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn observed_rate_geometric_series() {
        let series: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let flags = vec![false; 20];
        let est = observed_rate_of_series(&series, &flags, 0.4).unwrap();
        assert!((est.observed_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn observed_rate_flags_superlinear() {
        // superlinear convergence (ratios shrink geometrically): the tail
        // estimate keeps decreasing as the tail moves out
        let mut series = vec![1.0f64];
        for k in 0..11 {
            let ratio = 0.5 * 0.8f64.powi(k);
            series.push(series.last().unwrap() * ratio);
        }
        let flags = vec![false; series.len()];
        let early = observed_rate_of_series(&series[..8], &flags[..8], 0.9).unwrap();
        let late = observed_rate_of_series(&series, &flags, 0.9).unwrap();
        assert!(late.observed_rate < early.observed_rate);
    }

    #[test]
    fn observed_rate_requires_enough_tail() {
        let series = vec![1.0, 0.5, 0.25];
        let flags = vec![false; 3];
        assert!(matches!(
            observed_rate_of_series(&series, &flags, 0.4),
            Err(AnalysisError::InsufficientTail)
        ));
    }

    #[test]
    fn observed_rate_excludes_accelerated_prefix() {
        let mut series: Vec<f64> = (0..6).map(|k| 0.9f64.powi(k)).collect();
        let tail: Vec<f64> = (0..10).map(|k| series[5] * 0.5f64.powi(k + 1)).collect();
        series.extend(tail);
        let mut flags = vec![true; 6];
        flags.extend(vec![false; 10]);
        let est = observed_rate_of_series(&series, &flags, 1.0).unwrap();
        assert!((est.observed_rate - 0.5).abs() < 1e-9);
        assert_eq!(est.tail_start, 6);
    }

    #[test]
    fn kappa_scalar_cases() {
        let w = Matrix::diag(&[1.0]);
        assert!(kappa_bound_symmetric(&w, &w).unwrap() < 1e-14);
        let lam = Matrix::diag(&[1.5]);
        assert!((kappa_bound_symmetric(&w, &lam).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kappa_rejects_indefinite_w() {
        let w = Matrix::diag(&[1.0, -1.0]);
        assert!(matches!(
            kappa_bound_symmetric(&w, &Matrix::identity(2)),
            Err(AnalysisError::NotPositiveDefinite)
        ));
    }

    /// Bisection oracle: smallest κ with κŴ ± Ê ⪰ 0 via semidefinite
    /// checks on the eigenvalues.
    fn kappa_by_bisection(w: &Matrix, lam: &Matrix) -> f64 {
        let e = lam.sub(w);
        let feasible = |kappa: f64| -> bool {
            for sign in [-1.0, 1.0] {
                let m = w.scale(kappa).add_scaled(sign, &e).symmetrize();
                let (vals, _) = sym_eig(&m).unwrap();
                if vals[0] < -1e-12 * (1.0 + m.max_abs()) {
                    return false;
                }
            }
            true
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while !feasible(hi) {
            hi *= 2.0;
            assert!(hi < 1e6);
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn kappa_matches_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        for _ in 0..10 {
            let a = Matrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let w = a.matmul(&a.transpose()).add(&Matrix::identity(4).scale(0.5));
            let b = Matrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let lam = b.symmetrize().add(&w);
            let direct = kappa_bound_symmetric(&w, &lam).unwrap();
            let oracle = kappa_by_bisection(&w, &lam);
            assert!((direct - oracle).abs() < 1e-8, "direct {direct} vs oracle {oracle}");
        }
    }

    #[test]
    fn kappa_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let a = Matrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let w = a.matmul(&a.transpose()).add(&Matrix::identity(3).scale(0.4));
        let lam = w.add(&Matrix::diag(&[0.1, -0.2, 0.3]));
        let k1 = kappa_bound_symmetric(&w, &lam).unwrap();
        let c = 7.3;
        let k2 = kappa_bound_symmetric(&w.scale(c), &lam.scale(c)).unwrap();
        assert!((k1 - k2).abs() < 1e-10);
    }

    fn unconstrained_scaled_hessian_nlp(c: f64) -> Nlp {
        // true objective ½(v₁² + 2v₂²) + (1, −2)ᵀv; the Hessian callback
        // reports c times the true curvature, so the iteration contracts
        // at rate (c−1)/c
        Nlp::builder(2, 0, 0)
            .objective(
                |v| 0.5 * (v[0] * v[0] + 2.0 * v[1] * v[1]) + v[0] - 2.0 * v[1],
                |v| Vector::from_slice(&[v[0] + 1.0, 2.0 * v[1] - 2.0]),
            )
            .hess_lagrangian(move |_, _, _| Matrix::diag(&[c, 2.0 * c]))
            .build()
    }

    #[test]
    fn scaled_hessian_rate_is_analytic() {
        let c = 2.0;
        let nlp = unconstrained_scaled_hessian_nlp(c);
        let config = SqpConfig {
            hessian: HessianStrategy::ExactProject { epsilon: 1e-9 },
            kkt_tol: 1e-12,
            ..SqpConfig::default()
        };
        // fixed point: the true minimizer
        let z_star = PrimalDualIterate::new(
            Vector::from_slice(&[-1.0, 1.0]),
            Vector::zeros(0),
            Vector::zeros(0),
        );
        assert!(kkt_residual(&nlp, &z_star).norm_inf < 1e-14);
        let a = estimate_iteration_matrix(&nlp, &z_star, &config, 1e-5).unwrap();
        let rho = spectral_radius(&a).unwrap();
        assert!((rho - (c - 1.0) / c).abs() < 1e-4, "rho {rho}");
    }

    #[test]
    fn iteration_matrix_invariant_under_step_halving() {
        let nlp = unconstrained_scaled_hessian_nlp(2.0);
        let config = SqpConfig {
            hessian: HessianStrategy::ExactProject { epsilon: 1e-9 },
            ..SqpConfig::default()
        };
        let z_star = PrimalDualIterate::new(
            Vector::from_slice(&[-1.0, 1.0]),
            Vector::zeros(0),
            Vector::zeros(0),
        );
        let a1 = estimate_iteration_matrix(&nlp, &z_star, &config, 1e-5).unwrap();
        let a2 = estimate_iteration_matrix(&nlp, &z_star, &config, 5e-6).unwrap();
        let r1 = spectral_radius(&a1).unwrap();
        let r2 = spectral_radius(&a2).unwrap();
        assert!((r1 - r2).abs() <= 1e-6);
    }

    #[test]
    fn exact_newton_map_has_vanishing_spectral_radius() {
        // smooth equality-constrained NLP solved with the exact Hessian:
        // the map's Jacobian at the fixed point is numerically zero
        let nlp = Nlp::builder(2, 1, 0)
            .objective(
                |v| 0.5 * (v[0] * v[0] + v[1] * v[1]),
                |v| Vector::from_slice(&[v[0], v[1]]),
            )
            .equalities(
                |v| Vector::from_slice(&[v[0].sin() + v[1] - 0.3]),
                |v| Matrix::from_rows(&[&[v[0].cos(), 1.0]]),
            )
            .hess_lagrangian(|v, lambda, _| {
                let mut h = Matrix::identity(2);
                h[(0, 0)] += -v[0].sin() * lambda[0];
                h
            })
            .build();
        let config = SqpConfig {
            hessian: HessianStrategy::ExactProject { epsilon: 1e-9 },
            kkt_tol: 1e-12,
            ..SqpConfig::default()
        };
        let z0 = PrimalDualIterate::zeros(&nlp);
        let result = solve(&nlp, &z0, &config).unwrap();
        let a = estimate_iteration_matrix(&nlp, &result.z, &config, 1e-5).unwrap();
        let rho = spectral_radius(&a).unwrap();
        assert!(rho <= 1e-4, "rho {rho}");
    }

    #[test]
    fn reduced_matrices_identity_without_constraints() {
        let nlp = unconstrained_scaled_hessian_nlp(3.0);
        let config = SqpConfig {
            hessian: HessianStrategy::ExactProject { epsilon: 1e-9 },
            ..SqpConfig::default()
        };
        let z = PrimalDualIterate::new(
            Vector::from_slice(&[-1.0, 1.0]),
            Vector::zeros(0),
            Vector::zeros(0),
        );
        let (w_hat, lam_hat) = reduced_matrices(&nlp, &z, &config).unwrap();
        // Z = I: reduced equals full
        assert!(w_hat.sub(&Matrix::diag(&[3.0, 6.0])).max_abs() < 1e-12);
        assert!(lam_hat.sub(&Matrix::diag(&[3.0, 6.0])).max_abs() < 1e-12);
        // with the scaled-Hessian strategy, κ = |Λ̂ − Ŵ| relative: here
        // Λ̂ = Ŵ so the bound vanishes
        assert!(kappa_bound_symmetric(&w_hat, &lam_hat).unwrap() < 1e-12);
    }

    #[test]
    fn reduced_nullspace_annihilates_constraint_jacobian() {
        // one linear equality in 2D
        let nlp = Nlp::builder(2, 1, 0)
            .objective(
                |v| 0.5 * (v[0] * v[0] + v[1] * v[1]),
                |v| Vector::from_slice(&[v[0], v[1]]),
            )
            .equalities(
                |v| Vector::from_slice(&[2.0 * v[0] - v[1]]),
                |_| Matrix::from_rows(&[&[2.0, -1.0]]),
            )
            .hess_lagrangian(|_, _, _| Matrix::identity(2))
            .build();
        let config = SqpConfig {
            hessian: HessianStrategy::ExactProject { epsilon: 1e-9 },
            ..SqpConfig::default()
        };
        let z = PrimalDualIterate::new(Vector::zeros(2), Vector::zeros(1), Vector::zeros(0));
        let (w_hat, lam_hat) = reduced_matrices(&nlp, &z, &config).unwrap();
        assert_eq!(w_hat.rows(), 1);
        // reduced Hessians of the identity stay 1 on any orthonormal basis
        assert!((w_hat[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((lam_hat[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_estimate_prediction_bookkeeping() {
        let series: Vec<f64> = (0..12).map(|k| 0.7f64.powi(k)).collect();
        let flags = vec![false; 12];
        let est = observed_rate_of_series(&series, &flags, 0.4)
            .unwrap()
            .with_prediction(0.72);
        assert!((est.agreement.unwrap() - (est.observed_rate - 0.72).abs()).abs() < 1e-15);
    }

    #[test]
    fn observed_rate_from_report_uses_mode_series() {
        let mut rep = ConvergenceReport::new("r", SolveMode::ZeroOrder);
        for k in 0..10 {
            rep.push(crate::report::IterationRecord {
                iter: k,
                kkt_inf: 1.0, // stalls: must not be used in zero-order mode
                step_inf: 0.6f64.powi(k as i32),
                theta: None,
                aa_active: false,
                obj: 0.0,
            });
        }
        let est = observed_rate(&rep, 0.5).unwrap();
        assert!((est.observed_rate - 0.6).abs() < 1e-12);
    }
}
