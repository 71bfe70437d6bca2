//! Anderson acceleration for fixed-point iterations
//!
//! Wraps any map `z ↦ φ(z)`. At iteration `k` the residual is
//! `r_k = φ(z_k) − z_k`; with depth `m` and damping `β` the next iterate
//! is the damped affine combination
//!
//! ```text
//!     z_{k+1} = z_k − E_k γ + β (r_k − F_k γ),
//! ```
//!
//! where the columns of `E_k` and `F_k` hold the most recent iterate and
//! residual differences (newest first) and `γ` minimizes `‖r_k − F_k γ‖₂`.
//! The gain `θ_k = ‖r_k − F_k γ‖ / ‖r_k‖ ≤ 1` measures the per-step
//! success of the acceleration.
//!
//! For depth 1 without damping the update has a closed form and coincides
//! with Broyden's rank-one inverse update started from `B = −I`;
//! [`broyden_reference_step`] implements that route literally and exists
//! as a cross-checking reference.

use crate::linalg::{Matrix, Qr, Vector};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AndersonError {
    /// Consecutive residuals too close to collinear for a secant update.
    #[error("degenerate secant: consecutive residuals nearly collinear")]
    DegenerateSecant,
}

/// Anderson acceleration options.
///
/// Config-file keys mirror these fields: `with_anderson_acceleration`,
/// `anderson_depth`, `anderson_damping`, `anderson_activation_threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndersonConfig {
    pub enabled: bool,
    /// History depth `m ≥ 1`.
    pub depth: usize,
    /// Damping `β ∈ (0, 1]`; `1` means undamped.
    pub damping: f64,
    /// KKT-residual threshold `δ_AA` below which accelerated steps are
    /// taken; `f64::INFINITY` keeps acceleration always on.
    pub activation_threshold: f64,
    /// Relative tolerance under which a secant update is skipped.
    pub collinearity_tol: f64,
    /// Keep history recorded while inactive when acceleration switches
    /// on (default clears it).
    pub seed_history_on_activation: bool,
}

impl Default for AndersonConfig {
    fn default() -> Self {
        AndersonConfig {
            enabled: false,
            depth: 1,
            damping: 1.0,
            activation_threshold: f64::INFINITY,
            collinearity_tol: 1e-14,
            seed_history_on_activation: false,
        }
    }
}

impl AndersonConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.depth < 1 {
            return Err("anderson depth must be at least 1".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err("anderson damping must lie in (0, 1]".into());
        }
        if !(self.activation_threshold > 0.0) {
            return Err("anderson activation threshold must be positive (or infinite)".into());
        }
        Ok(())
    }
}

/// Activation heuristic: accelerate only when the current KKT residual
/// norm is already below `δ_AA`. History is still recorded while
/// inactive; only the accelerated step is suppressed.
pub fn should_activate(kkt_norm_inf: f64, config: &AndersonConfig) -> bool {
    debug_assert!(kkt_norm_inf >= 0.0);
    kkt_norm_inf < config.activation_threshold
}

/// Bounded history of `(z_j, r_j)` pairs with the derived difference
/// matrices, plus the last computed gain.
#[derive(Debug, Clone)]
pub struct AndersonState {
    history: VecDeque<(Vector, Vector)>,
    depth: usize,
    last_theta: Option<f64>,
}

impl AndersonState {
    pub fn new(depth: usize) -> Self {
        assert!(depth >= 1, "AndersonState: depth must be at least 1");
        AndersonState { history: VecDeque::with_capacity(depth + 2), depth, last_theta: None }
    }

    /// Number of stored pairs.
    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn last_theta(&self) -> Option<f64> {
        self.last_theta
    }

    /// Drop all history (used on activation toggles and active-set changes).
    pub fn reset(&mut self) {
        self.history.clear();
        self.last_theta = None;
    }

    /// Record a pair without taking an accelerated step.
    pub fn record(&mut self, z: &Vector, r: &Vector) {
        self.history.push_back((z.clone(), r.clone()));
        while self.history.len() > self.depth + 1 {
            self.history.pop_front();
        }
    }

    /// Keep only the newest pair; used after a degenerate secant.
    pub fn keep_newest_only(&mut self) {
        while self.history.len() > 1 {
            self.history.pop_front();
        }
    }

    /// Difference matrices `(E_k, F_k)`, columns newest first. Empty when
    /// fewer than two pairs are stored.
    pub fn difference_matrices(&self) -> (Matrix, Matrix) {
        let n = self.history.back().map_or(0, |(z, _)| z.len());
        let m_k = self.history.len().saturating_sub(1).min(self.depth);
        let mut e = Matrix::zeros(n, m_k);
        let mut f = Matrix::zeros(n, m_k);
        let newest = self.history.len() - 1;
        for j in 0..m_k {
            let (z_new, r_new) = &self.history[newest - j];
            let (z_old, r_old) = &self.history[newest - j - 1];
            e.set_col(j, &z_new.sub(z_old));
            f.set_col(j, &r_new.sub(r_old));
        }
        (e, f)
    }
}

/// One Anderson step: given `φ(z_k)`, push the pair into the history and
/// return `(z_{k+1}, θ_k)`.
///
/// With an empty history this is the plain damped step `z_k + β r_k`. At
/// a fixed point (`‖r_k‖ = 0`) the gain is defined as 1 and the iterate
/// is returned unchanged.
pub fn aa_step(
    state: &mut AndersonState,
    z_k: &Vector,
    phi_zk: &Vector,
    config: &AndersonConfig,
) -> (Vector, f64) {
    assert_eq!(z_k.len(), phi_zk.len(), "aa_step: dimension mismatch");
    let beta = config.damping;
    let r_k = phi_zk.sub(z_k);
    state.record(z_k, &r_k);

    let r_norm = r_k.norm2();
    if r_norm == 0.0 {
        state.last_theta = Some(1.0);
        return (z_k.clone(), 1.0);
    }
    let (e, f) = state.difference_matrices();
    if f.cols() == 0 {
        state.last_theta = Some(1.0);
        return (z_k.add_scaled(beta, &r_k), 1.0);
    }
    // guard against a vanishing newest secant column; the pivoted least
    // squares drops collinear columns on its own
    let newest_secant = f.col_vector(0).norm2();
    if newest_secant <= config.collinearity_tol * (2.0 * r_norm + newest_secant) {
        state.keep_newest_only();
        state.last_theta = Some(1.0);
        return (z_k.add_scaled(beta, &r_k), 1.0);
    }

    // pivoted QR handles rank deficiency and histories deeper than the
    // problem dimension by dropping redundant secant columns
    let gamma = Qr::new(&f).solve_least_squares(&r_k);
    let r_avg = r_k.sub(&f.matvec(&gamma));
    let theta = r_avg.norm2() / r_norm;
    let z_next = z_k.sub(&e.matvec(&gamma)).add_scaled(beta, &r_avg);
    state.last_theta = Some(theta);
    (z_next, theta)
}

/// Closed-form AA(1) without damping:
/// `γ = r_kᵀ(r_k − r_{k−1}) / ‖r_k − r_{k−1}‖²`,
/// `z_{k+1} = (1 − γ)·φ(z_k) + γ·φ(z_{k−1})`.
pub fn aa1_closed_form(
    z_k: &Vector,
    z_km1: &Vector,
    r_k: &Vector,
    r_km1: &Vector,
    collinearity_tol: f64,
) -> Result<Vector, AndersonError> {
    let dr = r_k.sub(r_km1);
    let dr_norm = dr.norm2();
    if dr_norm <= collinearity_tol * (r_k.norm2() + r_km1.norm2()) {
        return Err(AndersonError::DegenerateSecant);
    }
    let gamma = r_k.dot(&dr) / (dr_norm * dr_norm);
    let phi_k = z_k.add(r_k);
    let phi_km1 = z_km1.add(r_km1);
    Ok(phi_k.scale(1.0 - gamma).add_scaled(gamma, &phi_km1))
}

/// Broyden's method with the rank-one inverse update started from
/// `B_{k−1} = −I`, applied literally through the updated matrix:
///
/// `B_k = B_{k−1} + (Δz − B_{k−1}Δr) Δrᵀ / (ΔrᵀΔr)`, `z_{k+1} = z_k − B_k r_k`.
///
/// Reference route for cross-checking [`aa1_closed_form`]; not used by the
/// solver itself.
pub fn broyden_reference_step(
    z_k: &Vector,
    z_km1: &Vector,
    r_k: &Vector,
    r_km1: &Vector,
    collinearity_tol: f64,
) -> Result<Vector, AndersonError> {
    let n = z_k.len();
    let dz = z_k.sub(z_km1);
    let dr = r_k.sub(r_km1);
    let dr_norm = dr.norm2();
    if dr_norm <= collinearity_tol * (r_k.norm2() + r_km1.norm2()) {
        return Err(AndersonError::DegenerateSecant);
    }
    let b_prev = Matrix::identity(n).scale(-1.0);
    // u = (Δz − B_{k−1} Δr) / (ΔrᵀΔr)
    let u = dz.sub(&b_prev.matvec(&dr)).scale(1.0 / (dr_norm * dr_norm));
    let mut b = b_prev;
    for j in 0..n {
        for i in 0..n {
            b[(i, j)] += u[i] * dr[j];
        }
    }
    Ok(z_k.sub(&b.matvec(r_k)))
}
