//! Direct multiple-shooting transcription of optimal control problems
//!
//! An [`OcpSpec`] describes a continuous-time OCP over a horizon `T` split
//! into `N` equidistant intervals. The transcription introduces the
//! decision vector
//!
//! ```text
//!     v = (x₀, u₀, x₁, u₁, …, u_{N−1}, x_N)
//! ```
//!
//! with equality constraints for the initial value and the shooting gaps
//! `x_{k+1} − Φ(x_k, u_k)`, where `Φ` integrates the dynamics with RK4 or
//! explicit Euler. Control bounds and the optional terminal tip-ball
//! constraint become general inequalities `h(v) ≤ 0`. Sensitivities are
//! propagated by the forward-mode chain rule through the integrator
//! stages; the dynamics curvature needed for the exact Lagrangian Hessian
//! is recovered by central finite differences of the integrator Jacobian
//! contracted with the shooting multipliers.

use crate::linalg::{Matrix, Vector};
use crate::nlp::{ConvexComposite, ModelError, Nlp, PrimalDualIterate};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

// ── Dynamics models ─────────────────────────────────────────────────

/// Continuous-time dynamics `ẋ = f(x, u)` with analytic Jacobians.
pub trait Dynamics: Send + Sync {
    fn nx(&self) -> usize;
    fn nu(&self) -> usize;
    fn eval(&self, x: &[f64], u: &[f64], xdot: &mut [f64]);
    /// `(∂ẋ/∂x, ∂ẋ/∂u)`.
    fn jacobians(&self, x: &[f64], u: &[f64]) -> (Matrix, Matrix);
}

/// Physical parameters of the pendulum-on-cart model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPendulumParams {
    /// Pendulum length [m].
    pub length: f64,
    /// Cart mass [kg].
    pub cart_mass: f64,
    /// Pole point mass [kg].
    pub pole_mass: f64,
    /// Gravitational acceleration [m/s²].
    pub gravity: f64,
}

impl Default for CartPendulumParams {
    fn default() -> Self {
        CartPendulumParams { length: 0.8, cart_mass: 1.0, pole_mass: 0.1, gravity: 9.81 }
    }
}

/// Frictionless pendulum on a cart.
///
/// State `x = (p, v, θ, ω)`: cart position and velocity, pole angle and
/// angular velocity; the control is the horizontal force `F` on the cart.
/// The angle is measured from the upright position so that the pole tip
/// sits at `c(x) = (p − l·sin θ, l·cos θ)`; `θ = π` is the downward
/// equilibrium, where the drift vanishes for `v = ω = F = 0`.
#[derive(Debug, Clone, Copy)]
pub struct CartPendulum {
    pub params: CartPendulumParams,
}

impl CartPendulum {
    pub fn new(params: CartPendulumParams) -> Self {
        CartPendulum { params }
    }

    /// Pole tip position `c(x) = (p − l·sin θ, l·cos θ)`.
    pub fn tip_position(&self, x: &[f64]) -> [f64; 2] {
        let l = self.params.length;
        [x[0] - l * x[2].sin(), l * x[2].cos()]
    }

    /// `2 × 4` Jacobian of the tip position with respect to the state.
    pub fn tip_jacobian(&self, x: &[f64]) -> Matrix {
        let l = self.params.length;
        Matrix::from_rows(&[
            &[1.0, 0.0, -l * x[2].cos(), 0.0],
            &[0.0, 0.0, -l * x[2].sin(), 0.0],
        ])
    }
}

impl Dynamics for CartPendulum {
    fn nx(&self) -> usize {
        4
    }

    fn nu(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], u: &[f64], xdot: &mut [f64]) {
        let CartPendulumParams { length: l, cart_mass: mc, pole_mass: mp, gravity: g } =
            self.params;
        let (s, c) = x[2].sin_cos();
        let omega = x[3];
        let force = u[0];
        let denom = mc + mp * s * s;
        xdot[0] = x[1];
        xdot[1] = (-mp * l * s * omega * omega + mp * g * c * s + force) / denom;
        xdot[2] = omega;
        xdot[3] = (-mp * l * c * s * omega * omega + force * c + (mc + mp) * g * s) / (l * denom);
    }

    fn jacobians(&self, x: &[f64], u: &[f64]) -> (Matrix, Matrix) {
        let CartPendulumParams { length: l, cart_mass: mc, pole_mass: mp, gravity: g } =
            self.params;
        let (s, c) = x[2].sin_cos();
        let omega = x[3];
        let force = u[0];
        let d = mc + mp * s * s;
        let d_theta = 2.0 * mp * s * c;

        let nv = -mp * l * s * omega * omega + mp * g * c * s + force;
        let nv_theta = -mp * l * c * omega * omega + mp * g * (c * c - s * s);
        let vdot_theta = (nv_theta * d - nv * d_theta) / (d * d);
        let vdot_omega = -2.0 * mp * l * s * omega / d;

        let nw = -mp * l * c * s * omega * omega + force * c + (mc + mp) * g * s;
        let nw_theta = -mp * l * (c * c - s * s) * omega * omega - force * s + (mc + mp) * g * c;
        let wdot_theta = (nw_theta * d - nw * d_theta) / (l * d * d);
        let wdot_omega = -2.0 * mp * c * s * omega / d;

        let a = Matrix::from_rows(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, vdot_theta, vdot_omega],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, wdot_theta, wdot_omega],
        ]);
        let b = Matrix::from_rows(&[&[0.0], &[1.0 / d], &[0.0], &[c / (l * d)]]);
        (a, b)
    }
}

/// Double integrator `ṗ = v`, `v̇ = u`: the `linear_test` built-in.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearTest;

impl Dynamics for LinearTest {
    fn nx(&self) -> usize {
        2
    }

    fn nu(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], u: &[f64], xdot: &mut [f64]) {
        xdot[0] = x[1];
        xdot[1] = u[0];
    }

    fn jacobians(&self, _x: &[f64], _u: &[f64]) -> (Matrix, Matrix) {
        (
            Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]),
            Matrix::from_rows(&[&[0.0], &[1.0]]),
        )
    }
}

// ── Integrators ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    Euler,
}

/// Integrate `ẋ = f(x, u)` over `dt` with `steps` equal sub-steps,
/// holding `u` constant.
pub fn integrate(dynamics: &dyn Dynamics, integrator: Integrator, dt: f64, steps: usize, x0: &[f64], u: &[f64]) -> Vector {
    let nx = dynamics.nx();
    let h = dt / steps as f64;
    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; nx];
    let mut k2 = vec![0.0; nx];
    let mut k3 = vec![0.0; nx];
    let mut k4 = vec![0.0; nx];
    let mut tmp = vec![0.0; nx];
    for _ in 0..steps {
        match integrator {
            Integrator::Euler => {
                dynamics.eval(&x, u, &mut k1);
                for i in 0..nx {
                    x[i] += h * k1[i];
                }
            }
            Integrator::Rk4 => {
                dynamics.eval(&x, u, &mut k1);
                for i in 0..nx {
                    tmp[i] = x[i] + 0.5 * h * k1[i];
                }
                dynamics.eval(&tmp, u, &mut k2);
                for i in 0..nx {
                    tmp[i] = x[i] + 0.5 * h * k2[i];
                }
                dynamics.eval(&tmp, u, &mut k3);
                for i in 0..nx {
                    tmp[i] = x[i] + h * k3[i];
                }
                dynamics.eval(&tmp, u, &mut k4);
                for i in 0..nx {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }
    Vector::from_vec(x)
}

/// Integrate and propagate the sensitivities `(∂x_end/∂x₀, ∂x_end/∂u)` by
/// the forward-mode chain rule through the integrator stages.
pub fn integrate_with_sensitivities(
    dynamics: &dyn Dynamics,
    integrator: Integrator,
    dt: f64,
    steps: usize,
    x0: &[f64],
    u: &[f64],
) -> (Vector, Matrix, Matrix) {
    let nx = dynamics.nx();
    let nu = dynamics.nu();
    let h = dt / steps as f64;
    let mut x = Vector::from_slice(x0);
    let mut sx = Matrix::identity(nx);
    let mut su = Matrix::zeros(nx, nu);
    let mut xdot = vec![0.0; nx];

    for _ in 0..steps {
        match integrator {
            Integrator::Euler => {
                dynamics.eval(x.as_slice(), u, &mut xdot);
                let (a, b) = dynamics.jacobians(x.as_slice(), u);
                let kx = a.matmul(&sx);
                let ku = a.matmul(&su).add(&b);
                for i in 0..nx {
                    x[i] += h * xdot[i];
                }
                sx = sx.add_scaled(h, &kx);
                su = su.add_scaled(h, &ku);
            }
            Integrator::Rk4 => {
                // stage 1
                dynamics.eval(x.as_slice(), u, &mut xdot);
                let k1 = Vector::from_slice(&xdot);
                let (a, b) = dynamics.jacobians(x.as_slice(), u);
                let k1x = a.matmul(&sx);
                let k1u = a.matmul(&su).add(&b);
                // stage 2
                let x2 = x.add_scaled(0.5 * h, &k1);
                let s2x = sx.add_scaled(0.5 * h, &k1x);
                let s2u = su.add_scaled(0.5 * h, &k1u);
                dynamics.eval(x2.as_slice(), u, &mut xdot);
                let k2 = Vector::from_slice(&xdot);
                let (a, b) = dynamics.jacobians(x2.as_slice(), u);
                let k2x = a.matmul(&s2x);
                let k2u = a.matmul(&s2u).add(&b);
                // stage 3
                let x3 = x.add_scaled(0.5 * h, &k2);
                let s3x = sx.add_scaled(0.5 * h, &k2x);
                let s3u = su.add_scaled(0.5 * h, &k2u);
                dynamics.eval(x3.as_slice(), u, &mut xdot);
                let k3 = Vector::from_slice(&xdot);
                let (a, b) = dynamics.jacobians(x3.as_slice(), u);
                let k3x = a.matmul(&s3x);
                let k3u = a.matmul(&s3u).add(&b);
                // stage 4
                let x4 = x.add_scaled(h, &k3);
                let s4x = sx.add_scaled(h, &k3x);
                let s4u = su.add_scaled(h, &k3u);
                dynamics.eval(x4.as_slice(), u, &mut xdot);
                let k4 = Vector::from_slice(&xdot);
                let (a, b) = dynamics.jacobians(x4.as_slice(), u);
                let k4x = a.matmul(&s4x);
                let k4u = a.matmul(&s4u).add(&b);

                let h6 = h / 6.0;
                x = x
                    .add_scaled(h6, &k1)
                    .add_scaled(2.0 * h6, &k2)
                    .add_scaled(2.0 * h6, &k3)
                    .add_scaled(h6, &k4);
                sx = sx
                    .add_scaled(h6, &k1x)
                    .add_scaled(2.0 * h6, &k2x)
                    .add_scaled(2.0 * h6, &k3x)
                    .add_scaled(h6, &k4x);
                su = su
                    .add_scaled(h6, &k1u)
                    .add_scaled(2.0 * h6, &k2u)
                    .add_scaled(2.0 * h6, &k3u)
                    .add_scaled(h6, &k4u);
            }
        }
    }
    (x, sx, su)
}

// ── OCP specification ───────────────────────────────────────────────

/// One quadratic weight `scale · yᵀ diag(diag) y`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuadraticWeight {
    pub scale: f64,
    pub diag: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct CostSpec {
    /// Adds `scale · x_kᵀ diag x_k` for `k = 0 … N−1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_state: Option<QuadraticWeight>,
    /// Adds `scale · u_kᵀ diag u_k` for `k = 0 … N−1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_control: Option<QuadraticWeight>,
    /// Adds `scale · x_Nᵀ diag x_N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_state: Option<QuadraticWeight>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundsSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Terminal constraint `‖c(x_N) − target‖² − radius² ≤ 0` on the pendulum
/// tip position (cart-pendulum dynamics only).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TipBallSpec {
    pub target: [f64; 2],
    pub radius: f64,
}

fn default_steps() -> usize {
    1
}

fn default_integrator() -> Integrator {
    Integrator::Rk4
}

/// Optimal control problem description; loadable from JSON (see the
/// repository documentation for the schema).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OcpSpec {
    /// Built-in dynamics name: `"cart_pendulum"` or `"linear_test"`.
    pub dynamics: String,
    /// Parameter overrides for the cart pendulum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pendulum_params: Option<CartPendulumParams>,
    pub n_intervals: usize,
    pub horizon: f64,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_steps")]
    pub steps_per_interval: usize,
    pub initial_state: Vec<f64>,
    #[serde(default)]
    pub cost: CostSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_tip_ball: Option<TipBallSpec>,
    /// Optional target for the initial guess: stage states are linearly
    /// interpolated from `initial_state` to this state. Defaults to
    /// holding `initial_state` on the whole horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_guess_target: Option<Vec<f64>>,
}

impl OcpSpec {
    pub fn from_json_str(s: &str) -> Result<OcpSpec, ModelError> {
        let spec: OcpSpec =
            serde_json::from_str(s).map_err(|e| ModelError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("OcpSpec serialization cannot fail")
    }

    pub fn make_dynamics(&self) -> Result<Arc<dyn Dynamics>, ModelError> {
        match self.dynamics.as_str() {
            "cart_pendulum" => Ok(Arc::new(CartPendulum::new(
                self.pendulum_params.unwrap_or_default(),
            ))),
            "linear_test" => Ok(Arc::new(LinearTest)),
            other => Err(ModelError::UnknownDynamics(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dynamics = self.make_dynamics()?;
        let nx = dynamics.nx();
        let nu = dynamics.nu();
        if self.n_intervals < 1 {
            return Err(ModelError::InvalidSpec("n_intervals must be at least 1".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(ModelError::InvalidSpec("horizon must be positive".into()));
        }
        if self.steps_per_interval < 1 {
            return Err(ModelError::InvalidSpec("steps_per_interval must be at least 1".into()));
        }
        if self.initial_state.len() != nx {
            return Err(ModelError::DimensionMismatch(format!(
                "initial_state has length {}, dynamics expects {}",
                self.initial_state.len(),
                nx
            )));
        }
        if let Some(w) = &self.cost.stage_state {
            if w.diag.len() != nx {
                return Err(ModelError::DimensionMismatch("stage_state weight length".into()));
            }
        }
        if let Some(w) = &self.cost.terminal_state {
            if w.diag.len() != nx {
                return Err(ModelError::DimensionMismatch("terminal_state weight length".into()));
            }
        }
        if let Some(w) = &self.cost.stage_control {
            if w.diag.len() != nu {
                return Err(ModelError::DimensionMismatch("stage_control weight length".into()));
            }
        }
        if let Some(b) = &self.control_bounds {
            if b.lower.len() != nu || b.upper.len() != nu {
                return Err(ModelError::DimensionMismatch("control bound length".into()));
            }
            if b.lower.iter().zip(&b.upper).any(|(l, u)| l > u) {
                return Err(ModelError::InvalidSpec("control bounds must satisfy lower <= upper".into()));
            }
        }
        if self.terminal_tip_ball.is_some() && self.dynamics != "cart_pendulum" {
            return Err(ModelError::InvalidSpec(
                "terminal_tip_ball requires cart_pendulum dynamics".into(),
            ));
        }
        if let Some(t) = &self.initial_guess_target {
            if t.len() != nx {
                return Err(ModelError::DimensionMismatch("initial_guess_target length".into()));
            }
        }
        Ok(())
    }
}

// ── Transcription ───────────────────────────────────────────────────

/// Index helpers for the multiple-shooting variable layout.
#[derive(Debug, Clone, Copy)]
pub struct OcpLayout {
    pub nx: usize,
    pub nu: usize,
    pub n_intervals: usize,
}

impl OcpLayout {
    pub fn n_v(&self) -> usize {
        self.n_intervals * (self.nx + self.nu) + self.nx
    }

    pub fn x_offset(&self, k: usize) -> usize {
        k * (self.nx + self.nu)
    }

    pub fn u_offset(&self, k: usize) -> usize {
        k * (self.nx + self.nu) + self.nx
    }

    pub fn state(&self, v: &Vector, k: usize) -> Vector {
        v.segment(self.x_offset(k), self.nx)
    }

    pub fn control(&self, v: &Vector, k: usize) -> Vector {
        v.segment(self.u_offset(k), self.nu)
    }
}

struct OcpModel {
    dynamics: Arc<dyn Dynamics>,
    layout: OcpLayout,
    dt: f64,
    integrator: Integrator,
    steps: usize,
    x_bar0: Vector,
    cost: CostSpec,
    bounds: Option<BoundsSpec>,
    tip_ball: Option<TipBallSpec>,
    pendulum: Option<CartPendulum>,
    n_h_bounds: usize,
}

impl OcpModel {
    fn objective(&self, v: &Vector) -> f64 {
        let lay = &self.layout;
        let mut val = 0.0;
        for k in 0..lay.n_intervals {
            if let Some(w) = &self.cost.stage_state {
                let x = lay.state(v, k);
                val += w.scale * (0..lay.nx).map(|i| w.diag[i] * x[i] * x[i]).sum::<f64>();
            }
            if let Some(w) = &self.cost.stage_control {
                let u = lay.control(v, k);
                val += w.scale * (0..lay.nu).map(|i| w.diag[i] * u[i] * u[i]).sum::<f64>();
            }
        }
        if let Some(w) = &self.cost.terminal_state {
            let x = lay.state(v, lay.n_intervals);
            val += w.scale * (0..lay.nx).map(|i| w.diag[i] * x[i] * x[i]).sum::<f64>();
        }
        val
    }

    fn gradient(&self, v: &Vector) -> Vector {
        let lay = &self.layout;
        let mut grad = Vector::zeros(lay.n_v());
        for k in 0..lay.n_intervals {
            if let Some(w) = &self.cost.stage_state {
                let off = lay.x_offset(k);
                for i in 0..lay.nx {
                    grad[off + i] += 2.0 * w.scale * w.diag[i] * v[off + i];
                }
            }
            if let Some(w) = &self.cost.stage_control {
                let off = lay.u_offset(k);
                for i in 0..lay.nu {
                    grad[off + i] += 2.0 * w.scale * w.diag[i] * v[off + i];
                }
            }
        }
        if let Some(w) = &self.cost.terminal_state {
            let off = lay.x_offset(lay.n_intervals);
            for i in 0..lay.nx {
                grad[off + i] += 2.0 * w.scale * w.diag[i] * v[off + i];
            }
        }
        grad
    }

    /// Constant objective Hessian (block diagonal).
    fn objective_hessian(&self) -> Matrix {
        let lay = &self.layout;
        let mut h = Matrix::zeros(lay.n_v(), lay.n_v());
        for k in 0..lay.n_intervals {
            if let Some(w) = &self.cost.stage_state {
                let off = lay.x_offset(k);
                for i in 0..lay.nx {
                    h[(off + i, off + i)] = 2.0 * w.scale * w.diag[i];
                }
            }
            if let Some(w) = &self.cost.stage_control {
                let off = lay.u_offset(k);
                for i in 0..lay.nu {
                    h[(off + i, off + i)] = 2.0 * w.scale * w.diag[i];
                }
            }
        }
        if let Some(w) = &self.cost.terminal_state {
            let off = lay.x_offset(lay.n_intervals);
            for i in 0..lay.nx {
                h[(off + i, off + i)] = 2.0 * w.scale * w.diag[i];
            }
        }
        h
    }

    fn equalities(&self, v: &Vector) -> Vector {
        let lay = &self.layout;
        let nx = lay.nx;
        let mut g = Vector::zeros(nx * (lay.n_intervals + 1));
        let x0 = lay.state(v, 0);
        for i in 0..nx {
            g[i] = x0[i] - self.x_bar0[i];
        }
        for k in 0..lay.n_intervals {
            let xk = lay.state(v, k);
            let uk = lay.control(v, k);
            let xe = integrate(
                self.dynamics.as_ref(),
                self.integrator,
                self.dt,
                self.steps,
                xk.as_slice(),
                uk.as_slice(),
            );
            let xk1 = lay.state(v, k + 1);
            for i in 0..nx {
                g[nx * (k + 1) + i] = xk1[i] - xe[i];
            }
        }
        g
    }

    fn equalities_jacobian(&self, v: &Vector) -> Matrix {
        let lay = &self.layout;
        let nx = lay.nx;
        let nu = lay.nu;
        let mut jac = Matrix::zeros(nx * (lay.n_intervals + 1), lay.n_v());
        for i in 0..nx {
            jac[(i, i)] = 1.0;
        }
        for k in 0..lay.n_intervals {
            let xk = lay.state(v, k);
            let uk = lay.control(v, k);
            let (_, sx, su) = integrate_with_sensitivities(
                self.dynamics.as_ref(),
                self.integrator,
                self.dt,
                self.steps,
                xk.as_slice(),
                uk.as_slice(),
            );
            let row0 = nx * (k + 1);
            for i in 0..nx {
                for j in 0..nx {
                    jac[(row0 + i, lay.x_offset(k) + j)] = -sx[(i, j)];
                }
                for j in 0..nu {
                    jac[(row0 + i, lay.u_offset(k) + j)] = -su[(i, j)];
                }
                jac[(row0 + i, lay.x_offset(k + 1) + i)] = 1.0;
            }
        }
        jac
    }

    fn inequalities(&self, v: &Vector) -> Vector {
        let lay = &self.layout;
        let mut h = Vector::zeros(self.n_h());
        let mut row = 0;
        if let Some(b) = &self.bounds {
            for k in 0..lay.n_intervals {
                let u = lay.control(v, k);
                for j in 0..lay.nu {
                    h[row] = u[j] - b.upper[j];
                    h[row + 1] = b.lower[j] - u[j];
                    row += 2;
                }
            }
        }
        if let Some(tb) = &self.tip_ball {
            let pend = self.pendulum.as_ref().expect("tip ball requires pendulum");
            let xn = lay.state(v, lay.n_intervals);
            let tip = pend.tip_position(xn.as_slice());
            let dx = tip[0] - tb.target[0];
            let dy = tip[1] - tb.target[1];
            h[row] = dx * dx + dy * dy - tb.radius * tb.radius;
        }
        h
    }

    fn inequalities_jacobian(&self, v: &Vector) -> Matrix {
        let lay = &self.layout;
        let mut jac = Matrix::zeros(self.n_h(), lay.n_v());
        let mut row = 0;
        if let Some(_b) = &self.bounds {
            for k in 0..lay.n_intervals {
                for j in 0..lay.nu {
                    jac[(row, lay.u_offset(k) + j)] = 1.0;
                    jac[(row + 1, lay.u_offset(k) + j)] = -1.0;
                    row += 2;
                }
            }
        }
        if let Some(tb) = &self.tip_ball {
            let pend = self.pendulum.as_ref().expect("tip ball requires pendulum");
            let xn = lay.state(v, lay.n_intervals);
            let tip = pend.tip_position(xn.as_slice());
            let jc = pend.tip_jacobian(xn.as_slice());
            let off = lay.x_offset(lay.n_intervals);
            for j in 0..lay.nx {
                jac[(row, off + j)] = 2.0
                    * ((tip[0] - tb.target[0]) * jc[(0, j)] + (tip[1] - tb.target[1]) * jc[(1, j)]);
            }
        }
        jac
    }

    fn n_h(&self) -> usize {
        self.n_h_bounds + if self.tip_ball.is_some() { 1 } else { 0 }
    }

    /// Exact Lagrangian Hessian: constant objective block, dynamics
    /// curvature by central differences of the interval Jacobian
    /// contracted with the shooting multipliers, analytic tip-ball term.
    fn hess_lagrangian(&self, v: &Vector, lambda: &Vector, mu: &Vector) -> Matrix {
        let lay = &self.layout;
        let nx = lay.nx;
        let nu = lay.nu;
        let mut hess = self.objective_hessian();

        for k in 0..lay.n_intervals {
            let lam = lambda.segment(nx * (k + 1), nx);
            if lam.norm_inf() == 0.0 {
                continue;
            }
            let xk = lay.state(v, k);
            let uk = lay.control(v, k);
            let dim = nx + nu;
            let h_fd = 1e-5 * (1.0 + xk.norm_inf());
            // ψ(x, u) = (Sx, Su)ᵀ λ; the g rows carry −Φ, so the block
            // enters with a negative sign.
            let psi = |x: &[f64], u: &[f64]| -> Vector {
                let (_, sx, su) = integrate_with_sensitivities(
                    self.dynamics.as_ref(),
                    self.integrator,
                    self.dt,
                    self.steps,
                    x,
                    u,
                );
                let gx = sx.matvec_transpose(&lam);
                let gu = su.matvec_transpose(&lam);
                Vector::concat(&[&gx, &gu])
            };
            let mut block = Matrix::zeros(dim, dim);
            for j in 0..dim {
                let mut xp = xk.clone();
                let mut xm = xk.clone();
                let mut up = uk.clone();
                let mut um = uk.clone();
                if j < nx {
                    xp[j] += h_fd;
                    xm[j] -= h_fd;
                } else {
                    up[j - nx] += h_fd;
                    um[j - nx] -= h_fd;
                }
                let col = psi(xp.as_slice(), up.as_slice())
                    .sub(&psi(xm.as_slice(), um.as_slice()))
                    .scale(1.0 / (2.0 * h_fd));
                for i in 0..dim {
                    block[(i, j)] = -col[i];
                }
            }
            let block = block.symmetrize();
            let off = lay.x_offset(k);
            for j in 0..dim {
                for i in 0..dim {
                    hess[(off + i, off + j)] += block[(i, j)];
                }
            }
        }

        if let Some(tb) = &self.tip_ball {
            let mu_row = mu[self.n_h() - 1];
            if mu_row != 0.0 {
                let pend = self.pendulum.as_ref().expect("tip ball requires pendulum");
                let l = pend.params.length;
                let xn = lay.state(v, lay.n_intervals);
                let tip = pend.tip_position(xn.as_slice());
                let jc = pend.tip_jacobian(xn.as_slice());
                // ∇²h = 2(JᵀJ + Σ (c_j − t_j) ∇²c_j); only the (θ, θ)
                // entries of ∇²c are nonzero.
                let mut block = jc.transpose().matmul(&jc).scale(2.0);
                let theta = xn[2];
                block[(2, 2)] += 2.0
                    * ((tip[0] - tb.target[0]) * l * theta.sin()
                        + (tip[1] - tb.target[1]) * (-l * theta.cos()));
                let off = lay.x_offset(lay.n_intervals);
                for j in 0..nx {
                    for i in 0..nx {
                        hess[(off + i, off + j)] += mu_row * block[(i, j)];
                    }
                }
            }
        }
        hess.symmetrize()
    }
}

/// Transcribe an OCP into an [`Nlp`] by direct multiple shooting.
///
/// Equalities: initial-value constraint followed by one shooting-gap block
/// per interval. Inequalities: two bound rows per control entry per
/// interval (upper first), then the optional terminal tip-ball row. The
/// built NLP carries convex-over-nonlinear structure for the objective and
/// the tip-ball constraint, so GGN and SCQP Hessians are available.
pub fn build_ocp_nlp(
    spec: &OcpSpec,
    integrator: Integrator,
    steps_per_interval: usize,
) -> Result<Nlp, ModelError> {
    spec.validate()?;
    if steps_per_interval < 1 {
        return Err(ModelError::InvalidSpec("steps_per_interval must be at least 1".into()));
    }
    let dynamics = spec.make_dynamics()?;
    let layout =
        OcpLayout { nx: dynamics.nx(), nu: dynamics.nu(), n_intervals: spec.n_intervals };
    let n_h_bounds = if spec.control_bounds.is_some() {
        2 * spec.n_intervals * layout.nu
    } else {
        0
    };
    let pendulum = match spec.dynamics.as_str() {
        "cart_pendulum" => Some(CartPendulum::new(spec.pendulum_params.unwrap_or_default())),
        _ => None,
    };
    let model = Arc::new(OcpModel {
        dynamics,
        layout,
        dt: spec.horizon / spec.n_intervals as f64,
        integrator,
        steps: steps_per_interval,
        x_bar0: Vector::from_slice(&spec.initial_state),
        cost: spec.cost.clone(),
        bounds: spec.control_bounds.clone(),
        tip_ball: spec.terminal_tip_ball.clone(),
        pendulum,
        n_h_bounds,
    });

    let n_v = layout.n_v();
    let n_g = layout.nx * (spec.n_intervals + 1);
    let n_h = model.n_h();

    let m = model.clone();
    let f = move |v: &Vector| m.objective(v);
    let m = model.clone();
    let grad_f = move |v: &Vector| m.gradient(v);
    let m = model.clone();
    let g = move |v: &Vector| m.equalities(v);
    let m = model.clone();
    let jac_g = move |v: &Vector| m.equalities_jacobian(v);
    let m = model.clone();
    let h = move |v: &Vector| m.inequalities(v);
    let m = model.clone();
    let jac_h = move |v: &Vector| m.inequalities_jacobian(v);
    let m = model.clone();
    let hess = move |v: &Vector, lambda: &Vector, mu: &Vector| m.hess_lagrangian(v, lambda, mu);

    let mut builder = Nlp::builder(n_v, n_g, n_h)
        .objective(f, grad_f)
        .equalities(g, jac_g)
        .hess_lagrangian(hess);
    if n_h > 0 {
        builder = builder.inequalities(h, jac_h);
    }

    // objective structure: identity inner map, constant convex outer —
    // its Gauss-Newton curvature is exactly the objective Hessian
    let obj_hess = model.objective_hessian();
    builder = builder.objective_structure(ConvexComposite {
        dim_out: n_v,
        inner: Arc::new(|v: &Vector| v.clone()),
        inner_jac: Arc::new(move |_: &Vector| Matrix::identity(n_v)),
        outer_hessian: Arc::new(move |_: &Vector| obj_hess.clone()),
    });

    if let Some(tb) = &spec.terminal_tip_ball {
        let pend = CartPendulum::new(spec.pendulum_params.unwrap_or_default());
        let target = tb.clone();
        let lay = layout;
        let pend2 = pend;
        builder = builder.constraint_structure(
            n_h - 1,
            ConvexComposite {
                dim_out: 2,
                inner: Arc::new(move |v: &Vector| {
                    let xn = lay.state(v, lay.n_intervals);
                    let tip = pend.tip_position(xn.as_slice());
                    Vector::from_slice(&[tip[0] - target.target[0], tip[1] - target.target[1]])
                }),
                inner_jac: Arc::new(move |v: &Vector| {
                    let xn = lay.state(v, lay.n_intervals);
                    let jc = pend2.tip_jacobian(xn.as_slice());
                    let mut j = Matrix::zeros(2, lay.n_v());
                    j.set_block(0, lay.x_offset(lay.n_intervals), &jc);
                    j
                }),
                outer_hessian: Arc::new(|_: &Vector| Matrix::identity(2).scale(2.0)),
            },
        );
    }

    Ok(builder.build())
}

/// Initial iterate for a transcribed OCP: stage states linearly
/// interpolated from the initial state to `initial_guess_target` (or held
/// constant without one), controls zero, multipliers zero.
pub fn initial_iterate(spec: &OcpSpec, nlp: &Nlp) -> PrimalDualIterate {
    let dynamics = spec.make_dynamics().expect("spec validated before");
    let layout =
        OcpLayout { nx: dynamics.nx(), nu: dynamics.nu(), n_intervals: spec.n_intervals };
    let target = spec
        .initial_guess_target
        .clone()
        .unwrap_or_else(|| spec.initial_state.clone());
    let mut v = Vector::zeros(layout.n_v());
    let n = spec.n_intervals;
    for k in 0..=n {
        let alpha = k as f64 / n as f64;
        let off = layout.x_offset(k);
        for i in 0..layout.nx {
            v[off + i] = (1.0 - alpha) * spec.initial_state[i] + alpha * target[i];
        }
    }
    PrimalDualIterate::new(v, Vector::zeros(nlp.n_g()), Vector::zeros(nlp.n_h()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::check_derivatives;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn pendulum_swingup_spec() -> OcpSpec {
        OcpSpec {
            dynamics: "cart_pendulum".into(),
            pendulum_params: None,
            n_intervals: 20,
            horizon: 1.0,
            integrator: Integrator::Rk4,
            steps_per_interval: 1,
            initial_state: vec![0.0, 0.0, std::f64::consts::PI, 0.0],
            cost: CostSpec {
                stage_state: None,
                stage_control: Some(QuadraticWeight { scale: 0.5, diag: vec![1e-4] }),
                terminal_state: None,
            },
            control_bounds: None,
            terminal_tip_ball: Some(TipBallSpec { target: [0.8, 0.8], radius: 0.05 }),
            initial_guess_target: Some(vec![0.0, 0.0, 0.0, 0.0]),
        }
    }

    #[test]
    fn single_euler_step_transcription() {
        // N = 1, ẋ = u (double integrator second state only is not scalar;
        // use linear_test and check the known rows)
        let spec = OcpSpec {
            dynamics: "linear_test".into(),
            pendulum_params: None,
            n_intervals: 1,
            horizon: 0.5,
            integrator: Integrator::Euler,
            steps_per_interval: 1,
            initial_state: vec![0.1, 0.2],
            cost: CostSpec::default(),
            control_bounds: None,
            terminal_tip_ball: None,
            initial_guess_target: None,
        };
        let nlp = build_ocp_nlp(&spec, Integrator::Euler, 1).unwrap();
        assert_eq!((nlp.n_v(), nlp.n_g(), nlp.n_h()), (5, 4, 0));
        // v = (x0, u0, x1); Euler: x1 − x0 − T(x0₂, u0)
        let v = Vector::from_slice(&[0.3, 0.4, 2.0, 0.5, 0.6]);
        let g = nlp.eval_g(&v);
        assert!((g[0] - (0.3 - 0.1)).abs() < 1e-15);
        assert!((g[1] - (0.4 - 0.2)).abs() < 1e-15);
        assert!((g[2] - (0.5 - 0.3 - 0.5 * 0.4)).abs() < 1e-15);
        assert!((g[3] - (0.6 - 0.4 - 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn pendulum_dimensions() {
        let nlp = build_ocp_nlp(&pendulum_swingup_spec(), Integrator::Rk4, 1).unwrap();
        assert_eq!(nlp.n_v(), 104);
        assert_eq!(nlp.n_g(), 84);
        assert_eq!(nlp.n_h(), 1);
    }

    #[test]
    fn rk4_jacobian_matches_finite_differences() {
        let spec = pendulum_swingup_spec();
        let nlp = build_ocp_nlp(&spec, Integrator::Rk4, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let v = Vector::from_fn(nlp.n_v(), |_| rng.gen_range(-0.5..0.5));
        let jac = nlp.eval_jac_g(&v);
        let h = 1e-6;
        let mut max_err = 0.0f64;
        for j in 0..nlp.n_v() {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[j] += h;
            vm[j] -= h;
            let col = nlp.eval_g(&vp).sub(&nlp.eval_g(&vm)).scale(1.0 / (2.0 * h));
            for i in 0..nlp.n_g() {
                max_err = max_err.max((jac[(i, j)] - col[i]).abs());
            }
        }
        assert!(max_err < 1e-6, "max FD error {max_err}");
    }

    #[test]
    fn pendulum_full_derivative_check() {
        let spec = pendulum_swingup_spec();
        let nlp = build_ocp_nlp(&spec, Integrator::Rk4, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let v = Vector::from_fn(nlp.n_v(), |_| rng.gen_range(-0.4..0.4));
        let check = check_derivatives(&nlp, &v, 1e-5);
        assert!(check.grad_f < 1e-9);
        assert!(check.jac_g < 1e-5, "jac_g err {}", check.jac_g);
        assert!(check.jac_h < 1e-7, "jac_h err {}", check.jac_h);
        assert!(check.hess_lagrangian.unwrap() < 1e-4, "hess err {:?}", check.hess_lagrangian);
    }

    #[test]
    fn downward_equilibrium_has_zero_drift() {
        let pend = CartPendulum::new(CartPendulumParams::default());
        let mut xdot = [0.0; 4];
        pend.eval(&[0.0, 0.0, std::f64::consts::PI, 0.0], &[0.0], &mut xdot);
        for d in xdot {
            assert!(d.abs() < 1e-12, "drift {d}");
        }
    }

    #[test]
    fn cart_pendulum_jacobians_match_fd() {
        let pend = CartPendulum::new(CartPendulumParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let u = [rng.gen_range(-5.0..5.0)];
            let (a, b) = pend.jacobians(&x, &u);
            let h = 1e-6;
            for j in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let mut fp = [0.0; 4];
                let mut fm = [0.0; 4];
                pend.eval(&xp, &u, &mut fp);
                pend.eval(&xm, &u, &mut fm);
                for i in 0..4 {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    assert!((a[(i, j)] - fd).abs() < 1e-6, "A[{i}][{j}]");
                }
            }
            let mut fp = [0.0; 4];
            let mut fm = [0.0; 4];
            pend.eval(&x, &[u[0] + h], &mut fp);
            pend.eval(&x, &[u[0] - h], &mut fm);
            for i in 0..4 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((b[(i, 0)] - fd).abs() < 1e-6, "B[{i}]");
            }
        }
    }

    struct ScalarExp;
    impl Dynamics for ScalarExp {
        fn nx(&self) -> usize {
            1
        }
        fn nu(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64], _u: &[f64], xdot: &mut [f64]) {
            xdot[0] = x[0];
        }
        fn jacobians(&self, _x: &[f64], _u: &[f64]) -> (Matrix, Matrix) {
            (Matrix::from_rows(&[&[1.0]]), Matrix::zeros(1, 1))
        }
    }

    #[test]
    fn rk4_is_fourth_order_on_exponential() {
        // ẋ = x over [0, 1]: global error decays as O(h⁴)
        let exact = 1f64.exp();
        let err = |steps: usize| {
            let x = integrate(&ScalarExp, Integrator::Rk4, 1.0, steps, &[1.0], &[0.0]);
            (x[0] - exact).abs()
        };
        let mut orders = Vec::new();
        let mut prev = err(4);
        for steps in [8, 16, 32] {
            let e = err(steps);
            orders.push((prev / e).log2());
            prev = e;
        }
        for order in orders {
            assert!((3.7..=4.3).contains(&order), "observed order {order}");
        }
    }

    #[test]
    fn pendulum_jacobian_full_row_rank_at_feasible_point() {
        let spec = pendulum_swingup_spec();
        let nlp = build_ocp_nlp(&spec, Integrator::Rk4, 1).unwrap();
        // simulate forward with random controls: dynamics-feasible point
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let layout = OcpLayout { nx: 4, nu: 1, n_intervals: 20 };
        let mut v = Vector::zeros(nlp.n_v());
        let mut x = spec.initial_state.clone();
        for i in 0..4 {
            v[i] = x[i];
        }
        let pend = CartPendulum::new(CartPendulumParams::default());
        for k in 0..20 {
            let u = [rng.gen_range(-1.0..1.0)];
            v[layout.u_offset(k)] = u[0];
            let xn = integrate(&pend, Integrator::Rk4, 0.05, 1, &x, &u);
            x = xn.as_slice().to_vec();
            let off = layout.x_offset(k + 1);
            for i in 0..4 {
                v[off + i] = x[i];
            }
        }
        assert!(nlp.eval_g(&v).norm_inf() < 1e-12);
        let jac = nlp.eval_jac_g(&v);
        let qr = crate::linalg::Qr::new(&jac.transpose());
        assert_eq!(qr.rank(), nlp.n_g(), "LICQ violated on transcribed dynamics");
    }

    #[test]
    fn terminal_ball_value_at_target_tip() {
        let spec = pendulum_swingup_spec();
        let nlp = build_ocp_nlp(&spec, Integrator::Rk4, 1).unwrap();
        // place x_N so the tip is exactly at (l, l): θ = 0, p = l
        let layout = OcpLayout { nx: 4, nu: 1, n_intervals: 20 };
        let mut v = Vector::zeros(nlp.n_v());
        let off = layout.x_offset(20);
        v[off] = 0.8;
        let h = nlp.eval_h(&v);
        assert!((h[0] - (-0.0025)).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let spec = pendulum_swingup_spec();
        let json = spec.to_json_string();
        let back = OcpSpec::from_json_str(&json).unwrap();
        assert_eq!(back, spec);

        let bad = OcpSpec { initial_state: vec![0.0; 3], ..spec };
        assert!(matches!(bad.validate(), Err(ModelError::DimensionMismatch(_))));
        let unknown = OcpSpec { dynamics: "pogo_stick".into(), ..pendulum_swingup_spec() };
        assert!(matches!(unknown.validate(), Err(ModelError::UnknownDynamics(_))));
    }

    #[test]
    fn initial_iterate_interpolates_states() {
        let spec = pendulum_swingup_spec();
        let nlp = build_ocp_nlp(&spec, Integrator::Rk4, 1).unwrap();
        let z0 = initial_iterate(&spec, &nlp);
        let layout = OcpLayout { nx: 4, nu: 1, n_intervals: 20 };
        // θ goes linearly from π to 0
        let theta_mid = z0.v[layout.x_offset(10) + 2];
        assert!((theta_mid - std::f64::consts::PI / 2.0).abs() < 1e-12);
        assert_eq!(z0.lambda.len(), 84);
        assert_eq!(z0.mu.len(), 1);
    }
}
