//! Canned experiments: cart-pendulum swing-up with convexified Hessians,
//! zero-order stabilization with frozen dynamics Jacobians, and a
//! synthetic fixed-point study for the Anderson wrapper.
//!
//! Each experiment runs a list of solver configurations from one common
//! initial iterate and writes, per configuration, a CSV iteration log
//! `out/<experiment>/<config>.csv`, plus `summary.json`, a self-contained
//! `convergence.svg`, and a `<config>.fixed_point.json` artifact for every
//! converged run (consumed by the analysis command).

use crate::anderson::{aa_step, AndersonConfig, AndersonState};
use crate::hessian::HessianStrategy;
use crate::linalg::{Matrix, Vector};
use crate::nlp::{ModelError, Nlp, PrimalDualIterate};
use crate::ocp::{build_ocp_nlp, initial_iterate, CostSpec, Integrator, OcpSpec, QuadraticWeight};
use crate::report::ConvergenceReport;
use crate::sqp::{solve_labeled, SqpConfig, SqpError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io;
use std::path::Path;

pub use crate::ocp::{BoundsSpec, CartPendulumParams, TipBallSpec};

/// Tolerance grid of the iterations-to-tolerance comparison tables.
pub const TOLERANCE_GRID: [(f64, &str); 4] =
    [(1e-1, "1e-1"), (1e-4, "1e-4"), (1e-6, "1e-6"), (1e-8, "1e-8")];

// ── Problem builders ────────────────────────────────────────────────

/// Swing-up OCP: pure control penalty `½ Σ uᵀRu` with `R = 1e-4`,
/// initial state `(0, 0, π, 0)`, terminal tip-ball constraint of radius
/// `0.05` around `(l, l)`, horizon 1 s over 20 RK4 intervals.
pub fn swingup_spec() -> OcpSpec {
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

pub fn swingup_ocp() -> Nlp {
    let spec = swingup_spec();
    build_ocp_nlp(&spec, spec.integrator, spec.steps_per_interval)
        .expect("swing-up spec is valid by construction")
}

/// Stabilization OCP: least-squares cost
/// `Σ (T/N)·x_kᵀQx_k + u_kᵀRu_k + x_NᵀQx_N` with
/// `Q = 2·diag(10³, 10⁻², 10³, 10⁻²)` in the `(p, v, θ, ω)` state order
/// (heavy weights on position and angle), `R = 0.02`, control bounds
/// `−80 ≤ u ≤ 80` and initial tilt `θ = 0.15π`.
pub fn stabilization_spec() -> OcpSpec {
    let q_diag = vec![2e3, 2e-2, 2e3, 2e-2];
    OcpSpec {
        dynamics: "cart_pendulum".into(),
        pendulum_params: None,
        n_intervals: 20,
        horizon: 1.0,
        integrator: Integrator::Rk4,
        steps_per_interval: 1,
        initial_state: vec![0.0, 0.0, 0.15 * std::f64::consts::PI, 0.0],
        cost: CostSpec {
            stage_state: Some(QuadraticWeight { scale: 0.05, diag: q_diag.clone() }),
            stage_control: Some(QuadraticWeight { scale: 1.0, diag: vec![0.02] }),
            terminal_state: Some(QuadraticWeight { scale: 1.0, diag: q_diag }),
        },
        control_bounds: Some(BoundsSpec { lower: vec![-80.0], upper: vec![80.0] }),
        terminal_tip_ball: None,
        initial_guess_target: None,
    }
}

pub fn stabilization_ocp() -> Nlp {
    let spec = stabilization_spec();
    build_ocp_nlp(&spec, spec.integrator, spec.steps_per_interval)
        .expect("stabilization spec is valid by construction")
}

/// Named problems an experiment (and the analysis command) can rebuild.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Swingup,
    Stabilization,
}

impl ProblemKind {
    pub fn spec(&self) -> OcpSpec {
        match self {
            ProblemKind::Swingup => swingup_spec(),
            ProblemKind::Stabilization => stabilization_spec(),
        }
    }

    pub fn build(&self) -> Nlp {
        match self {
            ProblemKind::Swingup => swingup_ocp(),
            ProblemKind::Stabilization => stabilization_ocp(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Swingup => "swingup",
            ProblemKind::Stabilization => "stabilization",
        }
    }

    pub fn from_name(name: &str) -> Option<ProblemKind> {
        match name {
            "swingup" => Some(ProblemKind::Swingup),
            "stabilization" => Some(ProblemKind::Stabilization),
            _ => None,
        }
    }
}

// ── Experiment machinery ────────────────────────────────────────────

#[derive(Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub config: SqpConfig,
}

pub struct ExperimentSpec {
    pub name: String,
    pub problem: ProblemKind,
    pub configs: Vec<ExperimentConfig>,
    pub z0: PrimalDualIterate,
}

/// Result of one configuration run; failures keep their partial report.
pub struct RunResult {
    pub name: String,
    pub report: ConvergenceReport,
    pub fixed_point: Option<PrimalDualIterate>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub converged: bool,
    pub iterations: usize,
    pub final_kkt: Option<f64>,
    pub iterations_to_kkt: BTreeMap<String, Option<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub problem: String,
    pub runs: Vec<RunSummary>,
}

/// Serialized converged iterate plus enough configuration to rebuild the
/// fixed-point map for later analysis.
#[derive(Debug, Serialize, Deserialize)]
pub struct FixedPointArtifact {
    pub experiment: String,
    pub problem: String,
    pub config_name: String,
    pub hessian: String,
    pub zero_order: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_bar: Option<Vec<f64>>,
    pub adjoint_correction: bool,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl FixedPointArtifact {
    pub fn rebuild_nlp(&self) -> Result<Nlp, ModelError> {
        let kind = ProblemKind::from_name(&self.problem)
            .ok_or_else(|| ModelError::InvalidSpec(format!("unknown problem `{}`", self.problem)))?;
        Ok(kind.build())
    }

    pub fn rebuild_config(&self) -> Result<SqpConfig, ModelError> {
        let hessian = HessianStrategy::parse(&self.hessian)
            .ok_or_else(|| ModelError::InvalidSpec(format!("unknown hessian `{}`", self.hessian)))?;
        let zero_order = if self.zero_order {
            Some(Vector::from_slice(self.v_bar.as_deref().ok_or_else(|| {
                ModelError::InvalidSpec("zero-order artifact without v_bar".into())
            })?))
        } else {
            None
        };
        Ok(SqpConfig {
            hessian,
            zero_order,
            adjoint_correction: self.adjoint_correction,
            ..SqpConfig::default()
        })
    }

    pub fn iterate(&self) -> PrimalDualIterate {
        PrimalDualIterate::new(
            Vector::from_slice(&self.v),
            Vector::from_slice(&self.lambda),
            Vector::from_slice(&self.mu),
        )
    }
}

fn summarize(name: &str, report: &ConvergenceReport, error: Option<&str>) -> RunSummary {
    let mut to_tol = BTreeMap::new();
    for (tol, label) in TOLERANCE_GRID {
        to_tol.insert(label.to_string(), report.iterations_to_kkt(tol));
    }
    RunSummary {
        name: name.to_string(),
        converged: report.converged,
        iterations: report.iterations(),
        final_kkt: report.final_kkt(),
        iterations_to_kkt: to_tol,
        error: error.map(str::to_string),
    }
}

fn run_one(nlp: &Nlp, z0: &PrimalDualIterate, ec: &ExperimentConfig) -> RunResult {
    match solve_labeled(nlp, z0, &ec.config, &ec.name) {
        Ok(result) => RunResult {
            name: ec.name.clone(),
            report: result.report,
            fixed_point: Some(result.z),
            error: None,
        },
        Err(SqpError::MaxIterReached(boxed)) => {
            let (z, report) = *boxed;
            let _ = z;
            RunResult {
                name: ec.name.clone(),
                report,
                fixed_point: None,
                error: Some("iteration limit reached".into()),
            }
        }
        Err(other) => RunResult {
            name: ec.name.clone(),
            report: ConvergenceReport::new(&ec.name, ec.config.mode()),
            fixed_point: None,
            error: Some(other.to_string()),
        },
    }
}

/// Run all configurations of an experiment (optionally on `jobs` threads),
/// write the per-config CSVs, `summary.json`, `convergence.svg` and
/// fixed-point artifacts to `out_dir`, and return the results in
/// configuration order.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    jobs: usize,
) -> io::Result<(Vec<RunResult>, ExperimentSummary)> {
    std::fs::create_dir_all(out_dir)?;
    let nlp = spec.problem.build();
    let jobs = jobs.max(1);

    let mut results: Vec<Option<RunResult>> = Vec::new();
    results.resize_with(spec.configs.len(), || None);
    std::thread::scope(|scope| {
        let mut pending: Vec<(usize, &ExperimentConfig)> =
            spec.configs.iter().enumerate().collect();
        while !pending.is_empty() {
            let batch: Vec<(usize, &ExperimentConfig)> =
                pending.drain(..pending.len().min(jobs)).collect();
            let mut handles = Vec::new();
            for (idx, ec) in batch {
                let nlp_ref = &nlp;
                let z0 = &spec.z0;
                handles.push((idx, scope.spawn(move || run_one(nlp_ref, z0, ec))));
            }
            for (idx, handle) in handles {
                results[idx] = Some(handle.join().expect("experiment worker panicked"));
            }
        }
    });
    let results: Vec<RunResult> = results.into_iter().map(Option::unwrap).collect();

    let mut runs = Vec::new();
    let mut curves = Vec::new();
    for res in &results {
        res.report.write_csv(&out_dir.join(format!("{}.csv", res.name)))?;
        runs.push(summarize(&res.name, &res.report, res.error.as_deref()));
        curves.push((res.name.clone(), res.report.residual_series()));
        if let Some(z) = &res.fixed_point {
            let ec = spec
                .configs
                .iter()
                .find(|c| c.name == res.name)
                .expect("result name matches a config");
            let artifact = FixedPointArtifact {
                experiment: spec.name.clone(),
                problem: spec.problem.name().to_string(),
                config_name: res.name.clone(),
                hessian: ec.config.hessian.name().to_string(),
                zero_order: ec.config.zero_order.is_some(),
                v_bar: ec.config.zero_order.as_ref().map(|v| v.as_slice().to_vec()),
                adjoint_correction: ec.config.adjoint_correction,
                v: z.v.as_slice().to_vec(),
                lambda: z.lambda.as_slice().to_vec(),
                mu: z.mu.as_slice().to_vec(),
            };
            std::fs::write(
                out_dir.join(format!("{}.fixed_point.json", res.name)),
                serde_json::to_string_pretty(&artifact).expect("artifact serializes"),
            )?;
        }
    }
    let summary = ExperimentSummary {
        experiment: spec.name.clone(),
        problem: spec.problem.name().to_string(),
        runs,
    };
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    write_convergence_svg(&out_dir.join("convergence.svg"), &curves)?;
    Ok((results, summary))
}

/// Format the iterations-to-tolerance comparison table as plain text.
pub fn comparison_table(summary: &ExperimentSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<18}", "config"));
    for (_, label) in TOLERANCE_GRID {
        out.push_str(&format!("{:>10}", label));
    }
    out.push_str(&format!("{:>12}\n", "converged"));
    for run in &summary.runs {
        out.push_str(&format!("{:<18}", run.name));
        for (_, label) in TOLERANCE_GRID {
            let cell = run
                .iterations_to_kkt
                .get(label)
                .copied()
                .flatten()
                .map(|n| n.to_string())
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!("{:>10}", cell));
        }
        out.push_str(&format!("{:>12}\n", if run.converged { "yes" } else { "no" }));
    }
    out
}

// ── Named experiments ───────────────────────────────────────────────

fn scqp_config(anderson: AndersonConfig) -> SqpConfig {
    SqpConfig { hessian: HessianStrategy::Scqp, anderson, ..SqpConfig::default() }
}

fn aa(depth: usize) -> AndersonConfig {
    AndersonConfig { enabled: true, depth, ..AndersonConfig::default() }
}

/// Swing-up comparison: exact Hessian with projection, plain GGN, plain
/// SCQP and Anderson-accelerated SCQP with depths 1, 5 and 10.
pub fn scqp_pendulum_experiment() -> ExperimentSpec {
    let spec = swingup_spec();
    let nlp = swingup_ocp();
    let z0 = initial_iterate(&spec, &nlp);
    let configs = vec![
        ExperimentConfig {
            name: "exact_project".into(),
            config: SqpConfig {
                hessian: HessianStrategy::ExactProject { epsilon: 1e-6 },
                ..SqpConfig::default()
            },
        },
        ExperimentConfig { name: "ggn".into(), config: SqpConfig { hessian: HessianStrategy::Ggn, ..SqpConfig::default() } },
        ExperimentConfig { name: "scqp".into(), config: scqp_config(AndersonConfig::default()) },
        ExperimentConfig { name: "aa1_scqp".into(), config: scqp_config(aa(1)) },
        ExperimentConfig { name: "aa5_scqp".into(), config: scqp_config(aa(5)) },
        ExperimentConfig { name: "aa10_scqp".into(), config: scqp_config(aa(10)) },
    ];
    ExperimentSpec { name: "scqp_pendulum".into(), problem: ProblemKind::Swingup, configs, z0 }
}

/// Zero-order stabilization: dynamics Jacobians frozen at the steady
/// state (the origin trajectory), with and without AA(1).
pub fn zero_order_experiment() -> ExperimentSpec {
    let nlp = stabilization_ocp();
    let v_bar = Vector::zeros(nlp.n_v());
    let z0 = PrimalDualIterate::zeros(&nlp);
    let base = SqpConfig {
        hessian: HessianStrategy::Ggn,
        zero_order: Some(v_bar),
        ..SqpConfig::default()
    };
    let configs = vec![
        ExperimentConfig { name: "zero_order".into(), config: base.clone() },
        ExperimentConfig {
            name: "aa1_zero_order".into(),
            config: SqpConfig { anderson: aa(1), ..base },
        },
    ];
    ExperimentSpec { name: "zero_order".into(), problem: ProblemKind::Stabilization, configs, z0 }
}

/// Exact-derivative reference solve of the stabilization problem (used
/// for the zero-order trajectory comparison).
pub fn stabilization_reference() -> Result<(PrimalDualIterate, ConvergenceReport), SqpError> {
    let nlp = stabilization_ocp();
    let config = SqpConfig { hessian: HessianStrategy::Ggn, ..SqpConfig::default() };
    let z0 = PrimalDualIterate::zeros(&nlp);
    let result = solve_labeled(&nlp, &z0, &config, "exact_ref")?;
    Ok((result.z, result.report))
}

/// Write the exact vs zero-order state/control trajectories side by side.
pub fn write_trajectory_csv(
    path: &Path,
    exact: &PrimalDualIterate,
    zero_order: &PrimalDualIterate,
) -> io::Result<()> {
    use std::io::Write;
    let spec = stabilization_spec();
    let layout = crate::ocp::OcpLayout { nx: 4, nu: 1, n_intervals: spec.n_intervals };
    let dt = spec.horizon / spec.n_intervals as f64;
    let mut file = std::fs::File::create(path)?;
    writeln!(
        file,
        "t,p_exact,v_exact,theta_exact,omega_exact,u_exact,p_zo,v_zo,theta_zo,omega_zo,u_zo"
    )?;
    for k in 0..=spec.n_intervals {
        let xe = layout.state(&exact.v, k);
        let xz = layout.state(&zero_order.v, k);
        let (ue, uz) = if k < spec.n_intervals {
            (
                layout.control(&exact.v, k)[0].to_string(),
                layout.control(&zero_order.v, k)[0].to_string(),
            )
        } else {
            (String::new(), String::new())
        };
        writeln!(
            file,
            "{},{},{},{},{},{},{},{},{},{},{}",
            k as f64 * dt,
            xe[0],
            xe[1],
            xe[2],
            xe[3],
            ue,
            xz[0],
            xz[1],
            xz[2],
            xz[3],
            uz
        )?;
    }
    Ok(())
}

// ── Synthetic AA study ──────────────────────────────────────────────

/// Residual histories of the plain and AA(1) iterations on the linear
/// contraction `φ(z) = A·z + b`.
pub struct LinearMapStudy {
    pub plain: Vec<f64>,
    pub accelerated: Vec<f64>,
    pub thetas: Vec<f64>,
}

/// Simulate `iters` steps of plain and AA(1) fixed-point iteration on
/// `φ(z) = A·z + b` from `z0` and record the residual 2-norms.
pub fn linear_map_study(a: &Matrix, b: &Vector, z0: &Vector, iters: usize) -> LinearMapStudy {
    let phi = |z: &Vector| a.matvec(z).add(b);
    let residual = |z: &Vector| phi(z).sub(z).norm2();
    let config = AndersonConfig { enabled: true, ..AndersonConfig::default() };

    let mut plain = Vec::with_capacity(iters + 1);
    let mut accelerated = Vec::with_capacity(iters + 1);
    let mut thetas = Vec::with_capacity(iters);
    let mut zp = z0.clone();
    let mut za = z0.clone();
    let mut state = AndersonState::new(1);
    plain.push(residual(&zp));
    accelerated.push(residual(&za));
    for _ in 0..iters {
        zp = phi(&zp);
        let (next, theta) = aa_step(&mut state, &za, &phi(&za), &config);
        za = next;
        plain.push(residual(&zp));
        accelerated.push(residual(&za));
        thetas.push(theta);
    }
    LinearMapStudy { plain, accelerated, thetas }
}

/// The fixed diagonal contraction studied by the acceptance suite.
pub fn aa_unit_fixed_map() -> (Matrix, Vector, Vector) {
    let a = Matrix::diag(&[0.9, 0.5, 0.1]);
    let z_star = Vector::from_slice(&[1.0, -2.0, 3.0]);
    // b = (I − A) z★ so z★ is the fixed point
    let b = z_star.sub(&a.matvec(&z_star));
    let z0 = Vector::from_slice(&[4.0, 4.0, 4.0]);
    (a, b, z0)
}

#[derive(Debug, Serialize)]
pub struct AaUnitSummary {
    pub experiment: String,
    pub iters: usize,
    pub plain_residual_final: f64,
    pub aa1_residual_final: f64,
    pub ratio: f64,
    pub max_theta: f64,
    pub random_study_seed: u64,
    pub random_plain_final: f64,
    pub random_aa1_final: f64,
}

/// Synthetic AA study: the fixed diagonal map plus a seeded random
/// contraction; writes residual CSVs and a summary.
pub fn aa_unit_experiment(out_dir: &Path, seed: u64) -> io::Result<AaUnitSummary> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    std::fs::create_dir_all(out_dir)?;

    let iters = 10;
    let (a, b, z0) = aa_unit_fixed_map();
    let fixed = linear_map_study(&a, &b, &z0, iters);

    // random diagonalizable contraction with spectral radius 0.85
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let raw = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let qr = crate::linalg::Qr::new(&raw);
    let q = qr.q_full();
    let diag =
        Matrix::diag(&(0..n).map(|i| 0.85 * (1.0 - i as f64 / n as f64)).collect::<Vec<_>>());
    let a_rand = q.matmul(&diag).matmul(&q.transpose());
    let b_rand = Vector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
    let z0_rand = Vector::from_fn(n, |_| rng.gen_range(-2.0..2.0));
    let random = linear_map_study(&a_rand, &b_rand, &z0_rand, 20);

    let write_series = |name: &str, study: &LinearMapStudy| -> io::Result<()> {
        use std::io::Write;
        let mut file = std::fs::File::create(out_dir.join(name))?;
        writeln!(file, "iter,plain_residual,aa1_residual,theta_k")?;
        for k in 0..study.plain.len() {
            let theta = if k >= 1 { study.thetas[k - 1].to_string() } else { String::new() };
            writeln!(file, "{},{},{},{}", k, study.plain[k], study.accelerated[k], theta)?;
        }
        Ok(())
    };
    write_series("fixed_diag.csv", &fixed)?;
    write_series("random_contraction.csv", &random)?;

    let summary = AaUnitSummary {
        experiment: "aa_unit".into(),
        iters,
        plain_residual_final: fixed.plain[iters],
        aa1_residual_final: fixed.accelerated[iters],
        ratio: fixed.accelerated[iters] / fixed.plain[iters],
        max_theta: fixed.thetas.iter().fold(0.0f64, |m, &t| m.max(t)),
        random_study_seed: seed,
        random_plain_final: *random.plain.last().unwrap(),
        random_aa1_final: *random.accelerated.last().unwrap(),
    };
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    let curves = vec![
        ("plain".to_string(), fixed.plain.clone()),
        ("aa1".to_string(), fixed.accelerated.clone()),
    ];
    write_convergence_svg(&out_dir.join("convergence.svg"), &curves)?;
    Ok(summary)
}

// ── SVG plot ────────────────────────────────────────────────────────

const SVG_PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Self-contained SVG log-scale residual plot: one polyline per series,
/// no external renderer required.
pub fn write_convergence_svg(path: &Path, series: &[(String, Vec<f64>)]) -> io::Result<()> {
    let width = 800.0;
    let height = 500.0;
    let margin = 60.0;
    let floor = 1e-16f64;

    let max_len = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0).max(2);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, s) in series {
        for &v in s {
            let lv = v.max(floor).log10();
            lo = lo.min(lv);
            hi = hi.max(lv);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    if hi - lo < 1.0 {
        hi = lo + 1.0;
    }

    let x_of = |k: usize| margin + (width - 2.0 * margin) * k as f64 / (max_len - 1) as f64;
    let y_of = |v: f64| {
        let lv = v.max(floor).log10();
        height - margin - (height - 2.0 * margin) * (lv - lo) / (hi - lo)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{yb}\" x2=\"{xr}\" y2=\"{yb}\" stroke=\"black\"/>\n",
        m = margin,
        yb = height - margin,
        xr = width - margin
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{yb}\" stroke=\"black\"/>\n",
        m = margin,
        yb = height - margin
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\">iteration</text>\n",
        width / 2.0 - 30.0,
        height - margin / 3.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" transform=\"rotate(-90 15 {})\">log10 residual</text>\n",
        15.0,
        height / 2.0,
        height / 2.0
    ));
    // y ticks at integer decades
    let mut decade = lo.floor() as i64;
    while (decade as f64) <= hi.ceil() {
        let y = y_of(10f64.powi(decade as i32));
        if y >= margin - 1.0 && y <= height - margin + 1.0 {
            svg.push_str(&format!(
                "<line x1=\"{x0}\" y1=\"{y:.2}\" x2=\"{x1}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n<text x=\"{xt}\" y=\"{yt:.2}\">1e{decade}</text>\n",
                x0 = margin,
                x1 = width - margin,
                xt = 5.0,
                yt = y + 4.0,
            ));
        }
        decade += 1;
    }
    for (i, (name, s)) in series.iter().enumerate() {
        if s.is_empty() {
            continue;
        }
        let color = SVG_PALETTE[i % SVG_PALETTE.len()];
        let points: Vec<String> =
            s.iter().enumerate().map(|(k, &v)| format!("{:.2},{:.2}", x_of(k), y_of(v))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = margin + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{ly:.2}\" x2=\"{x1}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{xt}\" y=\"{yt:.2}\">{name}</text>\n",
            x0 = width - margin - 120.0,
            x1 = width - margin - 95.0,
            xt = width - margin - 90.0,
            yt = ly + 4.0,
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}
