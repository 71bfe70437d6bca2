//! Per-iteration convergence logs and their CSV serialization.

use std::io::Write;
use std::path::Path;

/// Which quantity certifies termination: the true KKT residual for exact
/// methods, the step norm for inexact ones (their KKT residual stalls at
/// the perturbed solution).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Exact,
    ZeroOrder,
}

/// One solver iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iter: usize,
    /// True KKT residual ∞-norm at the iterate (exact derivatives).
    pub kkt_inf: f64,
    /// ∞-norm of the step taken from this iterate (0 on the final row).
    pub step_inf: f64,
    /// Anderson gain of the accelerated step, when one was taken.
    pub theta: Option<f64>,
    pub aa_active: bool,
    /// Objective value at the iterate.
    pub obj: f64,
}

/// Iteration log of one solve.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub label: String,
    pub mode: SolveMode,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl ConvergenceReport {
    pub fn new(label: impl Into<String>, mode: SolveMode) -> Self {
        ConvergenceReport { label: label.into(), mode, records: Vec::new(), converged: false }
    }

    pub fn push(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    /// Number of solver steps taken (final diagnostic row excluded).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(if self.converged { 1 } else { 0 })
    }

    /// First iteration index whose KKT residual is at most `tol`.
    pub fn iterations_to_kkt(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.kkt_inf <= tol).map(|r| r.iter)
    }

    /// Residual series used for rate estimation: KKT norms for exact
    /// methods, step norms for zero-order ones.
    pub fn residual_series(&self) -> Vec<f64> {
        match self.mode {
            SolveMode::Exact => self.records.iter().map(|r| r.kkt_inf).collect(),
            SolveMode::ZeroOrder => self.records.iter().map(|r| r.step_inf).collect(),
        }
    }

    /// Per-record acceleration flags, aligned with [`residual_series`].
    pub fn aa_flags(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.aa_active).collect()
    }

    pub fn final_kkt(&self) -> Option<f64> {
        self.records.last().map(|r| r.kkt_inf)
    }

    /// CSV with header `iter,kkt_inf,step_inf,theta_k,aa_active,obj`.
    /// Formatting is the shortest round-trip float representation, so
    /// identical runs produce identical bytes.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("iter,kkt_inf,step_inf,theta_k,aa_active,obj\n");
        for r in &self.records {
            let theta = r.theta.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iter,
                r.kkt_inf,
                r.step_inf,
                theta,
                u8::from(r.aa_active),
                r.obj
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv_string().as_bytes())
    }
}
