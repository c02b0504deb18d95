//! l1 recovery: basis pursuit `min ||x||_1 s.t. Phi x = y`, basis pursuit
//! denoising `min ||x||_1 s.t. ||y - Phi x||_2 <= eps`, and exact oracles
//! for tiny instances.

mod admm;
mod oracle;

use serde::{Deserialize, Serialize};

pub use admm::{basis_pursuit, bpdn};
pub use oracle::{l0_oracle_small, l1_oracle_small, L0Solution, L1OracleSolution};

use crate::ensembles::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::linalg::{matvec, norm1, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    /// ADMM penalty `rho`, applied to the problem rescaled to `||y|| = 1`.
    pub penalty: f64,
    pub feas_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 5000,
            primal_tol: 1e-7,
            dual_tol: 1e-7,
            penalty: 1.0,
            feas_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("primal_tol", self.primal_tol),
            ("dual_tol", self.dual_tol),
            ("penalty", self.penalty),
            ("feas_tol", self.feas_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    InfeasibleDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub solution: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub l1_value: f64,
    /// `||y - Phi x*||_2`
    pub residual_norm: f64,
    /// A dual certificate proved the returned point l1-optimal.
    pub certified: bool,
}

impl SolverResult {
    pub(crate) fn new(
        phi: &MeasurementMatrix,
        y: &[f64],
        solution: Vec<f64>,
        status: SolveStatus,
        iterations: usize,
        certified: bool,
    ) -> Self {
        let residual_norm = residual(phi, y, &solution);
        SolverResult {
            l1_value: norm1(&solution),
            solution,
            status,
            iterations,
            residual_norm,
            certified,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

fn residual(phi: &MeasurementMatrix, y: &[f64], x: &[f64]) -> f64 {
    let px = matvec(phi, x, false).expect("dimensions checked by caller");
    px.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
}

pub(crate) fn check_problem(phi: &MeasurementMatrix, y: &[f64], cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if y.len() != phi.rows() {
        return Err(Error::DimensionMismatch {
            expected: phi.rows(),
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("measurements must be finite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `max(0, ||y - Phi x|| - eps)`
    pub feasibility_gap: f64,
    pub residual_norm: f64,
    pub l1_value: f64,
    /// `feasibility_gap <= tol * max(1, ||y||)`
    pub feasible: bool,
}

/// Replays the constraint of the recovery problem on a candidate `x`.
pub fn verify_solution(
    phi: &MeasurementMatrix,
    y: &[f64],
    x: &[f64],
    eps: f64,
    tol: f64,
) -> Result<VerificationReport> {
    if y.len() != phi.rows() {
        return Err(Error::DimensionMismatch {
            expected: phi.rows(),
            got: y.len(),
        });
    }
    if x.len() != phi.cols() {
        return Err(Error::DimensionMismatch {
            expected: phi.cols(),
            got: x.len(),
        });
    }
    let residual_norm = residual(phi, y, x);
    let feasibility_gap = (residual_norm - eps).max(0.0);
    Ok(VerificationReport {
        feasibility_gap,
        residual_norm,
        l1_value: norm1(x),
        feasible: feasibility_gap <= tol * norm2(y).max(1.0),
    })
}
