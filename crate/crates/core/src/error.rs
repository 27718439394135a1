use thiserror::Error;

use crate::selector::{Constraint, DesignReport};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The dynamic network has real characteristic roots; the closed forms need complex ones.
    #[error(
        "network is not underdamped: 1/(L*C_eff) = {natural_sq:.6e} <= delta^2 = {damping_sq:.6e}"
    )]
    NotUnderdamped { natural_sq: f64, damping_sq: f64 },

    #[error("time {t:.6e} s outside the valid window [{start:.6e}, {end:.6e}] s")]
    Domain { t: f64, start: f64, end: f64 },

    #[error("static resistor infeasible: V_d1 = {v_d1} V cannot be held with any resistance (numerator {numerator:.6e})")]
    InfeasibleStatic { v_d1: f64, numerator: f64 },

    #[error(
        "reverse-recovery capacitance infeasible: bracketed denominator {denominator:.6e} <= 0"
    )]
    InfeasibleRecovery { denominator: f64 },

    #[error("step {dt:.6e} s exceeds resolution bound {limit:.6e} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("overvoltage target {target_pct}% unreachable: best achievable is {best_pct:.4}%")]
    TargetUnreachable { target_pct: f64, best_pct: f64 },

    #[error("sweep grid is empty or malformed: {0}")]
    EmptyGrid(String),

    #[error("design infeasible: {binding} is binding")]
    Infeasible {
        binding: Constraint,
        report: Box<DesignReport>,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("replay diverged at step {step}: {detail}")]
    ReplayMismatch { step: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
