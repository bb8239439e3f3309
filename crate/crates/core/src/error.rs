//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: dimension mismatches, invalid parameters, malformed files.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    /// Iterative solver ran out of iterations or stagnated.
    #[error("solver did not converge: residual {achieved:.3e} after {iterations} iterations (required {required:.3e})")]
    NonConvergence {
        iterations: usize,
        achieved: f64,
        required: f64,
        history: Vec<f64>,
    },

    #[error("direct factorization failed: {0}")]
    Factorization(String),

    /// Neumann data violates the kernel-orthogonality solvability condition.
    #[error("incompatible Neumann data: defect {defect:.3e} exceeds tolerance {ctol:.3e}")]
    Incompatible { defect: f64, ctol: f64 },

    /// More near-null vectors than the cap allows; the boundary problem is
    /// likely not Fredholm (Shapiro-Lopatinsky suspect).
    #[error("kernel dimension {dim} exceeds cap {cap}; Shapiro-Lopatinsky suspect")]
    KernelCapExceeded { dim: usize, cap: usize },

    /// No clear spectral gap between near-null and bulk eigenvalues.
    #[error("ambiguous kernel gap: eigenvalue {eigenvalue:.3e} lies between threshold {threshold:.3e} and {gap_factor}x threshold")]
    AmbiguousKernelGap {
        eigenvalue: f64,
        threshold: f64,
        gap_factor: f64,
    },

    /// Alternating iteration blew up.
    #[error("alternating iteration diverged: trace norm {norm:.3e} exceeds {limit:.3e}")]
    Divergence { norm: f64, limit: f64 },

    /// Discrepancy principle found no admissible regularization weight.
    #[error("no regularization weight reached discrepancy target {target:.3e}; sweep: {}",
        format_sweep(sweep))]
    NoAdmissibleAlpha {
        target: f64,
        /// (alpha, discrepancy) pairs in the order tried.
        sweep: Vec<(f64, f64)>,
    },
}

fn format_sweep(sweep: &[(f64, f64)]) -> String {
    sweep
        .iter()
        .map(|(a, d)| format!("alpha={a:.1e} -> {d:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by bad input rather than solver behaviour.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Io(_) | Error::Parse(_))
    }
}
