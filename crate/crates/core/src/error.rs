use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Feller condition violated under {measure}: 2*kappa*theta = {lhs} <= xi^2 = {rhs}")]
    FellerViolation {
        measure: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("numerical integration did not converge (error estimate {estimate:e} > tolerance {tolerance:e})")]
    Integration { estimate: f64, tolerance: f64 },

    #[error("price {price} outside the no-arbitrage band ({lower}, {upper})")]
    OutOfBand { price: f64, lower: f64, upper: f64 },

    #[error("implied volatility solver did not converge (residual {residual:e})")]
    ImpliedVolNoConvergence { residual: f64 },

    #[error("hamiltonian maximizer not found for p = {p} (first-order residual {residual:e})")]
    Hamiltonian { p: f64, residual: f64 },

    #[error("CFL violation: {detail}")]
    Cfl { detail: String },

    #[error("malformed value-function artifact: {0}")]
    Artifact(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(#[from] serde_json::Error),
}
