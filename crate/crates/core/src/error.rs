use thiserror::Error;

/// Errors raised by the analytics, quadrature, simulator and optimizer.
///
/// Numeric payloads are stored as `f64` regardless of the scalar the
/// computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} must be {requirement}, got {value}")]
    Domain {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("exponential cost overflows: alpha = {alpha}, argument = {argument}")]
    Overflow { alpha: f64, argument: f64 },

    #[error("Ei({x}) is outside the representable range")]
    Range { x: f64 },

    #[error("Ei has a pole at 0")]
    Pole,

    #[error("queue is unstable: rho = {rho} (need rho < 1)")]
    Unstable { rho: f64 },

    #[error("parameter regime violated: {0}")]
    Regime(String),

    #[error("ill-conditioned evaluation: {0}")]
    Conditioning(String),

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate}, error {error})")]
    Convergence {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("integrand is not finite at t = {t}")]
    NonFiniteIntegrand { t: f64 },

    #[error("objective is not finite at x = {x}")]
    NonFiniteObjective { x: f64 },

    #[error("objective has more than one local minimum on the search grid (near {locations:?})")]
    Multimodal { locations: Vec<f64> },

    #[error("configuration: {0}")]
    Config(String),

    #[error("update {index} (y = {y}, t = {t}) with alpha = {alpha}: {source}")]
    Sample {
        index: usize,
        alpha: f64,
        y: f64,
        t: f64,
        source: Box<Error>,
    },

    #[error("replication {index}: {source}")]
    Replication { index: usize, source: Box<Error> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
