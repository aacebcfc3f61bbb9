use thiserror::Error;

/// Errors raised by the solvers and the example model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("non-hyperbolic equilibrium: eigenvalue {re:+.3e}{im:+.3e}i has |Re| below threshold")]
    NonHyperbolic { re: f64, im: f64 },

    #[error("defective spectrum: {0}")]
    DefectiveSpectrum(String),

    #[error("quadrature window too small: integrand at the edge is {edge_ratio:.2e} of its maximum; try T_q = {suggested:.1}")]
    WindowTooSmall { edge_ratio: f64, suggested: f64 },

    #[error("no bounded symmetric solution: {0}")]
    OffResonance(String),

    #[error("numerical quality: {0}")]
    NumericalQuality(String),

    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solver collapsed to the trivial solution (norm {norm:.3e} < {threshold:.3e})")]
    TrivialSolution { norm: f64, threshold: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integrator failure: {0}")]
    StepRejection(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
