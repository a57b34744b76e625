use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("newton iteration stalled after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { last: Vec<f64>, residual: f64, iterations: usize },

    #[error("state is off the constraint manifold (residual {residual:.3e} > {tol:.1e})")]
    OffManifold { residual: f64, tol: f64 },

    #[error("regularity fails at {} probe(s)", probes.len())]
    RegularityViolated { probes: Vec<usize> },

    #[error("algebraic Jacobian at level {level} is rank deficient at {} probe(s)", probes.len())]
    InconsistentIndex { level: usize, probes: Vec<usize> },

    #[error("no input keeps the manifold at level {level}: row {row} has zero input coefficients but right side {rhs:.3e}")]
    StructuralInfeasibility { level: usize, row: usize, rhs: f64 },

    #[error("barrier input row vanishes (norm {norm:.3e}); relative degree mismatch")]
    DegenerateRow { norm: f64 },

    #[error("iteration cap of {0} reached")]
    MaxIterations(usize),

    #[error("local search minimum {nlp_min:.6e} and grid minimum {grid_min:.6e} disagree in sign")]
    OracleDisagreement { nlp_min: f64, grid_min: f64 },

    #[error("safety filter infeasible at t = {t}")]
    FilterInfeasible { t: f64 },

    #[error("no samples found in the boundary band")]
    NoBoundarySamples,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
