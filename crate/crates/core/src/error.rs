use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("waveguide can host only {feasible} antenna(s) at guard spacing, {requested} requested")]
    Capacity { requested: usize, feasible: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("zero-forcing is singular: channels are collinear")]
    Singular,

    #[error(
        "no odd multiple of lambda/4 inside the achievable range [{low:.6e}, {high:.6e}] m"
    )]
    Infeasible { low: f64, high: f64 },

    #[error("every grid cell was singular; search found no candidate")]
    SearchFailure,

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
