use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    Validation(String),

    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration of {requested} sequences exceeds the cap of {cap}")]
    Capacity { requested: u128, cap: u64 },

    #[error("unknown {what} id {id}")]
    Lookup { what: &'static str, id: usize },

    #[error("certificate infeasible: metric {value} is not below delta {delta}")]
    Infeasible { value: f64, delta: f64 },

    #[error("NLL bound violated: declared M = {declared} < observed {observed}")]
    BoundViolation { declared: f64, observed: f64 },

    #[error("weight bound violated: declared r_min = {declared} > observed {observed}")]
    WeightViolation { declared: f64, observed: f64 },

    #[error("scorer protocol error: {message} (payload: {payload})")]
    Protocol { message: String, payload: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn protocol(message: impl Into<String>, payload: impl Into<String>) -> Self {
        Error::Protocol {
            message: message.into(),
            payload: payload.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
