use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("weight exponent {weight} not allowed for {role}")]
    WeightNotAllowed { role: String, weight: f64 },
    #[error("grid tail contribution too large: {0}")]
    GridTail(String),
    #[error("operation requires a finite ultraviolet cutoff")]
    CutoffRequired,
    #[error("unsupported order {0} (at most 2 creation operators)")]
    UnsupportedOrder(usize),
    #[error("variance blow-up: {0}")]
    VarianceBlowup(String),
    #[error("outside validity regime: {0}")]
    Regime(String),
    #[error("trial function not normalizable: {0}")]
    Normalization(String),
    #[error("moment estimate unusable: {0}")]
    Moment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
