use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A jump cumulant or symbol was asked for a derivative it cannot supply,
    /// or a closed form was requested for a model that has none.
    #[error("capability: {0}")]
    Capability(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("exponential moment does not exist: {0}")]
    Moment(String),

    #[error("degenerate expansion at u = {u:?}, t = {t}: truncated denominator vanishes")]
    DegenerateExpansion { u: Vec<Complex64>, t: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{component}: {source}")]
    Component {
        component: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("price {price} outside no-arbitrage bounds ({lower}, {upper})")]
    Bound { price: f64, lower: f64, upper: f64 },

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn in_component(self, component: &'static str) -> Self {
        Error::Component {
            component,
            source: Box::new(self),
        }
    }

    /// True for errors caused by user-supplied parameters or configuration
    /// rather than by a numerical failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::ParameterDomain(_)
            | Error::DimensionMismatch { .. }
            | Error::Capability(_)
            | Error::Moment(_)
            | Error::InvalidModel(_)
            | Error::Config(_)
            | Error::Io(_) => true,
            Error::Component { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
