use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("node `{0}` listed more than once")]
    DuplicateNode(String),

    #[error("edge ({tail}, {head}) crosses neighborhoods `{tail_nb}` and `{head_nb}`; only within-neighborhood edges are modeled")]
    CrossNeighborhood {
        tail: String,
        head: String,
        tail_nb: String,
        head_nb: String,
    },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(String, String),

    #[error("self-loop on node `{0}`")]
    SelfLoop(String),

    #[error("graphs do not share the same partition and directedness")]
    PartitionMismatch,

    #[error("invalid dyad: {0}")]
    InvalidDyad(String),

    #[error("term/graph mismatch: {0}")]
    TermMismatch(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("parameter outside the model domain: {0}")]
    Domain(String),

    #[error("enumeration budget exceeded: {states} states > {budget}")]
    Budget { states: u128, budget: u64 },

    #[error("estimate on the boundary of the parameter space (MLE may not exist): {0}")]
    Boundary(String),

    #[error("importance weights degenerate: effective sample size {ess:.1} below {min:.1}")]
    LowEss { ess: f64, min: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Coarse classification used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Estimation,
    Data,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Model(_) | Error::Domain(_) | Error::TermMismatch(_) => {
                ErrorClass::Usage
            }
            Error::Boundary(_)
            | Error::LowEss { .. }
            | Error::Estimation(_)
            | Error::Budget { .. } => ErrorClass::Estimation,
            Error::Io(_)
            | Error::Csv(_)
            | Error::Malformed(_)
            | Error::UnknownNode(_)
            | Error::DuplicateNode(_)
            | Error::CrossNeighborhood { .. }
            | Error::DuplicateEdge(..)
            | Error::SelfLoop(_)
            | Error::PartitionMismatch
            | Error::InvalidDyad(_) => ErrorClass::Data,
        }
    }
}
