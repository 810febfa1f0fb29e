use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("weight at position {index} is not strictly positive and finite: {value}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("weights are not non-increasing at position {index}")]
    NotNonIncreasing { index: usize },

    #[error("hypercube needs 2^d states with 1 <= d <= {max}, got {len} states")]
    BadHypercubeSize { len: usize, max: u32 },

    #[error("rank {rank} outside 1..={size}")]
    RankOutOfRange { rank: usize, size: usize },

    #[error("start rank {0} lies inside the target set")]
    StartInTarget(usize),

    #[error("{name} = {value} is outside {range}")]
    Parameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error(
        "beta = {beta} gives alpha = {alpha} >= 1; the heavy-tailed regime needs beta > sqrt(2 log 2)"
    )]
    ErgodicRegime { beta: f64, alpha: f64 },

    #[error("tail mass {tail} beyond the last atom exceeds epsilon = {epsilon}")]
    UnreachableEpsilon { epsilon: f64, tail: f64 },

    #[error("invalid trajectory: {0}")]
    Trajectory(String),

    #[error("invalid time distortion: {0}")]
    TimeDistortion(String),

    #[error("entrance/exit sequences disagree on N: {source_n} vs {target_n}")]
    MismatchedN { source_n: usize, target_n: usize },

    #[error("replica {index} failed: {message}")]
    Replica { index: u64, message: String },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, range: &'static str) -> Self {
        Error::Parameter { name, value, range }
    }
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
