use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Configuration problems. Each variant names the field it rejects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("`{field}` must be positive")]
    NotPositive { field: &'static str },
    #[error("`cp_len` = {cp_len} is shorter than n_paths - 1 = {required}")]
    CpTooShort { cp_len: usize, required: usize },
    #[error("`n_subcarriers` = {n} must be at least 2 * n_paths = {required}")]
    TooFewSubcarriers { n: usize, required: usize },
    #[error("`snr_grid_db` is empty")]
    EmptySnrGrid,
    #[error("`snr_grid_db` contains a non-finite value")]
    NonFiniteSnr,
    #[error("`n_realizations` must be at least 1")]
    NoRealizations,
    #[error("quantized phase patterns need at least one bit")]
    ZeroQuantBits,
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite sample in input")]
    NonFinite,
    #[error("cyclic prefix length {cp_len} exceeds symbol length {n}")]
    CpLongerThanSymbol { cp_len: usize, n: usize },
    #[error("upsampling ratio must be at least 1")]
    ZeroUpsampling,
    #[error("length {len} is not a multiple of {n0}")]
    NotDivisible { len: usize, n0: usize },
    #[error("channel has {taps} taps but only {n} subcarriers")]
    TooManyTaps { taps: usize, n: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("effective channel is column-rank deficient (sigma_min / sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("zero matrix has no condition number")]
    ZeroMatrix,
    #[error("pattern constraint {found:?} does not match expected {expected:?}")]
    ConstraintMismatch {
        expected: crate::beamforming::Constraint,
        found: crate::beamforming::Constraint,
    },
    #[error("unsupported code rate {0}")]
    CodeRate(f64),
    #[error("block of {bits} coded bits does not fit {streams} stream(s) x {subcarriers} subcarriers of QPSK")]
    BlockGranularity {
        bits: usize,
        streams: usize,
        subcarriers: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
