use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("co-array has holes at lags {0:?}")]
    CoarrayHoles(Vec<i64>),

    #[error("unknown array family `{0}`")]
    UnknownFamily(String),

    #[error("angle {0} deg outside [-90, 90]")]
    AngleOutOfRange(f64),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("negative noise power {0}")]
    NegativeNoisePower(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("snapshot count {snapshots} is not divisible by frame length {frame_length}")]
    FrameLength { snapshots: usize, frame_length: usize },

    #[error("{sources} sources leave no noise subspace in a {rows}-row observation")]
    NotIdentifiable { sources: usize, rows: usize },

    #[error("{sources} sources exceed the {frames} available frames")]
    RankDeficient { sources: usize, frames: usize },

    #[error("observation matrix is degenerate (all singular values zero or non-finite)")]
    DegenerateObservation,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
