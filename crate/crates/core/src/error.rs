use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("length mismatch: expected {expected} elements, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid subarray layout: {0}")]
    InvalidLayout(String),
    #[error("axis {axis} out of range for {ndim}-dimensional array")]
    AxisOutOfRange { axis: usize, ndim: usize },
    #[error("element kind mismatch: expected {expected}, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid dims {dims:?} do not multiply to {nprocs} ranks")]
    GridMismatch { dims: Vec<usize>, nprocs: usize },
    #[error("count mismatch between rank {from} and rank {to}: sent {sent}, expected {expected}")]
    CountMismatch {
        from: usize,
        to: usize,
        sent: usize,
        expected: usize,
    },
    #[error("receive regions {first} and {second} overlap")]
    OverlappingRegions { first: usize, second: usize },
    #[error("collective mismatch in group {group}: rank {rank} called {called} while others called {pending}")]
    CollectiveMismatch {
        group: usize,
        rank: usize,
        called: &'static str,
        pending: &'static str,
    },
    #[error("deadlock: {0}")]
    Deadlock(String),
    #[error("collective timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("rank {rank} panicked: {message}")]
    RankPanicked { rank: usize, message: String },
    #[error("distribution mismatch: {0}")]
    DistributionMismatch(String),
    #[error("malformed array file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
