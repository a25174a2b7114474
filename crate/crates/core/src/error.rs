use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("circular mean is undefined (mean resultant length {0:e})")]
    DegenerateMean(f64),

    #[error("need at least 2 samples to resample, got {0}")]
    TooFewSamples(usize),
    #[error("series overlap is shorter than {required_s} s")]
    InsufficientOverlap { required_s: f64 },
    #[error("signal is flat (variance {0:e})")]
    FlatSignal(f64),
    #[error("cannot regress depth on a constant signal (variance {0:e})")]
    DegenerateRegression(f64),
    #[error("series rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),

    #[error("observation at t={timestamp} s has no keyframe within {tolerance} s")]
    UnmatchedObservation { timestamp: f64, tolerance: f64 },
    #[error("need at least 3 target observations, got {0}")]
    TooFewObservations(usize),
    #[error("frame mismatch: transform expects '{expected}', trajectory is '{found}'")]
    FrameMismatch { expected: String, found: String },

    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("heading has no horizontal component")]
    DegenerateHeading,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Range { line: usize, message: String },
    #[error("segment {from}->{to}: depth change {dz} m exceeds length {length} m")]
    InconsistentSegment {
        from: String,
        to: String,
        dz: f64,
        length: f64,
    },
    #[error("stations not reachable from the anchor: {}", .0.join(", "))]
    DisconnectedStation(Vec<String>),
    #[error("unknown station '{0}'")]
    UnknownStation(String),
    #[error("least-squares system is singular")]
    SingularSystem,

    #[error("bad image name pattern '{0}': needs {{camera}} and {{timestamp}}")]
    Pattern(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid corridor spec: {0}")]
    Spec(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn range(line: usize, message: impl Into<String>) -> Self {
        Error::Range {
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateRegression(_)
                | Error::SingularSystem
                | Error::FlatSignal(_)
                | Error::DegenerateMean(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
