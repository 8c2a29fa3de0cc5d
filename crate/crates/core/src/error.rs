use thiserror::Error;

/// Errors produced by dataset validation, estimation and benchmarking.
///
/// Scalar payloads are widened to `f64` so the error type stays non-generic.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset contains no subjects")]
    EmptyDataset,

    #[error("invalid domain: lo {lo} must be strictly below hi {hi}")]
    InvalidDomain { lo: f64, hi: f64 },

    #[error("subject `{subject}`: observation time {t} outside domain [{lo}, {hi}]")]
    TimeOutOfDomain {
        subject: String,
        t: f64,
        lo: f64,
        hi: f64,
    },

    #[error("subject `{subject}`: {times} times but {values} values")]
    LengthMismatch {
        subject: String,
        times: usize,
        values: usize,
    },

    #[error("subject `{subject}` has no observations")]
    EmptySubject { subject: String },

    #[error("bandwidth must be positive, got {0}")]
    NonpositiveBandwidth(f64),

    #[error("response vector has {got} entries, dataset has {expected} observations")]
    ResponseLengthMismatch { expected: usize, got: usize },

    #[error("bandwidth candidate list is empty")]
    EmptyCandidateList,

    #[error("{n} subjects cannot be split into {folds} cross-validation folds")]
    TooFewSubjects { n: usize, folds: usize },

    #[error("no subject has at least two observations")]
    NoEligibleSubjects,

    #[error("no within-subject observation pairs available")]
    NoEligiblePairs,

    #[error("invalid correlation parameters: {0}")]
    InvalidParameters(String),

    #[error("special function argument out of domain: {0}")]
    DomainError(String),

    #[error("no optimizer start produced a finite objective")]
    AllStartsFailed,

    #[error("covariance factorization failed even after diagonal jitter")]
    FactorizationFailure,

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("benchmark aborted: {failed} of {total} replicates failed")]
    BenchAborted { failed: usize, total: usize },
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
