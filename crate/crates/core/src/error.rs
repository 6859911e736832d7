use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("label x group cell (label={label}, group={group}) has no non-test samples")]
    EmptyCell { label: u8, group: String },

    #[error("invalid fold count: {0}")]
    InvalidFolds(String),

    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("no group has positives; recall is undefined everywhere")]
    NoPositivesAnywhere,

    #[error("dimension mismatch: policy has {expected} group weights, scores have {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("grid resolution {0} is invalid; it must be odd and at least 3")]
    EvenResolution(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fitting fold is empty")]
    EmptyFold,

    #[error("fitting fold has no positives; the fairness constraint cannot be evaluated")]
    NoPositives,

    #[error("member {member}: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fold count {folds} does not match member count {members}")]
    FoldMemberMismatch { folds: usize, members: usize },

    #[error("group set mismatch: ensemble has {expected:?}, table has {actual:?}")]
    GroupSetMismatch {
        expected: Vec<String>,
        actual: Vec<String>,
    },

    #[error("restricted subset is empty")]
    EmptyRestriction,

    #[error("mean member error is zero (ensemble error {ensemble_error}); improvement ratios are undefined")]
    ZeroMemberError { ensemble_error: f64 },

    #[error("significance level {0} is outside (0, 1)")]
    InvalidAlpha(f64),

    #[error("base rate {0} is outside (0, 1)")]
    InvalidRate(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no groups supplied")]
    EmptyGroups,

    #[error("frontier is empty")]
    EmptyFrontier,

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("labels are required: {0}")]
    MissingLabels(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Stable classification of errors, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorClass {
    MalformedFile,
    InvariantViolation,
    UnknownGroup,
    Folds,
    Config,
    Shape,
    Fit,
    GroupSetMismatch,
    Diagnostics,
    Theory,
    Evaluation,
    Io,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 12] = [
        ErrorClass::MalformedFile,
        ErrorClass::InvariantViolation,
        ErrorClass::UnknownGroup,
        ErrorClass::Folds,
        ErrorClass::Config,
        ErrorClass::Shape,
        ErrorClass::Fit,
        ErrorClass::GroupSetMismatch,
        ErrorClass::Diagnostics,
        ErrorClass::Theory,
        ErrorClass::Evaluation,
        ErrorClass::Io,
    ];

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::MalformedFile => 10,
            ErrorClass::InvariantViolation => 11,
            ErrorClass::UnknownGroup => 12,
            ErrorClass::Folds => 13,
            ErrorClass::Config => 14,
            ErrorClass::Shape => 15,
            ErrorClass::Fit => 16,
            ErrorClass::GroupSetMismatch => 17,
            ErrorClass::Diagnostics => 18,
            ErrorClass::Theory => 19,
            ErrorClass::Evaluation => 20,
            ErrorClass::Io => 21,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::MalformedFile => "MalformedFile",
            ErrorClass::InvariantViolation => "InvariantViolation",
            ErrorClass::UnknownGroup => "UnknownGroup",
            ErrorClass::Folds => "Folds",
            ErrorClass::Config => "Config",
            ErrorClass::Shape => "Shape",
            ErrorClass::Fit => "Fit",
            ErrorClass::GroupSetMismatch => "GroupSetMismatch",
            ErrorClass::Diagnostics => "Diagnostics",
            ErrorClass::Theory => "Theory",
            ErrorClass::Evaluation => "Evaluation",
            ErrorClass::Io => "Io",
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::MalformedFile(_) => ErrorClass::MalformedFile,
            Error::InvariantViolation(_) | Error::MissingLabels(_) => {
                ErrorClass::InvariantViolation
            }
            Error::UnknownGroup(_) => ErrorClass::UnknownGroup,
            Error::EmptyCell { .. } | Error::InvalidFolds(_) | Error::FoldMemberMismatch { .. } => {
                ErrorClass::Folds
            }
            Error::InvalidConfig(_) | Error::InvalidArgument(_) => ErrorClass::Config,
            Error::LengthMismatch { .. } | Error::DimensionMismatch { .. } => ErrorClass::Shape,
            Error::EvenResolution(_)
            | Error::InvalidGrid(_)
            | Error::EmptyFold
            | Error::NoPositives
            | Error::NoPositivesAnywhere => ErrorClass::Fit,
            Error::Member { source, .. } => source.class(),
            Error::GroupSetMismatch { .. } => ErrorClass::GroupSetMismatch,
            Error::EmptyRestriction | Error::ZeroMemberError { .. } => ErrorClass::Diagnostics,
            Error::InvalidAlpha(_) | Error::InvalidRate(_) | Error::EmptyGroups => {
                ErrorClass::Theory
            }
            Error::EmptyFrontier | Error::EmptyTestSet => ErrorClass::Evaluation,
            Error::Io(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn for_member(self, member: usize) -> Error {
        Error::Member {
            member,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
