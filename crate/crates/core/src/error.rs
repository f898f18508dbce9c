use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("row {0} has zero norm")]
    ZeroNormRow(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("bundle has no images")]
    EmptyBundle,
    #[error("image {0} has no tokens")]
    EmptyImage(usize),
    #[error("bundle has no text tokens")]
    EmptyText,
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("{tokens} visual tokens cannot cover {images} images")]
    BudgetUnsatisfiable { tokens: usize, images: usize },
    #[error("budget {m1} infeasible for {images} images with capacity {capacity}")]
    InfeasibleBudget {
        m1: usize,
        images: usize,
        capacity: usize,
    },
    #[error("image {0} has a zero mean embedding")]
    ZeroMeanImage(usize),
    #[error("image {0} has a different token count than its predecessor")]
    PositionMismatch(usize),
    #[error("no consecutive image pairs to average")]
    EmptySteps,
    #[error("need at least 2 tokens, got {0}")]
    TooFewTokens(usize),
    #[error("bad budget {0}")]
    BadBudget(usize),
    #[error("bad subset: {0}")]
    BadSubset(String),
    #[error("selection does not match bundle: {0}")]
    SelectionMismatch(String),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u32),
    #[error("file truncated")]
    TruncatedFile,
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("bad synthetic spec: {0}")]
    BadSpec(String),
    #[error("{kernel}: fast and naive paths disagree ({detail})")]
    BenchDisagreement { kernel: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error class. Code 2 is reserved for
    /// command-line usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ShapeMismatch { .. } => 10,
            Error::ZeroNormRow(_) => 11,
            Error::DimMismatch { .. } => 12,
            Error::EmptyBundle => 13,
            Error::EmptyImage(_) => 14,
            Error::EmptyText => 15,
            Error::BadConfig(_) => 20,
            Error::BudgetUnsatisfiable { .. } => 21,
            Error::InfeasibleBudget { .. } => 22,
            Error::BadBudget(_) => 23,
            Error::ZeroMeanImage(_) => 30,
            Error::PositionMismatch(_) => 31,
            Error::EmptySteps => 32,
            Error::TooFewTokens(_) => 33,
            Error::BadSubset(_) => 34,
            Error::SelectionMismatch(_) => 35,
            Error::BadMagic(_) => 40,
            Error::BadVersion(_) => 41,
            Error::TruncatedFile => 42,
            Error::BadHeader(_) => 43,
            Error::BadSpec(_) => 44,
            Error::BenchDisagreement { .. } => 50,
            Error::Io(_) => 60,
            Error::Json(_) => 61,
        }
    }
}
