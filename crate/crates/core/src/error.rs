use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("dataset contains no observations")]
    EmptyDataset,

    #[error("encoding error: scale {scale} must exceed max |v_i| = {max_abs}")]
    Encoding { scale: f64, max_abs: f64 },

    #[error("covariance matrix is ill-conditioned: kappa = {kappa:e} exceeds cap {cap:e}")]
    Conditioning { kappa: f64, cap: f64 },

    #[error("singular matrix (smallest eigenvalue {lambda_min:e}); consider noise dilution")]
    Singular { lambda_min: f64 },

    #[error("quantization overflow: max |entry| {max_entry} exceeds cap {cap}")]
    QuantizationOverflow { max_entry: i64, cap: i64 },

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("grid resolution error: {0}")]
    Resolution(String),

    #[error("degenerate run: {0}")]
    DegenerateRun(String),

    #[error("post-selection failed {attempts} times in a row")]
    PostSelection { attempts: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::EmptyDataset
            | Error::Encoding { .. }
            | Error::Io(_) => 2,
            Error::Conditioning { .. } | Error::Singular { .. } => 3,
            _ => 4,
        }
    }

    /// Short machine-readable tag used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::EmptyDataset => "empty_dataset",
            Error::Encoding { .. } => "encoding",
            Error::Conditioning { .. } => "conditioning",
            Error::Singular { .. } => "singular",
            Error::QuantizationOverflow { .. } => "quantization_overflow",
            Error::InvalidDecomposition(_) => "invalid_decomposition",
            Error::Resolution(_) => "resolution",
            Error::DegenerateRun(_) => "degenerate_run",
            Error::PostSelection { .. } => "post_selection",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
