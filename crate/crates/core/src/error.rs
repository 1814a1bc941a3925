use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("config line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    #[error("kernel constraint violated: {0}")]
    Kernel(String),

    #[error("initial data: {0}")]
    InitialData(String),

    #[error("array length mismatch: {0}")]
    LengthMismatch(String),

    #[error("non-finite state: {0}")]
    NonFinite(String),

    #[error("Picard iteration failed to converge after {iters} iterations (dt = {dt}); residual trace: {trace:?}")]
    PicardDiverged {
        iters: usize,
        dt: f64,
        trace: Vec<f64>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
