//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A line of an input file failed to parse.
    #[error("parse error in {file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    /// Inputs violate a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A sampling procedure could not produce the requested output.
    #[error("generation error: {0}")]
    Generation(String),

    /// Array shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Non-finite values where finite ones are required.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// The SMO solver hit its iteration cap before reaching tolerance.
    #[error("SMO did not converge after {iterations} iterations (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    SolverNonConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    /// The choice dataset is empty or too small to train on; callers should
    /// fall back to the original prediction.
    #[error("choice dataset too sparse: {0}; fall back to the original prediction")]
    DatasetSparsity(String),

    /// Bad run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage failed; wraps the underlying error with the stage name.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
