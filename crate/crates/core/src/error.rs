use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("subspaces are not transverse: {0}")]
    NotTransverse(String),
    #[error("degenerate form: {0}")]
    Degenerate(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("symplectic drift {drift:.3e} above ceiling {ceiling:.1e} at t = {t}")]
    Drift { drift: f64, ceiling: f64, t: f64 },
    #[error("residual {what} = {value:.3e} exceeds {tol:.1e}")]
    Residual { what: String, value: f64, tol: f64 },
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("not conjugate: {0}")]
    NotConjugate(String),
    #[error("search failed: {0}")]
    NotFound(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{stage}: {source}")]
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
    /// Wrap the error with the name of the pipeline stage that raised it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// The innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
