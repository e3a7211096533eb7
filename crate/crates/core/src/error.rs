use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cannot resample from {from} um/px to {to} um/px: ratio must be a power of two >= 1")]
    InvalidResampling { from: f64, to: f64 },

    #[error("slide has no tiles: {slide_id}")]
    EmptySlide { slide_id: String },

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("AUROC undefined: cohort needs at least one melanoma and one nevus ({positives} positives, {negatives} negatives)")]
    AurocUndefined { positives: usize, negatives: usize },

    #[error("cohort too small/imbalanced for bootstrap: {dropped} of {n_boot} replicates drew a single class")]
    BootstrapDegenerate { dropped: usize, n_boot: usize },

    #[error("unknown model_id in fusion: {0}")]
    UnknownModel(String),

    #[error("slide {slide_id} has no confidence interval for the hierarchical gate")]
    MissingCi { slide_id: String },

    #[error("{path}: row {row}: {message}")]
    Record { path: String, row: usize, message: String },

    #[error("{path}: unexpected header {found:?}, expected {expected:?}")]
    Header { path: String, expected: String, found: String },

    #[error("{stage} failed for slide {slide_id}: {source}")]
    Stage {
        stage: &'static str,
        slide_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, slide_id: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            slide_id: slide_id.into(),
            source: Box::new(self),
        }
    }
}
