use thiserror::Error;

/// Errors raised by the pipeline stages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("lung mask is empty")]
    NoLungRegion,
    #[error("no valid placement found after {attempts} attempts")]
    NoValidPlacement { attempts: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("reference set is empty")]
    EmptyReferenceSet,
    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("ensemble members are not aligned: {0}")]
    MisalignedEnsemble(String),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("F1 is undefined without abnormal samples")]
    UndefinedF1,
    #[error("phantom generation failed: {0}")]
    GenerationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
