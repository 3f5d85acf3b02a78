use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the clustering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("infeasible measures: source mass {source_mass} vs target mass {target_mass}")]
    InfeasibleMeasures { source_mass: f64, target_mass: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{stage}: {source}")]
    InStage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error category, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Error {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::InStage {
            stage,
            source: Box::new(self),
        }
    }

    /// Level index recorded by the pipeline, if any.
    pub fn level(&self) -> Option<usize> {
        match self {
            Error::AtLevel { level, .. } => Some(*level),
            Error::InStage { source, .. } => source.level(),
            _ => None,
        }
    }

    /// Pipeline stage that failed, if recorded.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::InStage { stage, .. } => Some(stage),
            Error::AtLevel { source, .. } => source.stage(),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The innermost error, with level context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } | Error::InStage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            Error::InvalidArgument(_) | Error::InvalidSchedule(_) => ErrorKind::Usage,
            Error::InvalidData(_)
            | Error::InfeasibleMeasures { .. }
            | Error::Format(_)
            | Error::Io { .. }
            | Error::Image { .. } => ErrorKind::Data,
            Error::InvalidGraph(_) | Error::NumericalFailure(_) => ErrorKind::Numerical,
            Error::AtLevel { .. } | Error::InStage { .. } => {
                unreachable!("root() strips context")
            }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
