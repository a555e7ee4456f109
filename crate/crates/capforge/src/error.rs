use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the captioning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error{}: {msg}", fmt_location(.path, .line))]
    Parse {
        path: Option<PathBuf>,
        line: Option<usize>,
        msg: String,
    },

    #[error("inconsistent annotation width for image `{image_id}`: expected {expected}, found {found}")]
    InconsistentWidth {
        image_id: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },

    #[error("no bounding boxes supplied; at least one object row is required")]
    EmptyBoxes,

    #[error("bounding box has no pixels after clipping to image bounds")]
    EmptyCrop,

    #[error("object and localization feature widths differ: {obj_dim} vs {loc_dim}")]
    ExtractorWidthMismatch { obj_dim: usize, loc_dim: usize },

    #[error("unsupported file version: expected `{expected}`, found `{found}`")]
    VersionMismatch { expected: String, found: String },

    #[error("file truncated while reading {context}")]
    Truncated { context: String },

    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("non-finite gradient in tensor `{name}`; training halted")]
    NonFiniteGradient { name: String },

    #[error("unknown config key `{key}`")]
    UnknownConfigKey { key: String },

    #[error("invalid config value for `{key}`: {msg}")]
    InvalidConfigValue { key: String, msg: String },

    #[error("evaluation corpus too small: {size} item(s), need at least {min}")]
    CorpusTooSmall { size: usize, min: usize },

    #[error("annotation references unknown image id `{image_id}`")]
    UnknownImageId { image_id: String },
}

fn fmt_location(path: &Option<PathBuf>, line: &Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!(" at {}:{l}", p.display()),
        (Some(p), None) => format!(" at {}", p.display()),
        (None, Some(l)) => format!(" at line {l}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn parse_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line: Some(line),
            msg: msg.into(),
        }
    }

    /// Attaches a file path to parse-style errors that were produced without one.
    pub fn with_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: Some(path.into()),
                line,
                msg,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
