use std::io;

use thiserror::Error;

use crate::backend::Op;

#[derive(Debug, Error)]
pub enum VfsError {
    #[error("no mount for {0:?}")]
    NoMount(String),
    #[error("path {0:?} escapes the virtual root")]
    PathEscape(String),
    #[error("invalid path {0:?}")]
    InvalidPath(String),
    #[error("forbidden")]
    Forbidden,
    #[error("not found")]
    NotFound,
    #[error("not a directory")]
    NotADirectory,
    #[error("is a directory")]
    IsADirectory,
    #[error("directory not empty")]
    NotEmpty,
    #[error("already exists")]
    AlreadyExists,
    #[error("{0} is not supported by this backend")]
    Unsupported(Op),
    #[error("remote error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Backend { status: Option<u16>, message: String },
    #[error("invalid mount configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl VfsError {
    pub(crate) fn from_io(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::NotFound => VfsError::NotFound,
            io::ErrorKind::NotADirectory => VfsError::NotADirectory,
            io::ErrorKind::IsADirectory => VfsError::IsADirectory,
            io::ErrorKind::DirectoryNotEmpty => VfsError::NotEmpty,
            io::ErrorKind::AlreadyExists => VfsError::AlreadyExists,
            _ => VfsError::Io(e),
        }
    }
}
