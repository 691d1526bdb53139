use std::fmt;

use gridsite_core::CredentialSet;
use serde::Serialize;

use crate::error::VfsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    File,
    Directory,
}

/// One directory entry. `modified` is seconds since the epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileMeta {
    pub name: String,
    pub kind: FileKind,
    pub size: u64,
    pub modified: u64,
}

/// Operations a backend supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub read: bool,
    pub write: bool,
    pub list: bool,
    pub remove: bool,
    pub mkdir: bool,
    pub stat: bool,
}

impl Capabilities {
    pub const ALL: Capabilities = Capabilities {
        read: true,
        write: true,
        list: true,
        remove: true,
        mkdir: true,
        stat: true,
    };

    pub fn supports(&self, op: Op) -> bool {
        match op {
            Op::Read => self.read,
            Op::Write => self.write,
            Op::List => self.list,
            Op::Remove => self.remove,
            Op::Mkdir => self.mkdir,
            Op::Stat => self.stat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Read,
    Write,
    List,
    Remove,
    Mkdir,
    Stat,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Read => "read",
            Op::Write => "write",
            Op::List => "list",
            Op::Remove => "remove",
            Op::Mkdir => "mkdir",
            Op::Stat => "stat",
        })
    }
}

/// A filesystem type plugged in under a mount prefix.
///
/// Paths are relative to the mount point, `/`-separated, already normalized,
/// and empty for the mount root. Authorization is the backend's business:
/// each call carries the caller's credentials.
pub trait Backend: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    fn read(&self, _who: &CredentialSet, _rel: &str) -> Result<Vec<u8>, VfsError> {
        Err(VfsError::Unsupported(Op::Read))
    }

    fn write(&self, _who: &CredentialSet, _rel: &str, _data: &[u8]) -> Result<(), VfsError> {
        Err(VfsError::Unsupported(Op::Write))
    }

    fn list(&self, _who: &CredentialSet, _rel: &str) -> Result<Vec<FileMeta>, VfsError> {
        Err(VfsError::Unsupported(Op::List))
    }

    fn remove(&self, _who: &CredentialSet, _rel: &str) -> Result<(), VfsError> {
        Err(VfsError::Unsupported(Op::Remove))
    }

    fn mkdir(&self, _who: &CredentialSet, _rel: &str) -> Result<(), VfsError> {
        Err(VfsError::Unsupported(Op::Mkdir))
    }

    fn stat(&self, _who: &CredentialSet, _rel: &str) -> Result<FileMeta, VfsError> {
        Err(VfsError::Unsupported(Op::Stat))
    }
}
