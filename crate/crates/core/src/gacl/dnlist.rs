//! DN list files: the group credential.
//!
//! Format: one DN per line; blank lines and lines beginning with `#` are
//! ignored; trailing whitespace is trimmed.

use std::fs;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dn-list {location:?} unavailable: {reason}")]
pub struct DnListUnavailable {
    pub location: String,
    pub reason: String,
}

impl DnListUnavailable {
    pub fn new(location: &str, reason: impl ToString) -> Self {
        DnListUnavailable {
            location: location.to_string(),
            reason: reason.to_string(),
        }
    }
}

pub fn parse_dn_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Fetches the member DNs of a dn-list credential.
///
/// Implementations must be safe to call from concurrent request handlers.
pub trait DnListSource: Send + Sync {
    fn fetch(&self, location: &str) -> Result<Vec<String>, DnListUnavailable>;
}

impl<F> DnListSource for F
where
    F: Fn(&str) -> Result<Vec<String>, DnListUnavailable> + Send + Sync,
{
    fn fetch(&self, location: &str) -> Result<Vec<String>, DnListUnavailable> {
        self(location)
    }
}

/// A source that resolves nothing; every dn-list credential is a non-match.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDnLists;

impl DnListSource for NoDnLists {
    fn fetch(&self, location: &str) -> Result<Vec<String>, DnListUnavailable> {
        Err(DnListUnavailable::new(location, "no dn-list source configured"))
    }
}

/// Reads dn-list files from the local filesystem.
///
/// With a root, locations are interpreted as paths inside that tree
/// (`/groups/atlas.txt` reads `<root>/groups/atlas.txt`), which is how a
/// served tree refers to its own group files.
#[derive(Debug, Clone, Default)]
pub struct FsDnLists {
    root: Option<PathBuf>,
}

impl FsDnLists {
    pub fn new() -> Self {
        FsDnLists { root: None }
    }

    pub fn rooted(root: impl Into<PathBuf>) -> Self {
        FsDnLists {
            root: Some(root.into()),
        }
    }

    fn path_for(&self, location: &str) -> Result<PathBuf, DnListUnavailable> {
        let Some(root) = &self.root else {
            return Ok(PathBuf::from(location));
        };
        let rel = Path::new(location.trim_start_matches('/'));
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            return Err(DnListUnavailable::new(location, "path escapes the served tree"));
        }
        Ok(root.join(rel))
    }
}

impl DnListSource for FsDnLists {
    fn fetch(&self, location: &str) -> Result<Vec<String>, DnListUnavailable> {
        let path = self.path_for(location)?;
        let text = fs::read_to_string(&path).map_err(|e| DnListUnavailable::new(location, e))?;
        Ok(parse_dn_list(&text))
    }
}
