//! Finding the control file that governs a path in an exported tree.
//!
//! The nearest control file wins outright: a per-file `.gacl-<name>` beside
//! the target, else `.gacl` in the target's directory, else `.gacl` in each
//! ancestor up to the export root, else the configured default.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;

use super::acl::Acl;
use super::xml::{parse_acl, AclParseError};

pub const DIR_CONTROL_FILE: &str = ".gacl";
pub const FILE_CONTROL_PREFIX: &str = ".gacl-";

/// Names that are ACL control files and never appear in listings.
pub fn is_control_file_name(name: &str) -> bool {
    name.starts_with(DIR_CONTROL_FILE)
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("path {0:?} is not a normalized relative path")]
    InvalidPath(PathBuf),
    #[error("control file {control_file:?} does not parse: {error}")]
    AclParse {
        control_file: PathBuf,
        error: AclParseError,
    },
    #[error("reading {path:?}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Which file supplied an effective ACL. Paths are relative to the export root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AclSource {
    PerFile(PathBuf),
    Directory(PathBuf),
    Default,
}

impl AclSource {
    pub fn control_file(&self) -> Option<&Path> {
        match self {
            AclSource::PerFile(p) | AclSource::Directory(p) => Some(p),
            AclSource::Default => None,
        }
    }
}

impl fmt::Display for AclSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.control_file() {
            Some(p) => write!(f, "/{}", p.display()),
            None => f.write_str("default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedAcl {
    pub acl: Acl,
    pub source: AclSource,
}

/// Checks that `rel` has only normal components and returns it cleaned of
/// `.` segments and leading separators.
pub fn normalized_relative(rel: &Path) -> Result<PathBuf, ResolveError> {
    let mut out = PathBuf::new();
    for c in rel.components() {
        match c {
            Component::Normal(part) => out.push(part),
            Component::CurDir | Component::RootDir => {}
            _ => return Err(ResolveError::InvalidPath(rel.to_path_buf())),
        }
    }
    Ok(out)
}

/// Per-file control file path (relative) for a file target.
pub fn file_control_path(rel_file: &Path) -> Option<PathBuf> {
    let name = rel_file.file_name()?.to_str()?;
    let parent = rel_file.parent().unwrap_or(Path::new(""));
    Some(parent.join(format!("{FILE_CONTROL_PREFIX}{name}")))
}

pub fn dir_control_path(rel_dir: &Path) -> PathBuf {
    rel_dir.join(DIR_CONTROL_FILE)
}

fn load(export_root: &Path, rel: &Path) -> Result<Option<Acl>, ResolveError> {
    let full = export_root.join(rel);
    match fs::read_to_string(&full) {
        Ok(text) => parse_acl(&text)
            .map(Some)
            .map_err(|error| ResolveError::AclParse {
                control_file: rel.to_path_buf(),
                error,
            }),
        // a directory named like a control file is not a control file
        Err(e)
            if matches!(
                e.kind(),
                io::ErrorKind::NotFound | io::ErrorKind::NotADirectory | io::ErrorKind::IsADirectory
            ) =>
        {
            Ok(None)
        }
        Err(source) => Err(ResolveError::Io { path: full, source }),
    }
}

/// Effective ACL of a directory: its own `.gacl`, then ancestors, then default.
pub fn acl_for_directory(
    export_root: &Path,
    rel_dir: &Path,
    default_acl: &Acl,
) -> Result<ResolvedAcl, ResolveError> {
    let rel_dir = normalized_relative(rel_dir)?;
    let mut dir = Some(rel_dir.as_path());
    while let Some(d) = dir {
        let control = dir_control_path(d);
        if let Some(acl) = load(export_root, &control)? {
            return Ok(ResolvedAcl {
                acl,
                source: AclSource::Directory(control),
            });
        }
        dir = d.parent();
    }
    Ok(ResolvedAcl {
        acl: default_acl.clone(),
        source: AclSource::Default,
    })
}

/// Effective ACL of `rel_path`, which may name a file, a directory, or
/// nothing yet. Directories resolve from their own `.gacl`; anything else
/// consults its per-file control file first, then its parent directory.
pub fn acl_for_path(
    export_root: &Path,
    rel_path: &Path,
    default_acl: &Acl,
) -> Result<ResolvedAcl, ResolveError> {
    let rel = normalized_relative(rel_path)?;
    if rel.as_os_str().is_empty() || export_root.join(&rel).is_dir() {
        return acl_for_directory(export_root, &rel, default_acl);
    }
    if let Some(control) = file_control_path(&rel) {
        if let Some(acl) = load(export_root, &control)? {
            return Ok(ResolvedAcl {
                acl,
                source: AclSource::PerFile(control),
            });
        }
    }
    acl_for_directory(export_root, rel.parent().unwrap_or(Path::new("")), default_acl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gacl::permission::{Permission, PermissionSet};
    use crate::gacl::xml::serialize_acl;

    fn read_only() -> Acl {
        Acl::any_user(PermissionSet::of(&[Permission::Read]))
    }

    fn write_acl(path: &Path, acl: &Acl) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, serialize_acl(acl)).unwrap();
    }

    #[test]
    fn falls_back_to_default() {
        let root = tempfile::tempdir().unwrap();
        let r = acl_for_path(root.path(), Path::new("x.txt"), &Acl::deny_all()).unwrap();
        assert_eq!(r.acl, Acl::deny_all());
        assert_eq!(r.source, AclSource::Default);
    }

    #[test]
    fn per_file_beats_directory() {
        let root = tempfile::tempdir().unwrap();
        let per_file = Acl::any_user(PermissionSet::ALL);
        write_acl(&root.path().join(".gacl-report.txt"), &per_file);
        write_acl(&root.path().join(".gacl"), &read_only());
        fs::write(root.path().join("report.txt"), "r").unwrap();
        let r = acl_for_path(root.path(), Path::new("report.txt"), &Acl::deny_all()).unwrap();
        assert_eq!(r.acl, per_file);
        assert_eq!(r.source, AclSource::PerFile(".gacl-report.txt".into()));
    }

    #[test]
    fn root_control_applies_to_deep_paths() {
        let root = tempfile::tempdir().unwrap();
        write_acl(&root.path().join(".gacl"), &read_only());
        fs::create_dir_all(root.path().join("a/b")).unwrap();
        let r = acl_for_path(root.path(), Path::new("a/b/c.txt"), &Acl::deny_all()).unwrap();
        assert_eq!(r.acl, read_only());
        assert_eq!(r.source, AclSource::Directory(".gacl".into()));
    }

    #[test]
    fn directory_uses_its_own_control_file() {
        let root = tempfile::tempdir().unwrap();
        write_acl(&root.path().join("d/.gacl"), &read_only());
        let r = acl_for_path(root.path(), Path::new("d"), &Acl::deny_all()).unwrap();
        assert_eq!(r.source, AclSource::Directory("d/.gacl".into()));
    }

    #[test]
    fn broken_control_file_is_an_error() {
        let root = tempfile::tempdir().unwrap();
        fs::write(root.path().join(".gacl"), "<gacl><oops/></gacl>").unwrap();
        let err = acl_for_path(root.path(), Path::new("f"), &Acl::deny_all()).unwrap_err();
        assert!(matches!(err, ResolveError::AclParse { .. }));
    }

    #[test]
    fn traversal_rejected() {
        let root = tempfile::tempdir().unwrap();
        let err = acl_for_path(root.path(), Path::new("a/../b"), &Acl::deny_all()).unwrap_err();
        assert!(matches!(err, ResolveError::InvalidPath(_)));
    }

    #[test]
    fn missing_intermediate_directories_walk_up() {
        let root = tempfile::tempdir().unwrap();
        write_acl(&root.path().join("a/.gacl"), &read_only());
        let r = acl_for_path(root.path(), Path::new("a/x/y/z.txt"), &Acl::deny_all()).unwrap();
        assert_eq!(r.source, AclSource::Directory("a/.gacl".into()));
    }
}
