//! Local directory backend with GACL enforcement.
//!
//! Access depends only on the caller's grid credentials and the control
//! files in the tree, never on the local account running the process.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::UNIX_EPOCH;

use gridsite_core::gacl::{
    acl_for_directory, acl_for_path, evaluate, file_control_path, is_control_file_name, DnListSource,
    ResolveError, ResolvedAcl,
};
use gridsite_core::{Acl, CredentialSet, Permission};

use crate::backend::{Backend, Capabilities, FileKind, FileMeta};
use crate::error::VfsError;

/// Directory holding archived versions beside the documents they belong to.
pub const HISTORY_DIR: &str = ".gridsite-history";

const TEMP_PREFIX: &str = ".gridsite-tmp-";

/// Names never listed or addressable through the filesystem interface.
pub fn is_reserved_name(name: &str) -> bool {
    is_control_file_name(name) || name.starts_with(".gridsite-")
}

/// True when any component of `rel` is reserved.
pub fn touches_reserved(rel: &str) -> bool {
    rel.split('/').any(is_reserved_name)
}

/// Writes `data` to `path` via a temporary file in the same directory and a
/// rename, so readers see the old or the new content and nothing in between.
pub fn atomic_write(path: &Path, data: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!("{TEMP_PREFIX}{}", uuid::Uuid::new_v4().simple()));
    let result = (|| {
        let mut f = OpenOptions::new().write(true).create_new(true).open(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn file_meta(name: String, md: &fs::Metadata) -> FileMeta {
    let modified = md
        .modified()
        .ok()
        .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
        .map_or(0, |d| d.as_secs());
    let kind = if md.is_dir() {
        FileKind::Directory
    } else {
        FileKind::File
    };
    FileMeta {
        name,
        kind,
        size: if md.is_dir() { 0 } else { md.len() },
        modified,
    }
}

/// Entries of `dir` without control files, history or temporaries, sorted by name.
pub fn list_visible(dir: &Path) -> io::Result<Vec<FileMeta>> {
    let mut out = Vec::new();
    for ent in fs::read_dir(dir)? {
        let ent = ent?;
        let Ok(name) = ent.file_name().into_string() else {
            continue;
        };
        if is_reserved_name(&name) {
            continue;
        }
        // entries may vanish between readdir and stat
        if let Ok(md) = ent.metadata() {
            out.push(file_meta(name, &md));
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Whether a directory holds nothing but control files.
pub fn is_effectively_empty(dir: &Path) -> io::Result<bool> {
    for ent in fs::read_dir(dir)? {
        let name = ent?.file_name();
        if !name.to_str().is_some_and(is_control_file_name) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Removes an effectively empty directory together with its control files.
pub fn remove_empty_dir(dir: &Path) -> io::Result<()> {
    if !is_effectively_empty(dir)? {
        return Err(io::ErrorKind::DirectoryNotEmpty.into());
    }
    for ent in fs::read_dir(dir)? {
        fs::remove_file(ent?.path())?;
    }
    fs::remove_dir(dir)
}

pub fn parent_of(rel: &str) -> &str {
    rel.rsplit_once('/').map_or("", |(p, _)| p)
}

pub struct LocalBackend {
    root: PathBuf,
    default_acl: Acl,
    dn_lists: Arc<dyn DnListSource>,
}

impl LocalBackend {
    pub fn new(root: impl Into<PathBuf>, default_acl: Acl, dn_lists: Arc<dyn DnListSource>) -> Self {
        LocalBackend {
            root: root.into(),
            default_acl,
            dn_lists,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn full(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn guard(rel: &str) -> Result<(), VfsError> {
        if touches_reserved(rel) {
            return Err(VfsError::Forbidden);
        }
        Ok(())
    }

    fn require(
        &self,
        who: &CredentialSet,
        resolved: Result<ResolvedAcl, ResolveError>,
        any_of: &[Permission],
    ) -> Result<(), VfsError> {
        let acl = match resolved {
            Ok(r) => r.acl,
            Err(ResolveError::AclParse { control_file, error }) => {
                tracing::warn!(control_file = %control_file.display(), %error, "unparsable control file; denying");
                return Err(VfsError::Forbidden);
            }
            Err(ResolveError::InvalidPath(p)) => return Err(VfsError::InvalidPath(p.display().to_string())),
            Err(ResolveError::Io { source, .. }) => return Err(VfsError::Io(source)),
        };
        let granted = evaluate(&acl, who, self.dn_lists.as_ref());
        if any_of.iter().any(|p| granted.contains(*p)) {
            Ok(())
        } else {
            Err(VfsError::Forbidden)
        }
    }

    fn path_acl(&self, rel: &str) -> Result<ResolvedAcl, ResolveError> {
        acl_for_path(&self.root, Path::new(rel), &self.default_acl)
    }

    fn dir_acl(&self, rel_dir: &str) -> Result<ResolvedAcl, ResolveError> {
        acl_for_directory(&self.root, Path::new(rel_dir), &self.default_acl)
    }
}

impl Backend for LocalBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn read(&self, who: &CredentialSet, rel: &str) -> Result<Vec<u8>, VfsError> {
        Self::guard(rel)?;
        self.require(who, self.path_acl(rel), &[Permission::Read])?;
        let full = self.full(rel);
        if full.is_dir() {
            return Err(VfsError::IsADirectory);
        }
        fs::read(full).map_err(VfsError::from_io)
    }

    /// Overwrites need Write on the file's own effective ACL; creation needs
    /// Write on the containing directory's.
    fn write(&self, who: &CredentialSet, rel: &str, data: &[u8]) -> Result<(), VfsError> {
        Self::guard(rel)?;
        if rel.is_empty() {
            return Err(VfsError::IsADirectory);
        }
        let full = self.full(rel);
        let acl = if full.exists() {
            self.path_acl(rel)
        } else {
            self.dir_acl(parent_of(rel))
        };
        self.require(who, acl, &[Permission::Write])?;
        if full.is_dir() {
            return Err(VfsError::IsADirectory);
        }
        match full.parent().map(fs::metadata) {
            Some(Ok(md)) if md.is_dir() => {}
            Some(Ok(_)) => return Err(VfsError::NotADirectory),
            _ => return Err(VfsError::NotFound),
        }
        atomic_write(&full, data).map_err(VfsError::from_io)
    }

    fn list(&self, who: &CredentialSet, rel: &str) -> Result<Vec<FileMeta>, VfsError> {
        Self::guard(rel)?;
        self.require(who, self.dir_acl(rel), &[Permission::List])?;
        list_visible(&self.full(rel)).map_err(VfsError::from_io)
    }

    /// Files need Write on their own effective ACL, so a per-file override
    /// also guards deletion; directories need Write on the parent. A file's
    /// control file goes with it, and directories must be empty apart from
    /// control files.
    fn remove(&self, who: &CredentialSet, rel: &str) -> Result<(), VfsError> {
        Self::guard(rel)?;
        if rel.is_empty() {
            return Err(VfsError::Forbidden);
        }
        let full = self.full(rel);
        let acl = if full.is_dir() {
            self.dir_acl(parent_of(rel))
        } else {
            self.path_acl(rel)
        };
        self.require(who, acl, &[Permission::Write])?;
        let md = fs::symlink_metadata(&full).map_err(VfsError::from_io)?;
        if md.is_dir() {
            remove_empty_dir(&full).map_err(VfsError::from_io)
        } else {
            fs::remove_file(&full).map_err(VfsError::from_io)?;
            if let Some(control) = file_control_path(Path::new(rel)) {
                match fs::remove_file(self.root.join(control)) {
                    Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(VfsError::Io(e)),
                    _ => {}
                }
            }
            Ok(())
        }
    }

    fn mkdir(&self, who: &CredentialSet, rel: &str) -> Result<(), VfsError> {
        Self::guard(rel)?;
        if rel.is_empty() {
            return Err(VfsError::AlreadyExists);
        }
        self.require(who, self.dir_acl(parent_of(rel)), &[Permission::Write])?;
        fs::create_dir(self.full(rel)).map_err(VfsError::from_io)
    }

    fn stat(&self, who: &CredentialSet, rel: &str) -> Result<FileMeta, VfsError> {
        Self::guard(rel)?;
        self.require(who, self.path_acl(rel), &[Permission::Read, Permission::List])?;
        let full = self.full(rel);
        let md = fs::metadata(&full).map_err(VfsError::from_io)?;
        let name = rel.rsplit('/').next().unwrap_or_default().to_string();
        Ok(file_meta(name, &md))
    }
}
