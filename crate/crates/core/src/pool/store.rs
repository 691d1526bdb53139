//! File primitives for the pool state directory.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use super::PoolError;

/// Everything except ASCII alphanumerics, `-`, `_` and `=` is escaped, so an
/// encoded DN is always a single safe filename.
const DN_FILENAME: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'=');

const NAME_MAX: usize = 255;

pub(super) fn encode_dn(dn: &str) -> Result<String, PoolError> {
    let enc = utf8_percent_encode(dn, DN_FILENAME).to_string();
    if enc.len() > NAME_MAX {
        return Err(PoolError::DnTooLong(dn.to_string()));
    }
    Ok(enc)
}

pub(super) fn decode_dn(name: &str) -> Option<String> {
    percent_decode_str(name)
        .decode_utf8()
        .ok()
        .map(|s| s.into_owned())
}

pub(super) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PoolError + '_ {
    move |source| PoolError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Holds the state directory's mutation lock until dropped.
pub(super) struct StateLock {
    _file: File,
}

impl StateLock {
    pub(super) fn exclusive(path: &Path) -> Result<Self, PoolError> {
        let file = Self::open(path)?;
        file.lock().map_err(io_err(path))?;
        Ok(StateLock { _file: file })
    }

    pub(super) fn shared(path: &Path) -> Result<Self, PoolError> {
        let file = Self::open(path)?;
        file.lock_shared().map_err(io_err(path))?;
        Ok(StateLock { _file: file })
    }

    fn open(path: &Path) -> Result<File, PoolError> {
        OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(path)
            .map_err(io_err(path))
    }
}

fn write_temp(tmp_dir: &Path, content: &[u8]) -> Result<PathBuf, PoolError> {
    let tmp = tmp_dir.join(format!("{}.tmp", uuid::Uuid::new_v4().simple()));
    let mut f = OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&tmp)
        .map_err(io_err(&tmp))?;
    f.write_all(content).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    Ok(tmp)
}

/// Creates `dest` with `content` only if it does not exist yet. The file
/// appears complete or not at all. Returns `false` when `dest` already existed.
pub(super) fn create_exclusive(
    tmp_dir: &Path,
    dest: &Path,
    content: &[u8],
    fault: &dyn Fn(&str) -> io::Result<()>,
) -> Result<bool, PoolError> {
    let tmp = write_temp(tmp_dir, content)?;
    fault("after-temp-write").map_err(io_err(dest))?;
    let linked = match fs::hard_link(&tmp, dest) {
        Ok(()) => true,
        Err(e) if e.kind() == io::ErrorKind::AlreadyExists => false,
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            return Err(io_err(dest)(e));
        }
    };
    fault("after-link").map_err(io_err(dest))?;
    fs::remove_file(&tmp).map_err(io_err(&tmp))?;
    Ok(linked)
}

/// Replaces `dest` atomically with `content`.
pub(super) fn replace(tmp_dir: &Path, dest: &Path, content: &[u8]) -> Result<(), PoolError> {
    let tmp = write_temp(tmp_dir, content)?;
    fs::rename(&tmp, dest).map_err(io_err(dest))
}

/// `Ok(None)` when the file does not exist.
pub(super) fn read_opt(path: &Path) -> Result<Option<String>, PoolError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

pub(super) fn remove_opt(path: &Path) -> Result<bool, PoolError> {
    match fs::remove_file(path) {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// File names in `dir`, or nothing when it does not exist.
pub(super) fn file_names(dir: &Path) -> Result<Vec<String>, PoolError> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(dir)(e)),
    };
    let mut names = Vec::new();
    for ent in rd {
        let ent = ent.map_err(io_err(dir))?;
        match ent.file_name().into_string() {
            Ok(name) => names.push(name),
            Err(raw) => {
                return Err(PoolError::StateCorrupt(format!(
                    "non UTF-8 name {raw:?} in {}",
                    dir.display()
                )))
            }
        }
    }
    names.sort();
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dn_encoding_is_one_safe_filename() {
        let dn = "/C=UK/O=eScience/OU=Manchester/L=HEP/CN=andrew mcnab";
        let enc = encode_dn(dn).unwrap();
        assert!(!enc.contains('/'));
        assert!(!enc.starts_with('.'));
        assert_eq!(decode_dn(&enc).unwrap(), dn);
        assert_eq!(decode_dn(&encode_dn("..").unwrap()).unwrap(), "..");
        assert_ne!(encode_dn("..").unwrap(), "..");
    }

    #[test]
    fn exclusive_create_refuses_existing() {
        let dir = tempfile::tempdir().unwrap();
        let dest = dir.path().join("f");
        let ok = |_: &str| Ok(());
        assert!(create_exclusive(dir.path(), &dest, b"one", &ok).unwrap());
        assert!(!create_exclusive(dir.path(), &dest, b"two", &ok).unwrap());
        assert_eq!(fs::read_to_string(&dest).unwrap(), "one");
        // temp files are cleaned up
        assert_eq!(file_names(dir.path()).unwrap(), vec!["f"]);
    }
}
