//! Archived versions kept in a `.gridsite-history` directory beside each
//! document: `<name>.<epoch>.<seq>` holds the bytes, `<same>.meta` the
//! author DN and timestamp, one per line.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use gridsite_vfs::local::{atomic_write, HISTORY_DIR};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VersionRecord {
    /// `<epoch>.<seq>`, the value accepted by `?version=`.
    pub version: String,
    pub timestamp: u64,
    pub sequence: u64,
    pub author: Option<String>,
    pub size: u64,
    #[serde(skip)]
    pub archived_path: PathBuf,
}

pub fn history_dir(doc: &Path) -> PathBuf {
    doc.parent().unwrap_or(Path::new("")).join(HISTORY_DIR)
}

fn doc_name(doc: &Path) -> &str {
    doc.file_name().and_then(|n| n.to_str()).unwrap_or_default()
}

/// Splits `<name>.<epoch>.<seq>` from the right.
fn parse_entry(file: &str) -> Option<(&str, u64, u64)> {
    let mut it = file.rsplitn(3, '.');
    let seq = it.next()?.parse().ok()?;
    let ts = it.next()?.parse().ok()?;
    Some((it.next()?, ts, seq))
}

/// Versions of `doc`, oldest first.
pub fn records(doc: &Path) -> io::Result<Vec<VersionRecord>> {
    let dir = history_dir(doc);
    let name = doc_name(doc);
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if matches!(e.kind(), io::ErrorKind::NotFound | io::ErrorKind::NotADirectory) => {
            return Ok(Vec::new())
        }
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for ent in entries {
        let ent = ent?;
        let Ok(file) = ent.file_name().into_string() else {
            continue;
        };
        if file.ends_with(".meta") {
            continue;
        }
        let Some((n, timestamp, sequence)) = parse_entry(&file) else {
            continue;
        };
        if n != name {
            continue;
        }
        let archived_path = ent.path();
        let meta = fs::read_to_string(dir.join(format!("{file}.meta"))).unwrap_or_default();
        let author = meta.lines().next().filter(|l| !l.is_empty()).map(str::to_string);
        out.push(VersionRecord {
            version: format!("{timestamp}.{sequence}"),
            timestamp,
            sequence,
            author,
            size: ent.metadata()?.len(),
            archived_path,
        });
    }
    out.sort_by_key(|r| (r.timestamp, r.sequence));
    Ok(out)
}

/// Copies the current content of `doc` into its history.
///
/// The caller must hold the per-path lock. Timestamps never go backwards and
/// sequence numbers always grow, so `(timestamp, sequence)` strictly
/// increases. A failed archive leaves no partial record behind.
pub fn archive(doc: &Path, author: Option<&str>, now: u64) -> io::Result<VersionRecord> {
    let content = fs::read(doc)?;
    let existing = records(doc)?;
    let (timestamp, sequence) = match existing.last() {
        Some(last) => (now.max(last.timestamp), last.sequence + 1),
        None => (now, 1),
    };
    let dir = history_dir(doc);
    match fs::create_dir(&dir) {
        Err(e) if e.kind() != io::ErrorKind::AlreadyExists => return Err(e),
        _ => {}
    }
    let file = format!("{}.{timestamp}.{sequence}", doc_name(doc));
    let archived_path = dir.join(&file);
    let meta_path = dir.join(format!("{file}.meta"));
    atomic_write(&archived_path, &content)?;
    let meta = format!("{}\n{timestamp}\n", author.unwrap_or_default());
    if let Err(e) = atomic_write(&meta_path, meta.as_bytes()) {
        let _ = fs::remove_file(&archived_path);
        return Err(e);
    }
    Ok(VersionRecord {
        version: format!("{timestamp}.{sequence}"),
        timestamp,
        sequence,
        author: author.map(str::to_string),
        size: content.len() as u64,
        archived_path,
    })
}

/// Looks up one version by its `<epoch>.<seq>` label.
pub fn find(doc: &Path, version: &str) -> io::Result<Option<VersionRecord>> {
    Ok(records(doc)?.into_iter().find(|r| r.version == version))
}
