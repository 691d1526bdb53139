//! Request handling against the exported tree.
//!
//! Every response that depends on authorization goes through
//! [`Site::decide`], which evaluates one ACL for the request's identity and
//! reports the outcome to an optional observer.

// Handlers short-circuit with a finished response as the error value.
#![allow(clippy::result_large_err)]

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use gridsite_core::gacl::{
    acl_for_directory, acl_for_path, dir_control_path, evaluate, file_control_path, parse_acl, serialize_acl,
    AclSource, DnListSource, ResolveError, ResolvedAcl,
};
use gridsite_core::{Acl, CredentialSet, Permission, PermissionSet};
use gridsite_vfs::local::{atomic_write, list_visible, parent_of, remove_empty_dir, touches_reserved};
use gridsite_vfs::path::normalize;
use http::header::{ACCEPT, CONTENT_TYPE};
use http::{HeaderValue, Method, Request, Response, StatusCode};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

use crate::history;
use crate::listing;

/// Names the control file that supplied an ACL on `?acl` responses.
pub const ACL_SOURCE_HEADER: &str = "x-gacl-source";

const LOCK_STRIPES: usize = 64;

const PATH_ESCAPE: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'?')
    .add(b'<')
    .add(b'>');

/// Why a decision was taken, for tracing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    ReadFile,
    ListDirectory,
    WriteFile,
    Delete,
    AclAdmin,
    LockOutGuard,
    History,
}

/// One ACL evaluation performed while serving a request.
#[derive(Debug, Clone)]
pub struct Decision {
    pub who: CredentialSet,
    pub source: AclSource,
    pub granted: PermissionSet,
    pub purpose: Purpose,
}

pub trait DecisionObserver: Send + Sync {
    fn decided(&self, decision: &Decision);
}

/// Scope of an ACL written through `?acl=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AclScope {
    File,
    Dir,
}

enum Target {
    Plain,
    Acl(Option<AclScope>),
    History,
    Version(String),
}

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub struct Site {
    root: PathBuf,
    default_acl: Acl,
    dn_lists: Arc<dyn DnListSource>,
    observer: Option<Arc<dyn DecisionObserver>>,
    clock: Clock,
    locks: Box<[Mutex<()>]>,
}

type Reply = Response<Vec<u8>>;

fn reply(status: StatusCode, body: impl Into<Vec<u8>>) -> Reply {
    let mut r = Response::new(body.into());
    *r.status_mut() = status;
    r
}

fn text(status: StatusCode, msg: &str) -> Reply {
    let mut r = reply(status, format!("{msg}\n"));
    r.headers_mut().insert(
        CONTENT_TYPE,
        HeaderValue::from_static("text/plain; charset=utf-8"),
    );
    r
}

fn typed(status: StatusCode, content_type: &str, body: Vec<u8>) -> Reply {
    let mut r = reply(status, body);
    if let Ok(v) = HeaderValue::from_str(content_type) {
        r.headers_mut().insert(CONTENT_TYPE, v);
    }
    r
}

fn forbidden() -> Reply {
    text(StatusCode::FORBIDDEN, "forbidden")
}

fn not_found() -> Reply {
    text(StatusCode::NOT_FOUND, "not found")
}

fn internal(e: impl std::fmt::Display) -> Reply {
    tracing::error!(error = %e, "request failed");
    text(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
}

fn io_reply(e: io::Error) -> Reply {
    match e.kind() {
        io::ErrorKind::NotFound => not_found(),
        io::ErrorKind::DirectoryNotEmpty => text(StatusCode::CONFLICT, "directory not empty"),
        io::ErrorKind::IsADirectory | io::ErrorKind::NotADirectory => text(StatusCode::CONFLICT, "conflict"),
        _ => internal(e),
    }
}

fn parse_target(query: Option<&str>) -> Result<Target, Reply> {
    let bad = || text(StatusCode::BAD_REQUEST, "unsupported query");
    let Some(q) = query.filter(|q| !q.is_empty()) else {
        return Ok(Target::Plain);
    };
    let (key, value) = match q.split_once('=') {
        Some((k, v)) => (k, Some(v)),
        None => (q, None),
    };
    match (key, value) {
        ("acl", None | Some("")) => Ok(Target::Acl(None)),
        ("acl", Some("file")) => Ok(Target::Acl(Some(AclScope::File))),
        ("acl", Some("dir")) => Ok(Target::Acl(Some(AclScope::Dir))),
        ("history", None | Some("")) => Ok(Target::History),
        ("version", Some(v)) if valid_version(v) => Ok(Target::Version(v.to_string())),
        _ => Err(bad()),
    }
}

fn valid_version(v: &str) -> bool {
    v.split_once('.').is_some_and(|(a, b)| {
        !a.is_empty() && !b.is_empty() && a.bytes().chain(b.bytes()).all(|c| c.is_ascii_digit())
    })
}

fn prefers_json(req: &Request<Vec<u8>>) -> bool {
    let accept = req
        .headers()
        .get(ACCEPT)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    accept.contains("application/json") && !accept.contains("text/html")
}

fn now_epoch() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl Site {
    pub fn new(root: impl Into<PathBuf>, default_acl: Acl, dn_lists: Arc<dyn DnListSource>) -> Self {
        Site {
            root: root.into(),
            default_acl,
            dn_lists,
            observer: None,
            clock: Arc::new(now_epoch),
            locks: (0..LOCK_STRIPES).map(|_| Mutex::new(())).collect(),
        }
    }

    #[must_use]
    pub fn with_observer(mut self, observer: Arc<dyn DecisionObserver>) -> Self {
        self.observer = Some(observer);
        self
    }

    /// Replaces the wall clock used to stamp history records.
    #[must_use]
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self, rel: &str) -> std::sync::MutexGuard<'_, ()> {
        let mut h = DefaultHasher::new();
        rel.hash(&mut h);
        let stripe = &self.locks[h.finish() as usize % LOCK_STRIPES];
        stripe.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Evaluates one ACL for `who`. A control file that fails to parse
    /// stands for deny-all.
    fn decide(
        &self,
        who: &CredentialSet,
        resolved: Result<ResolvedAcl, ResolveError>,
        purpose: Purpose,
    ) -> Result<PermissionSet, Reply> {
        let (acl, source) = match resolved {
            Ok(r) => (r.acl, r.source),
            Err(ResolveError::AclParse { control_file, error }) => {
                tracing::warn!(control_file = %control_file.display(), %error, "unparsable control file; denying");
                (Acl::deny_all(), AclSource::Directory(control_file))
            }
            Err(ResolveError::InvalidPath(_)) => return Err(text(StatusCode::BAD_REQUEST, "invalid path")),
            Err(ResolveError::Io { source, .. }) => return Err(internal(source)),
        };
        Ok(self.decide_acl(who, &acl, source, purpose))
    }

    fn decide_acl(
        &self,
        who: &CredentialSet,
        acl: &Acl,
        source: AclSource,
        purpose: Purpose,
    ) -> PermissionSet {
        let granted = evaluate(acl, who, self.dn_lists.as_ref());
        if let Some(obs) = &self.observer {
            obs.decided(&Decision {
                who: who.clone(),
                source,
                granted,
                purpose,
            });
        }
        granted
    }

    fn require(
        &self,
        who: &CredentialSet,
        resolved: Result<ResolvedAcl, ResolveError>,
        purpose: Purpose,
        perm: Permission,
    ) -> Result<(), Reply> {
        if self.decide(who, resolved, purpose)?.contains(perm) {
            Ok(())
        } else {
            Err(forbidden())
        }
    }

    fn path_acl(&self, rel: &str) -> Result<ResolvedAcl, ResolveError> {
        acl_for_path(&self.root, Path::new(rel), &self.default_acl)
    }

    fn dir_acl(&self, rel: &str) -> Result<ResolvedAcl, ResolveError> {
        acl_for_directory(&self.root, Path::new(rel), &self.default_acl)
    }

    fn full(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn is_dir(&self, rel: &str) -> bool {
        rel.is_empty() || self.full(rel).is_dir()
    }

    /// Serves one request for `who`.
    pub fn handle(&self, who: &CredentialSet, req: &Request<Vec<u8>>) -> Reply {
        match self.dispatch(who, req) {
            Ok(r) | Err(r) => r,
        }
    }

    fn dispatch(&self, who: &CredentialSet, req: &Request<Vec<u8>>) -> Result<Reply, Reply> {
        let raw = req.uri().path();
        let decoded = percent_decode_str(raw)
            .decode_utf8()
            .map_err(|_| text(StatusCode::BAD_REQUEST, "path is not UTF-8"))?;
        let parts = normalize(&decoded).map_err(|e| text(StatusCode::BAD_REQUEST, &e.to_string()))?;
        let rel = parts.join("/");
        if touches_reserved(&rel) {
            return Err(forbidden());
        }
        let target = parse_target(req.uri().query())?;
        // HEAD keeps its body here; the HTTP layer sizes the response from
        // it and sends headers only.
        let resp = match (req.method().clone(), target) {
            (Method::GET | Method::HEAD, Target::Plain) => self.get(who, &rel, prefers_json(req)),
            (Method::PUT, Target::Plain) => self.put(who, &rel, req.body()),
            (Method::DELETE, Target::Plain) => self.delete(who, &rel),
            (Method::GET | Method::HEAD, Target::Acl(scope)) => self.acl_get(who, &rel, scope),
            (Method::PUT, Target::Acl(scope)) => self.acl_put(who, &rel, scope, req.body()),
            (Method::GET | Method::HEAD, Target::History) => self.history(who, &rel),
            (Method::GET | Method::HEAD, Target::Version(v)) => self.version(who, &rel, &v),
            _ => Err(text(StatusCode::METHOD_NOT_ALLOWED, "method not allowed")),
        }?;
        Ok(resp)
    }

    /// Files need Read, directories List. Permission is checked before
    /// existence so a 404 never tells a stranger that a name is free.
    fn get(&self, who: &CredentialSet, rel: &str, json: bool) -> Result<Reply, Reply> {
        if self.is_dir(rel) {
            self.require(who, self.dir_acl(rel), Purpose::ListDirectory, Permission::List)?;
            let entries = list_visible(&self.full(rel)).map_err(io_reply)?;
            return Ok(if json {
                let body = serde_json::to_vec(&entries).map_err(internal)?;
                typed(StatusCode::OK, "application/json", body)
            } else {
                let body = listing::html(&format!("/{rel}"), &entries);
                typed(StatusCode::OK, "text/html; charset=utf-8", body.into_bytes())
            });
        }
        self.require(who, self.path_acl(rel), Purpose::ReadFile, Permission::Read)?;
        let bytes = fs::read(self.full(rel)).map_err(io_reply)?;
        Ok(typed(StatusCode::OK, listing::content_type(rel), bytes))
    }

    /// Overwrites need Write on the file's effective ACL and archive the
    /// previous content first; creation needs Write on the directory.
    fn put(&self, who: &CredentialSet, rel: &str, body: &[u8]) -> Result<Reply, Reply> {
        let _guard = self.lock(rel);
        let full = self.full(rel);
        let existing = rel.is_empty() || full.exists();
        let acl = if existing {
            self.path_acl(rel)
        } else {
            self.dir_acl(parent_of(rel))
        };
        self.require(who, acl, Purpose::WriteFile, Permission::Write)?;
        if self.is_dir(rel) {
            return Err(text(StatusCode::CONFLICT, "target is a directory"));
        }
        match full.parent().map(fs::metadata) {
            Some(Ok(md)) if md.is_dir() => {}
            Some(Ok(_)) => return Err(text(StatusCode::CONFLICT, "parent is not a directory")),
            _ => return Err(not_found()),
        }
        if existing {
            history::archive(&full, who.dn(), (self.clock)()).map_err(|e| {
                tracing::error!(error = %e, path = rel, "archiving failed; content left unchanged");
                text(
                    StatusCode::INSUFFICIENT_STORAGE,
                    "could not archive the previous version",
                )
            })?;
        }
        atomic_write(&full, body).map_err(|e| {
            tracing::error!(error = %e, path = rel, "write failed");
            text(StatusCode::INSUFFICIENT_STORAGE, "write failed")
        })?;
        Ok(reply(
            if existing {
                StatusCode::OK
            } else {
                StatusCode::CREATED
            },
            Vec::new(),
        ))
    }

    /// Files need Write on their effective ACL, directories on the parent's.
    /// File content is archived before removal.
    fn delete(&self, who: &CredentialSet, rel: &str) -> Result<Reply, Reply> {
        if rel.is_empty() {
            return Err(text(StatusCode::METHOD_NOT_ALLOWED, "cannot delete the root"));
        }
        let _guard = self.lock(rel);
        let full = self.full(rel);
        let is_dir = full.is_dir();
        let acl = if is_dir {
            self.dir_acl(parent_of(rel))
        } else {
            self.path_acl(rel)
        };
        self.require(who, acl, Purpose::Delete, Permission::Write)?;
        let md = fs::symlink_metadata(&full).map_err(io_reply)?;
        if md.is_dir() {
            remove_empty_dir(&full).map_err(io_reply)?;
        } else {
            history::archive(&full, who.dn(), (self.clock)()).map_err(|_| {
                text(
                    StatusCode::INSUFFICIENT_STORAGE,
                    "could not archive before delete",
                )
            })?;
            fs::remove_file(&full).map_err(io_reply)?;
            if let Some(control) = file_control_path(Path::new(rel)) {
                match fs::remove_file(self.root.join(control)) {
                    Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(internal(e)),
                    _ => {}
                }
            }
        }
        Ok(reply(StatusCode::NO_CONTENT, Vec::new()))
    }

    fn scope_for(&self, rel: &str, requested: Option<AclScope>) -> Result<AclScope, Reply> {
        let is_dir = self.is_dir(rel);
        match (requested, is_dir) {
            (None, true) | (Some(AclScope::Dir), true) => Ok(AclScope::Dir),
            (None, false) | (Some(AclScope::File), false) => Ok(AclScope::File),
            (Some(AclScope::File), true) => Err(text(StatusCode::BAD_REQUEST, "acl=file on a directory")),
            (Some(AclScope::Dir), false) => Err(text(StatusCode::BAD_REQUEST, "acl=dir on a file")),
        }
    }

    /// Reading the policy also needs Admin: it names the members of groups.
    fn acl_get(&self, who: &CredentialSet, rel: &str, scope: Option<AclScope>) -> Result<Reply, Reply> {
        let resolved = self.path_acl(rel);
        let (acl, source) = match &resolved {
            Ok(r) => (r.acl.clone(), r.source.clone()),
            Err(_) => (Acl::deny_all(), AclSource::Default),
        };
        self.require(who, resolved, Purpose::AclAdmin, Permission::Admin)?;
        self.scope_for(rel, scope)?;
        let mut r = typed(
            StatusCode::OK,
            "application/xml",
            serialize_acl(&acl).into_bytes(),
        );
        if let Ok(v) = HeaderValue::from_str(&source.to_string()) {
            r.headers_mut().insert(ACL_SOURCE_HEADER, v);
        }
        Ok(r)
    }

    /// Replaces a control file. The new ACL must leave the caller Admin on
    /// the path, so nobody locks themselves out by accident.
    fn acl_put(
        &self,
        who: &CredentialSet,
        rel: &str,
        scope: Option<AclScope>,
        body: &[u8],
    ) -> Result<Reply, Reply> {
        let _guard = self.lock(rel);
        self.require(who, self.path_acl(rel), Purpose::AclAdmin, Permission::Admin)?;
        let scope = self.scope_for(rel, scope)?;
        let text_body =
            std::str::from_utf8(body).map_err(|_| text(StatusCode::BAD_REQUEST, "ACL is not UTF-8"))?;
        let acl = parse_acl(text_body).map_err(|e| text(StatusCode::BAD_REQUEST, &e.to_string()))?;
        let control = match scope {
            AclScope::Dir => dir_control_path(Path::new(rel)),
            AclScope::File => file_control_path(Path::new(rel))
                .ok_or_else(|| text(StatusCode::BAD_REQUEST, "invalid path"))?,
        };
        let source = match scope {
            AclScope::Dir => AclSource::Directory(control.clone()),
            AclScope::File => AclSource::PerFile(control.clone()),
        };
        if !self.decide_acl(who, &acl, source, Purpose::LockOutGuard).admin {
            return Err(text(
                StatusCode::CONFLICT,
                "the new ACL would remove your Admin permission",
            ));
        }
        let dest = self.root.join(&control);
        if !dest.parent().is_some_and(Path::is_dir) {
            return Err(not_found());
        }
        atomic_write(&dest, serialize_acl(&acl).as_bytes()).map_err(internal)?;
        Ok(typed(
            StatusCode::OK,
            "application/xml",
            serialize_acl(&acl).into_bytes(),
        ))
    }

    fn history(&self, who: &CredentialSet, rel: &str) -> Result<Reply, Reply> {
        self.require(who, self.path_acl(rel), Purpose::History, Permission::Read)?;
        if self.is_dir(rel) {
            return Err(not_found());
        }
        let full = self.full(rel);
        let records = history::records(&full).map_err(internal)?;
        if records.is_empty() && !full.is_file() {
            return Err(not_found());
        }
        let href = format!("/{}", utf8_percent_encode(rel, PATH_ESCAPE));
        let listed: Vec<_> = records
            .iter()
            .map(|r| {
                serde_json::json!({
                    "version": r.version,
                    "timestamp": r.timestamp,
                    "sequence": r.sequence,
                    "author": r.author,
                    "size": r.size,
                    "href": format!("{href}?version={}", r.version),
                })
            })
            .collect();
        let body = serde_json::to_vec(&listed).map_err(internal)?;
        Ok(typed(StatusCode::OK, "application/json", body))
    }

    fn version(&self, who: &CredentialSet, rel: &str, version: &str) -> Result<Reply, Reply> {
        self.require(who, self.path_acl(rel), Purpose::History, Permission::Read)?;
        if self.is_dir(rel) {
            return Err(not_found());
        }
        let record = history::find(&self.full(rel), version)
            .map_err(internal)?
            .ok_or_else(not_found)?;
        let bytes = fs::read(&record.archived_path).map_err(io_reply)?;
        Ok(typed(StatusCode::OK, listing::content_type(rel), bytes))
    }
}
