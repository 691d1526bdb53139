//! Remote backend over HTTP or HTTPS.
//!
//! GET reads and HEAD stats. PUT and DELETE are only offered when the mount
//! is configured writable. Remote listing has no agreed wire format, so it
//! stays unsupported.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, UNIX_EPOCH};

use gridsite_core::gacl::{parse_dn_list, DnListSource, DnListUnavailable, FsDnLists};
use gridsite_core::CredentialSet;
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use reqwest::blocking::{Client, Response};
use reqwest::header::{CONTENT_LENGTH, LAST_MODIFIED};
use reqwest::{Certificate, Identity, StatusCode};

use crate::backend::{Backend, Capabilities, FileKind, FileMeta};
use crate::error::VfsError;

/// Path segment characters left unescaped (RFC 3986 unreserved).
const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

/// TLS and capability settings for a remote mount.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HttpOptions {
    /// PEM file holding a client certificate and its private key.
    pub credential: Option<PathBuf>,
    /// PEM bundle of trust anchors replacing the system roots.
    pub ca: Option<PathBuf>,
    pub writable: bool,
    pub timeout: Option<Duration>,
}

fn read_pem(path: &Path) -> Result<Vec<u8>, VfsError> {
    fs::read(path).map_err(|e| VfsError::Config(format!("{}: {e}", path.display())))
}

/// Builds a blocking client that presents the configured identity.
pub fn build_client(opts: &HttpOptions) -> Result<Client, VfsError> {
    let mut b = Client::builder().timeout(opts.timeout.unwrap_or(Duration::from_secs(30)));
    if let Some(ca) = &opts.ca {
        let certs = Certificate::from_pem_bundle(&read_pem(ca)?)
            .map_err(|e| VfsError::Config(format!("{}: {e}", ca.display())))?;
        b = b.tls_certs_only(certs);
    }
    if let Some(cred) = &opts.credential {
        let id = Identity::from_pem(&read_pem(cred)?)
            .map_err(|e| VfsError::Config(format!("{}: {e}", cred.display())))?;
        b = b.identity(id);
    }
    b.build().map_err(|e| VfsError::Config(e.to_string()))
}

pub struct HttpBackend {
    base: String,
    client: Client,
    writable: bool,
}

impl HttpBackend {
    pub fn new(base_url: &str, opts: &HttpOptions) -> Result<Self, VfsError> {
        if !(base_url.starts_with("http://") || base_url.starts_with("https://")) {
            return Err(VfsError::Config(format!("not an http(s) URL: {base_url}")));
        }
        Ok(HttpBackend {
            base: base_url.trim_end_matches('/').to_string(),
            client: build_client(opts)?,
            writable: opts.writable,
        })
    }

    pub fn url_for(&self, rel: &str) -> String {
        let mut url = self.base.clone();
        for seg in rel.split('/').filter(|s| !s.is_empty()) {
            url.push('/');
            url.extend(utf8_percent_encode(seg, SEGMENT));
        }
        if rel.is_empty() {
            url.push('/');
        }
        url
    }

    fn send(&self, req: reqwest::blocking::RequestBuilder) -> Result<Response, VfsError> {
        let resp = req.send().map_err(|e| VfsError::Backend {
            status: None,
            message: e.to_string(),
        })?;
        check_status(resp)
    }
}

fn check_status(resp: Response) -> Result<Response, VfsError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    Err(match status {
        StatusCode::NOT_FOUND | StatusCode::GONE => VfsError::NotFound,
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => VfsError::Forbidden,
        s => VfsError::Backend {
            status: Some(s.as_u16()),
            message: s.canonical_reason().unwrap_or("unexpected status").to_string(),
        },
    })
}

impl Backend for HttpBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            read: true,
            stat: true,
            write: self.writable,
            remove: self.writable,
            ..Default::default()
        }
    }

    /// The local credentials are not forwarded: the remote side sees only
    /// the TLS identity configured for the mount.
    fn read(&self, _who: &CredentialSet, rel: &str) -> Result<Vec<u8>, VfsError> {
        let resp = self.send(self.client.get(self.url_for(rel)))?;
        resp.bytes().map(|b| b.to_vec()).map_err(|e| VfsError::Backend {
            status: None,
            message: e.to_string(),
        })
    }

    fn write(&self, _who: &CredentialSet, rel: &str, data: &[u8]) -> Result<(), VfsError> {
        self.send(self.client.put(self.url_for(rel)).body(data.to_vec()))?;
        Ok(())
    }

    fn remove(&self, _who: &CredentialSet, rel: &str) -> Result<(), VfsError> {
        self.send(self.client.delete(self.url_for(rel)))?;
        Ok(())
    }

    fn stat(&self, _who: &CredentialSet, rel: &str) -> Result<FileMeta, VfsError> {
        let resp = self.send(self.client.head(self.url_for(rel)))?;
        let h = resp.headers();
        let size = h
            .get(CONTENT_LENGTH)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
            .unwrap_or(0);
        let modified = h
            .get(LAST_MODIFIED)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| httpdate::parse_http_date(v).ok())
            .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
            .map_or(0, |d| d.as_secs());
        Ok(FileMeta {
            name: rel.rsplit('/').next().unwrap_or_default().to_string(),
            kind: FileKind::File,
            size,
            modified,
        })
    }
}

/// Resolves dn-list locations that are either URLs or files.
pub struct DnListFetcher {
    client: Client,
    files: FsDnLists,
}

impl DnListFetcher {
    pub fn new(opts: &HttpOptions, files: FsDnLists) -> Result<Self, VfsError> {
        Ok(DnListFetcher {
            client: build_client(opts)?,
            files,
        })
    }
}

impl DnListSource for DnListFetcher {
    fn fetch(&self, location: &str) -> Result<Vec<String>, DnListUnavailable> {
        if !(location.starts_with("http://") || location.starts_with("https://")) {
            return self.files.fetch(location);
        }
        let fail = |reason: String| DnListUnavailable::new(location, reason);
        let resp = self
            .client
            .get(location)
            .send()
            .map_err(|e| fail(e.to_string()))?;
        let resp = check_status(resp).map_err(|e| fail(e.to_string()))?;
        let text = resp.text().map_err(|e| fail(e.to_string()))?;
        Ok(parse_dn_list(&text))
    }
}
