//! An HTTP(S) file service in the GridSite style.
//!
//! Every request is authorized against GACL control files in the exported
//! tree. Overwritten and deleted documents are archived, ACLs are read and
//! replaced through `?acl`, and group membership lives in ordinary dn-list
//! files edited with PUT like any other document.

pub mod config;
pub mod history;
pub mod identity;
mod listing;
pub mod net;
pub mod site;

use std::fs;
use std::io;
use std::sync::Arc;

use gridsite_core::gacl::FsDnLists;
use gridsite_vfs::{DnListFetcher, HttpOptions};

pub use config::{ConfigError, DefaultPolicy, SiteConfig};
pub use identity::{identify, FqanAssertions, IdentityPolicy, IdentitySource, RequestIdentity};
pub use net::{start, ListenerConfig, RunningServer, TlsSettings};
pub use site::{Decision, DecisionObserver, Purpose, Site, ACL_SOURCE_HEADER};

/// Builds the site and listener settings described by `cfg`.
pub fn from_config(cfg: &SiteConfig) -> io::Result<(Site, ListenerConfig)> {
    let root = cfg
        .export_root
        .clone()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "export_root is not set"))?;
    if !root.is_dir() {
        return Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("export_root {} is not a directory", root.display()),
        ));
    }
    let dn_lists = DnListFetcher::new(&HttpOptions::default(), FsDnLists::rooted(&root))
        .map_err(|e| io::Error::other(e.to_string()))?;
    let site = Site::new(root, cfg.default_policy.acl(), Arc::new(dn_lists));
    let fqans = match &cfg.fqan_assertions {
        Some(path) => FqanAssertions::parse(&fs::read_to_string(path)?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?,
        None => FqanAssertions::default(),
    };
    let tls = match (&cfg.tls_cert, &cfg.tls_key) {
        (Some(cert), Some(key)) => Some(TlsSettings {
            cert: cert.clone(),
            key: key.clone(),
            client_ca: cfg.tls_client_ca.clone(),
        }),
        _ => None,
    };
    let listener = ListenerConfig {
        addr: cfg.listen,
        tls,
        identity: IdentityPolicy {
            dev_headers: cfg.dev_identity_headers,
            fqans,
        },
        max_body_bytes: cfg.max_body_bytes,
    };
    Ok((site, listener))
}
