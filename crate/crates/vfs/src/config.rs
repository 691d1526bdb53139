//! `mount` lines of the site configuration.
//!
//! ```text
//! mount /grid/local local /srv/grid
//! mount /grid/web http https://www.example.org/ credential /etc/grid/me.pem ca /etc/grid/ca.pem writable
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use gridsite_core::gacl::DnListSource;
use gridsite_core::Acl;

use crate::error::VfsError;
use crate::http::{HttpBackend, HttpOptions};
use crate::local::LocalBackend;
use crate::mount::MountTable;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Local { root: PathBuf },
    Http { base_url: String, options: HttpOptions },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MountSpec {
    pub prefix: String,
    pub backend: BackendSpec,
}

impl MountSpec {
    /// Parses one `mount <prefix> <type> ...` line.
    pub fn parse(line: &str) -> Result<MountSpec, VfsError> {
        let bad = |msg: &str| VfsError::Config(format!("{msg}: {line:?}"));
        let mut words = line.split_whitespace();
        if words.next() != Some("mount") {
            return Err(bad("expected `mount`"));
        }
        let prefix = words.next().ok_or_else(|| bad("missing prefix"))?;
        if !prefix.starts_with('/') {
            return Err(bad("mount prefix must be absolute"));
        }
        let kind = words.next().ok_or_else(|| bad("missing backend type"))?;
        let target = words.next().ok_or_else(|| bad("missing backend target"))?;
        let backend = match kind {
            "local" => {
                if words.next().is_some() {
                    return Err(bad("local mounts take no options"));
                }
                BackendSpec::Local { root: target.into() }
            }
            "http" => {
                let mut options = HttpOptions::default();
                while let Some(opt) = words.next() {
                    match opt {
                        "credential" => {
                            let f = words.next().ok_or_else(|| bad("credential needs a file"))?;
                            options.credential = Some(f.into());
                        }
                        "ca" => {
                            let f = words.next().ok_or_else(|| bad("ca needs a file"))?;
                            options.ca = Some(f.into());
                        }
                        "writable" => options.writable = true,
                        _ => return Err(bad(&format!("unknown http option {opt:?}"))),
                    }
                }
                BackendSpec::Http {
                    base_url: target.to_string(),
                    options,
                }
            }
            other => return Err(bad(&format!("unknown backend type {other:?}"))),
        };
        Ok(MountSpec {
            prefix: prefix.to_string(),
            backend,
        })
    }
}

/// Instantiates backends for `specs`. Local mounts share the default ACL and
/// dn-list source.
pub fn build_table(
    specs: &[MountSpec],
    default_acl: &Acl,
    dn_lists: Arc<dyn DnListSource>,
) -> Result<MountTable, VfsError> {
    let mut table = MountTable::new();
    for spec in specs {
        table = match &spec.backend {
            BackendSpec::Local { root } => {
                if !root.is_dir() {
                    return Err(VfsError::Config(format!("{} is not a directory", root.display())));
                }
                let b = LocalBackend::new(root.clone(), default_acl.clone(), dn_lists.clone());
                table.mount(&spec.prefix, Arc::new(b))?
            }
            BackendSpec::Http { base_url, options } => {
                table.mount(&spec.prefix, Arc::new(HttpBackend::new(base_url, options)?))?
            }
        };
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_kinds() {
        let l = MountSpec::parse("mount /grid/local local /srv").unwrap();
        assert_eq!(l.backend, BackendSpec::Local { root: "/srv".into() });
        let h = MountSpec::parse("mount /grid/web http https://x/ credential c.pem writable").unwrap();
        let BackendSpec::Http { base_url, options } = h.backend else {
            panic!()
        };
        assert_eq!(base_url, "https://x/");
        assert_eq!(options.credential, Some("c.pem".into()));
        assert!(options.writable && options.ca.is_none());
    }

    #[test]
    fn rejects_garbage() {
        for line in [
            "mount",
            "mount rel local /x",
            "mount /a ftp x",
            "mount /a local /x extra",
            "mount /a http http://x credential",
            "mount /a http http://x bogus",
        ] {
            assert!(MountSpec::parse(line).is_err(), "{line}");
        }
    }
}
