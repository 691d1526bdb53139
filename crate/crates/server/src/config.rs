//! Site configuration: `key=value` lines plus `mount` lines, `#` comments.
//!
//! ```text
//! listen = 0.0.0.0:8443
//! export_root = /srv/grid
//! tls_cert = host.pem
//! tls_key = host.key
//! tls_client_ca = ca.pem
//! default_policy = deny
//! pool_state_dir = /var/lib/gridsite/pool
//! pool_capacity = 50
//! mount /grid/local local /srv/grid
//! ```
//!
//! Relative paths are taken relative to the file's directory by [`SiteConfig::load`].

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use gridsite_core::pool::PoolConfig;
use gridsite_core::{Acl, Permission, PermissionSet};
use gridsite_vfs::{BackendSpec, MountSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("{0}")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DefaultPolicy {
    #[default]
    Deny,
    /// Anyone may read and list where no control file says otherwise.
    AnyUserRead,
}

impl DefaultPolicy {
    pub fn acl(self) -> Acl {
        match self {
            DefaultPolicy::Deny => Acl::deny_all(),
            DefaultPolicy::AnyUserRead => {
                Acl::any_user(PermissionSet::of(&[Permission::Read, Permission::List]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteConfig {
    pub listen: SocketAddr,
    pub export_root: Option<PathBuf>,
    pub tls_cert: Option<PathBuf>,
    pub tls_key: Option<PathBuf>,
    pub tls_client_ca: Option<PathBuf>,
    pub dev_identity_headers: bool,
    pub default_policy: DefaultPolicy,
    /// File of `"<DN>" <fqan>...` lines for certificate-authenticated users.
    pub fqan_assertions: Option<PathBuf>,
    pub max_body_bytes: usize,
    pub pool: Option<PoolConfig>,
    pub mounts: Vec<MountSpec>,
}

impl Default for SiteConfig {
    fn default() -> Self {
        SiteConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8443)),
            export_root: None,
            tls_cert: None,
            tls_key: None,
            tls_client_ca: None,
            dev_identity_headers: false,
            default_policy: DefaultPolicy::Deny,
            fqan_assertions: None,
            max_body_bytes: 256 << 20,
            pool: None,
            mounts: Vec::new(),
        }
    }
}

#[derive(Default)]
struct PoolKeys {
    state_dir: Option<PathBuf>,
    prefix: Option<String>,
    capacity: Option<u32>,
    grace: Option<u64>,
    hook: Option<PathBuf>,
}

impl SiteConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_in(text, Path::new(""))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_in(&text, path.parent().unwrap_or(Path::new("")))
    }

    fn parse_in(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = SiteConfig::default();
        let mut pool = PoolKeys::default();
        let resolve = |v: &str| base.join(v);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let invalid = |message: String| ConfigError::Invalid { line: i + 1, message };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with("mount ") || line == "mount" {
                let mut spec = MountSpec::parse(line).map_err(|e| invalid(e.to_string()))?;
                if let BackendSpec::Local { root } = &mut spec.backend {
                    *root = resolve(&root.to_string_lossy());
                }
                cfg.mounts.push(spec);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| invalid(format!("expected key=value, got {line:?}")))?;
            let number = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| invalid(format!("{key}: not a number: {v:?}")))
            };
            match key {
                "listen" => {
                    cfg.listen = value
                        .parse()
                        .map_err(|_| invalid(format!("listen: bad address {value:?}")))?
                }
                "export_root" => cfg.export_root = Some(resolve(value)),
                "tls_cert" => cfg.tls_cert = Some(resolve(value)),
                "tls_key" => cfg.tls_key = Some(resolve(value)),
                "tls_client_ca" => cfg.tls_client_ca = Some(resolve(value)),
                "fqan_assertions" => cfg.fqan_assertions = Some(resolve(value)),
                "dev_identity_headers" => {
                    cfg.dev_identity_headers = match value {
                        "on" => true,
                        "off" => false,
                        _ => {
                            return Err(invalid(format!(
                                "dev_identity_headers must be on or off, got {value:?}"
                            )))
                        }
                    }
                }
                "default_policy" => {
                    cfg.default_policy = match value {
                        "deny" => DefaultPolicy::Deny,
                        "anyuser-read" => DefaultPolicy::AnyUserRead,
                        _ => {
                            return Err(invalid(format!(
                                "default_policy must be deny or anyuser-read, got {value:?}"
                            )))
                        }
                    }
                }
                "max_body_bytes" => cfg.max_body_bytes = number(value)? as usize,
                "pool_state_dir" => pool.state_dir = Some(resolve(value)),
                "pool_prefix" => pool.prefix = Some(value.to_string()),
                "pool_capacity" => {
                    pool.capacity = Some(
                        u32::try_from(number(value)?)
                            .map_err(|_| invalid("pool_capacity too large".into()))?,
                    )
                }
                "pool_grace_seconds" => pool.grace = Some(number(value)?),
                "pool_hook" => pool.hook = Some(resolve(value)),
                _ => return Err(invalid(format!("unknown key {key:?}"))),
            }
        }
        cfg.pool = match pool.state_dir {
            Some(dir) => {
                let capacity = pool.capacity.ok_or(ConfigError::Missing(
                    "pool_capacity is required with pool_state_dir",
                ))?;
                let mut p = PoolConfig::new(
                    dir,
                    pool.prefix.as_deref().unwrap_or("pool"),
                    capacity,
                    pool.grace.unwrap_or(0),
                );
                p.hook = pool.hook;
                Some(p)
            }
            None if pool.capacity.is_some()
                || pool.prefix.is_some()
                || pool.grace.is_some()
                || pool.hook.is_some() =>
            {
                return Err(ConfigError::Missing("pool settings need pool_state_dir"))
            }
            None => None,
        };
        if cfg.tls_cert.is_some() != cfg.tls_key.is_some() {
            return Err(ConfigError::Missing("tls_cert and tls_key go together"));
        }
        if cfg.tls_client_ca.is_some() && cfg.tls_cert.is_none() {
            return Err(ConfigError::Missing("tls_client_ca needs tls_cert and tls_key"));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let cfg = SiteConfig::parse(
            "# site\nlisten = 0.0.0.0:9000\nexport_root=/srv\ndev_identity_headers=on\n\
             default_policy=anyuser-read\npool_state_dir=/var/pool\npool_capacity=5\npool_grace_seconds=60\n\
             mount /grid/local local /srv\n",
        )
        .unwrap();
        assert_eq!(cfg.listen.port(), 9000);
        assert!(cfg.dev_identity_headers);
        assert_eq!(cfg.default_policy, DefaultPolicy::AnyUserRead);
        let pool = cfg.pool.unwrap();
        assert_eq!(
            (pool.capacity, pool.grace_period, pool.prefix.as_str()),
            (5, 60, "pool")
        );
        assert_eq!(cfg.mounts.len(), 1);
    }

    #[test]
    fn defaults_are_closed() {
        let cfg = SiteConfig::parse("").unwrap();
        assert!(!cfg.dev_identity_headers);
        assert_eq!(cfg.default_policy.acl(), Acl::deny_all());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = SiteConfig::parse("listen=1.2.3.4:1\n\nbogus=1\n").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { line: 3, .. }), "{e}");
        assert!(SiteConfig::parse("dev_identity_headers=yes").is_err());
        assert!(SiteConfig::parse("pool_capacity=3").is_err());
        assert!(SiteConfig::parse("tls_cert=a").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let d = tempfile::tempdir().unwrap();
        let f = d.path().join("site.conf");
        fs::write(&f, "export_root = www\nmount /g local www\n").unwrap();
        let cfg = SiteConfig::load(&f).unwrap();
        assert_eq!(cfg.export_root, Some(d.path().join("www")));
        assert_eq!(
            cfg.mounts[0].backend,
            BackendSpec::Local {
                root: d.path().join("www")
            }
        );
    }
}
