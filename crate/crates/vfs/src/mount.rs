use std::sync::Arc;

use gridsite_core::CredentialSet;

use crate::backend::{Backend, Capabilities, FileMeta, Op};
use crate::error::VfsError;
use crate::path::{join, normalize};

struct Mount {
    prefix: Vec<String>,
    backend: Arc<dyn Backend>,
    caps: Capabilities,
}

/// Routes virtual paths to backends by longest matching mount prefix.
///
/// Immutable once built; share it behind an `Arc` between threads.
#[derive(Default)]
pub struct MountTable {
    mounts: Vec<Mount>,
}

/// A resolved virtual path.
pub struct Resolved<'a> {
    pub backend: &'a Arc<dyn Backend>,
    pub mount_prefix: String,
    /// Remainder below the mount point, `/`-separated, empty for the mount root.
    pub rel: String,
    caps: Capabilities,
}

impl MountTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a mount. Prefixes are normalized and must be unique.
    pub fn mount(mut self, prefix: &str, backend: Arc<dyn Backend>) -> Result<Self, VfsError> {
        let parts: Vec<String> = normalize(prefix)?.into_iter().map(str::to_string).collect();
        if self.mounts.iter().any(|m| m.prefix == parts) {
            return Err(VfsError::Config(format!("duplicate mount prefix {prefix:?}")));
        }
        let caps = backend.capabilities();
        self.mounts.push(Mount {
            prefix: parts,
            backend,
            caps,
        });
        Ok(self)
    }

    pub fn prefixes(&self) -> Vec<String> {
        self.mounts
            .iter()
            .map(|m| join(&m.prefix.iter().map(String::as_str).collect::<Vec<_>>()))
            .collect()
    }

    /// Normalizes `vpath` first, then picks the longest mount prefix.
    pub fn resolve(&self, vpath: &str) -> Result<Resolved<'_>, VfsError> {
        let parts = normalize(vpath)?;
        let mount = self
            .mounts
            .iter()
            .filter(|m| m.prefix.len() <= parts.len() && m.prefix.iter().zip(&parts).all(|(a, b)| a == b))
            .max_by_key(|m| m.prefix.len())
            .ok_or_else(|| VfsError::NoMount(vpath.to_string()))?;
        let prefix: Vec<&str> = mount.prefix.iter().map(String::as_str).collect();
        Ok(Resolved {
            backend: &mount.backend,
            mount_prefix: join(&prefix),
            rel: parts[mount.prefix.len()..].join("/"),
            caps: mount.caps,
        })
    }

    fn route(&self, vpath: &str, op: Op) -> Result<Resolved<'_>, VfsError> {
        let r = self.resolve(vpath)?;
        if !r.caps.supports(op) {
            return Err(VfsError::Unsupported(op));
        }
        Ok(r)
    }

    pub fn read(&self, who: &CredentialSet, vpath: &str) -> Result<Vec<u8>, VfsError> {
        let r = self.route(vpath, Op::Read)?;
        r.backend.read(who, &r.rel)
    }

    pub fn write(&self, who: &CredentialSet, vpath: &str, data: &[u8]) -> Result<(), VfsError> {
        let r = self.route(vpath, Op::Write)?;
        r.backend.write(who, &r.rel, data)
    }

    pub fn list(&self, who: &CredentialSet, vpath: &str) -> Result<Vec<FileMeta>, VfsError> {
        let r = self.route(vpath, Op::List)?;
        r.backend.list(who, &r.rel)
    }

    pub fn remove(&self, who: &CredentialSet, vpath: &str) -> Result<(), VfsError> {
        let r = self.route(vpath, Op::Remove)?;
        r.backend.remove(who, &r.rel)
    }

    pub fn mkdir(&self, who: &CredentialSet, vpath: &str) -> Result<(), VfsError> {
        let r = self.route(vpath, Op::Mkdir)?;
        r.backend.mkdir(who, &r.rel)
    }

    pub fn stat(&self, who: &CredentialSet, vpath: &str) -> Result<FileMeta, VfsError> {
        let r = self.route(vpath, Op::Stat)?;
        r.backend.stat(who, &r.rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Named;
    impl Backend for Named {
        fn capabilities(&self) -> Capabilities {
            Capabilities {
                read: true,
                ..Default::default()
            }
        }
    }

    fn table() -> MountTable {
        MountTable::new()
            .mount("/grid/local", Arc::new(Named))
            .unwrap()
            .mount("/grid/web", Arc::new(Named))
            .unwrap()
            .mount("/grid/local/deep/", Arc::new(Named))
            .unwrap()
    }

    #[test]
    fn longest_prefix_wins() {
        let t = table();
        let r = t.resolve("/grid/local/a/b").unwrap();
        assert_eq!((r.mount_prefix.as_str(), r.rel.as_str()), ("/grid/local", "a/b"));
        let r = t.resolve("/grid/local/deep/x").unwrap();
        assert_eq!(
            (r.mount_prefix.as_str(), r.rel.as_str()),
            ("/grid/local/deep", "x")
        );
        let r = t.resolve("/grid/local").unwrap();
        assert_eq!(r.rel, "");
    }

    #[test]
    fn prefix_matches_whole_components() {
        assert!(matches!(
            table().resolve("/grid/localx/a"),
            Err(VfsError::NoMount(_))
        ));
    }

    #[test]
    fn normalizes_before_matching() {
        let t = table();
        let r = t.resolve("/grid/local/../web/x").unwrap();
        assert_eq!((r.mount_prefix.as_str(), r.rel.as_str()), ("/grid/web", "x"));
    }

    #[test]
    fn no_mount() {
        assert!(matches!(table().resolve("/other"), Err(VfsError::NoMount(_))));
    }

    #[test]
    fn duplicate_prefix_rejected() {
        let dup = table().mount("/grid//web/", Arc::new(Named));
        assert!(matches!(dup, Err(VfsError::Config(_))));
    }

    #[test]
    fn capability_gate() {
        let t = table();
        let who = CredentialSet::anonymous();
        assert!(matches!(
            t.write(&who, "/grid/web/x", b""),
            Err(VfsError::Unsupported(Op::Write))
        ));
        assert!(matches!(
            t.list(&who, "/grid/web"),
            Err(VfsError::Unsupported(Op::List))
        ));
    }
}
