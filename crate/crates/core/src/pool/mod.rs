//! Dynamically allocated pool accounts.
//!
//! A site pre-creates a fixed set of account names (`pool001`, `pool002`,
//! ...). Grid identities are bound to free accounts on first use and keep
//! them, one to one, until every lease (job or file server session) has ended
//! and a grace period has passed.
//!
//! All bookkeeping lives in a state directory so any number of processes can
//! share it:
//!
//! ```text
//! state_dir/
//!   map/<percent-encoded DN>      account name + "\n"
//!   leases/<account>/<lease id>   DN + "\n" + start time + "\n"
//!   released/<account>            seconds since epoch + "\n"
//!   .lock                         flock serializing mutations
//!   tmp/                          staging for atomic creates
//! ```
//!
//! Times are caller-supplied seconds since the epoch.

mod store;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use thiserror::Error;

use store::{
    create_exclusive, decode_dn, encode_dn, file_names, io_err, read_opt, remove_opt, replace, StateLock,
};

pub type Timestamp = u64;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("invalid pool configuration: {0}")]
    InvalidConfig(String),
    #[error("empty DN")]
    EmptyDn,
    #[error("DN too long to encode as a lock file name: {0:?}")]
    DnTooLong(String),
    #[error("pool exhausted: all {capacity} accounts are bound")]
    PoolExhausted { capacity: u32 },
    #[error("pool state corrupt: {0}")]
    StateCorrupt(String),
    #[error("unknown lease {0:?}")]
    UnknownLease(String),
    #[error("{path:?}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolConfig {
    pub state_dir: PathBuf,
    pub prefix: String,
    pub capacity: u32,
    pub pad_width: usize,
    /// Seconds an idle binding is kept after its last lease ended.
    pub grace_period: u64,
    /// Invoked as `<hook> bind|free <account> <dn>` after each change.
    pub hook: Option<PathBuf>,
}

impl PoolConfig {
    /// Pads account numbers to at least three digits.
    pub fn new(
        state_dir: impl Into<PathBuf>,
        prefix: impl Into<String>,
        capacity: u32,
        grace_period: u64,
    ) -> Self {
        PoolConfig {
            state_dir: state_dir.into(),
            prefix: prefix.into(),
            capacity,
            pad_width: capacity.to_string().len().max(3),
            grace_period,
            hook: None,
        }
    }

    pub fn validate(&self) -> Result<(), PoolError> {
        if self.capacity == 0 {
            return Err(PoolError::InvalidConfig("capacity must be at least 1".into()));
        }
        if self.pad_width < self.capacity.to_string().len() {
            return Err(PoolError::InvalidConfig(format!(
                "pad width {} cannot represent capacity {}",
                self.pad_width, self.capacity
            )));
        }
        if self.prefix.is_empty()
            || !self
                .prefix
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(PoolError::InvalidConfig(format!(
                "prefix {:?} must be non-empty [A-Za-z0-9_-]",
                self.prefix
            )));
        }
        Ok(())
    }

    pub fn account_name(&self, index: u32) -> String {
        format!("{}{:0width$}", self.prefix, index, width = self.pad_width)
    }

    /// Index of `name` when it is one of this pool's accounts.
    pub fn account_index(&self, name: &str) -> Option<u32> {
        let digits = name.strip_prefix(&self.prefix)?;
        if digits.len() != self.pad_width || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let idx: u32 = digits.parse().ok()?;
        (1..=self.capacity).contains(&idx).then_some(idx)
    }
}

/// One running job or file server session holding an account.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lease {
    pub lease_id: String,
    pub dn: String,
    pub account: String,
    pub started_at: Timestamp,
}

/// A DN's current binding as seen by a state scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub dn: String,
    pub account: String,
    pub leases: Vec<String>,
    pub released_at: Option<Timestamp>,
}

type FaultHook = Arc<dyn Fn(&str) -> io::Result<()> + Send + Sync>;

/// Handle on a pool state directory.
#[derive(Clone)]
pub struct Pool {
    cfg: PoolConfig,
    fault: Option<FaultHook>,
}

impl std::fmt::Debug for Pool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pool").field("cfg", &self.cfg).finish()
    }
}

impl Pool {
    /// Validates the configuration and creates the state directory layout.
    pub fn open(cfg: PoolConfig) -> Result<Self, PoolError> {
        cfg.validate()?;
        for sub in ["map", "leases", "released", "tmp"] {
            let dir = cfg.state_dir.join(sub);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Pool { cfg, fault: None })
    }

    /// Installs a callback run between file operations; returning an error
    /// aborts the operation at that point, leaving the state as a crash would.
    pub fn with_fault_injector(mut self, f: impl Fn(&str) -> io::Result<()> + Send + Sync + 'static) -> Self {
        self.fault = Some(Arc::new(f));
        self
    }

    pub fn config(&self) -> &PoolConfig {
        &self.cfg
    }

    fn dir(&self, sub: &str) -> PathBuf {
        self.cfg.state_dir.join(sub)
    }

    fn lock_path(&self) -> PathBuf {
        self.cfg.state_dir.join(".lock")
    }

    fn fault(&self, step: &str) -> Result<(), PoolError> {
        match &self.fault {
            Some(f) => f(step).map_err(io_err(&self.cfg.state_dir)),
            None => Ok(()),
        }
    }

    fn fault_fn(&self) -> impl Fn(&str) -> io::Result<()> + '_ {
        move |step| match &self.fault {
            Some(f) => f(step),
            None => Ok(()),
        }
    }

    /// Reads every DN lock file, checking that the mapping is injective and in range.
    fn scan_bindings(&self) -> Result<BTreeMap<String, String>, PoolError> {
        let map_dir = self.dir("map");
        let mut by_dn = BTreeMap::new();
        let mut by_account: HashMap<String, String> = HashMap::new();
        for name in file_names(&map_dir)? {
            let dn = decode_dn(&name)
                .ok_or_else(|| PoolError::StateCorrupt(format!("undecodable lock file {name:?}")))?;
            let path = map_dir.join(&name);
            let Some(content) = read_opt(&path)? else {
                continue;
            };
            let account = content.trim_end().to_string();
            if self.cfg.account_index(&account).is_none() {
                return Err(PoolError::StateCorrupt(format!(
                    "lock file for {dn:?} names {account:?}, not an account of this pool"
                )));
            }
            if let Some(other) = by_account.insert(account.clone(), dn.clone()) {
                return Err(PoolError::StateCorrupt(format!(
                    "account {account} claimed by both {other:?} and {dn:?}"
                )));
            }
            by_dn.insert(dn, account);
        }
        Ok(by_dn)
    }

    fn lease_ids(&self, account: &str) -> Result<Vec<String>, PoolError> {
        file_names(&self.dir("leases").join(account))
    }

    fn released_at(&self, account: &str) -> Result<Option<Timestamp>, PoolError> {
        let path = self.dir("released").join(account);
        match read_opt(&path)? {
            None => Ok(None),
            Some(s) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| PoolError::StateCorrupt(format!("release marker for {account} is {s:?}"))),
        }
    }

    fn mark_released(&self, account: &str, now: Timestamp) -> Result<(), PoolError> {
        replace(
            &self.dir("tmp"),
            &self.dir("released").join(account),
            format!("{now}\n").as_bytes(),
        )
    }

    fn run_hook(&self, action: &str, account: &str, dn: &str) {
        let Some(hook) = &self.cfg.hook else { return };
        match Command::new(hook).args([action, account, dn]).status() {
            Ok(st) if st.success() => {}
            Ok(st) => tracing::warn!(hook = %hook.display(), %action, %account, %st, "pool hook failed"),
            Err(e) => {
                tracing::warn!(hook = %hook.display(), %action, %account, error = %e, "pool hook failed to start")
            }
        }
    }

    fn allocate_locked(&self, dn: &str, now: Timestamp) -> Result<String, PoolError> {
        let enc = encode_dn(dn)?;
        let bindings = self.scan_bindings()?;
        if let Some(account) = bindings.get(dn) {
            return Ok(account.clone());
        }
        let taken: std::collections::HashSet<&str> = bindings.values().map(String::as_str).collect();
        let account = (1..=self.cfg.capacity)
            .map(|i| self.cfg.account_name(i))
            .find(|name| !taken.contains(name.as_str()))
            .ok_or(PoolError::PoolExhausted {
                capacity: self.cfg.capacity,
            })?;

        let lock_file = self.dir("map").join(&enc);
        let created = create_exclusive(
            &self.dir("tmp"),
            &lock_file,
            format!("{account}\n").as_bytes(),
            &self.fault_fn(),
        )?;
        if !created {
            // Only reachable if something outside the lock wrote the file.
            return Err(PoolError::StateCorrupt(format!(
                "lock file for {dn:?} appeared during allocation"
            )));
        }
        self.fault("after-bind")?;
        self.mark_released(&account, now)?;
        self.run_hook("bind", &account, dn);
        Ok(account)
    }

    /// Returns `dn`'s account, binding the lowest free one if it has none.
    ///
    /// Concurrent calls for one DN return the same account; calls for
    /// different DNs never share one.
    pub fn allocate(&self, dn: &str, now: Timestamp) -> Result<String, PoolError> {
        if dn.trim().is_empty() {
            return Err(PoolError::EmptyDn);
        }
        let _lock = StateLock::exclusive(&self.lock_path())?;
        self.allocate_locked(dn, now)
    }

    /// Binds `dn` if needed and records a new lease on its account.
    pub fn begin_lease(&self, dn: &str, now: Timestamp) -> Result<Lease, PoolError> {
        if dn.trim().is_empty() {
            return Err(PoolError::EmptyDn);
        }
        let _lock = StateLock::exclusive(&self.lock_path())?;
        let account = self.allocate_locked(dn, now)?;
        let lease_dir = self.dir("leases").join(&account);
        fs::create_dir_all(&lease_dir).map_err(io_err(&lease_dir))?;
        self.fault("before-lease")?;
        loop {
            let lease_id = uuid::Uuid::new_v4().simple().to_string();
            let created = create_exclusive(
                &self.dir("tmp"),
                &lease_dir.join(&lease_id),
                format!("{dn}\n{now}\n").as_bytes(),
                &self.fault_fn(),
            )?;
            if created {
                return Ok(Lease {
                    lease_id,
                    dn: dn.to_string(),
                    account,
                    started_at: now,
                });
            }
        }
    }

    /// Removes the lease; when it was the account's last, records `now` as
    /// the start of the grace period.
    pub fn end_lease(&self, lease: &Lease, now: Timestamp) -> Result<(), PoolError> {
        if self.cfg.account_index(&lease.account).is_none()
            || lease.lease_id.is_empty()
            || lease.lease_id.contains(['/', '.'])
        {
            return Err(PoolError::UnknownLease(lease.lease_id.clone()));
        }
        let _lock = StateLock::exclusive(&self.lock_path())?;
        let path = self.dir("leases").join(&lease.account).join(&lease.lease_id);
        if !remove_opt(&path)? {
            return Err(PoolError::UnknownLease(lease.lease_id.clone()));
        }
        self.fault("after-lease-remove")?;
        if self.lease_ids(&lease.account)?.is_empty() {
            self.mark_released(&lease.account, now)?;
        }
        Ok(())
    }

    /// Looks a lease up by id.
    pub fn find_lease(&self, lease_id: &str) -> Result<Lease, PoolError> {
        let unknown = || PoolError::UnknownLease(lease_id.to_string());
        if lease_id.is_empty() || lease_id.contains(['/', '.']) {
            return Err(unknown());
        }
        for account in file_names(&self.dir("leases"))? {
            let path = self.dir("leases").join(&account).join(lease_id);
            if let Some(content) = read_opt(&path)? {
                let mut lines = content.lines();
                let dn = lines.next().unwrap_or_default().to_string();
                let started_at = lines.next().and_then(|l| l.parse().ok()).unwrap_or(0);
                return Ok(Lease {
                    lease_id: lease_id.to_string(),
                    dn,
                    account,
                    started_at,
                });
            }
        }
        Err(unknown())
    }

    /// Frees every bound account with no leases whose grace period has
    /// fully elapsed (`now - released >= grace_period`). Returns the freed
    /// account names in index order.
    ///
    /// A lease-free binding without a release marker (left by an interrupted
    /// allocate or end_lease) has its grace period started at `now`.
    pub fn reclaim(&self, now: Timestamp) -> Result<Vec<String>, PoolError> {
        let _lock = StateLock::exclusive(&self.lock_path())?;
        let mut freed = Vec::new();
        for (dn, account) in self.scan_bindings()? {
            if !self.lease_ids(&account)?.is_empty() {
                continue;
            }
            let released = match self.released_at(&account)? {
                Some(t) => t,
                None => {
                    self.mark_released(&account, now)?;
                    now
                }
            };
            if now < released || now - released < self.cfg.grace_period {
                continue;
            }
            remove_opt(&self.dir("map").join(encode_dn(&dn)?))?;
            self.fault("after-unbind")?;
            remove_opt(&self.dir("released").join(&account))?;
            let lease_dir = self.dir("leases").join(&account);
            match fs::remove_dir(&lease_dir) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(io_err(&lease_dir)(e)),
            }
            self.run_hook("free", &account, &dn);
            freed.push(account);
        }
        freed.sort_by_key(|a| self.cfg.account_index(a));
        Ok(freed)
    }

    /// Full consistency scan of the state directory.
    ///
    /// Fails with `StateCorrupt` when two DNs claim one account, a lock file
    /// names an account outside the pool, or leases exist for an unbound account.
    pub fn status(&self) -> Result<Vec<Binding>, PoolError> {
        let _lock = StateLock::shared(&self.lock_path())?;
        let bindings = self.scan_bindings()?;
        let bound: std::collections::HashSet<&str> = bindings.values().map(String::as_str).collect();
        for account in file_names(&self.dir("leases"))? {
            if !bound.contains(account.as_str()) && !self.lease_ids(&account)?.is_empty() {
                return Err(PoolError::StateCorrupt(format!(
                    "leases held on unbound account {account}"
                )));
            }
        }
        let mut out = Vec::with_capacity(bindings.len());
        for (dn, account) in bindings {
            out.push(Binding {
                leases: self.lease_ids(&account)?,
                released_at: self.released_at(&account)?,
                dn,
                account,
            });
        }
        out.sort_by_key(|b| self.cfg.account_index(&b.account));
        Ok(out)
    }
}

/// Account currently bound to `dn`, if any, without taking the lock.
pub fn lookup(state_dir: &Path, dn: &str) -> Result<Option<String>, PoolError> {
    let path = state_dir.join("map").join(encode_dn(dn)?);
    Ok(read_opt(&path)?.map(|s| s.trim_end().to_string()))
}
