use thiserror::Error;

use super::credential::{fqan_covers, normalize_dn, Credential, CredentialError, CredentialSet};
use super::dnlist::{DnListSource, DnListUnavailable};
use super::permission::PermissionSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntryError {
    #[error("an entry needs at least one credential")]
    NoCredentials,
    #[error(transparent)]
    Credential(#[from] CredentialError),
}

/// A conjunction of credentials and the permissions granted (and denied)
/// to callers satisfying all of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entry {
    credentials: Vec<Credential>,
    allow: PermissionSet,
    deny: PermissionSet,
}

impl Entry {
    pub fn new(
        credentials: Vec<Credential>,
        allow: PermissionSet,
        deny: PermissionSet,
    ) -> Result<Self, EntryError> {
        if credentials.is_empty() {
            return Err(EntryError::NoCredentials);
        }
        let credentials = credentials
            .into_iter()
            .map(|c| {
                let c = c.normalized();
                c.validate().map(|_| c)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Entry {
            credentials,
            allow,
            deny,
        })
    }

    /// Single-credential allow-only entry.
    pub fn allow(credential: Credential, allow: PermissionSet) -> Result<Self, EntryError> {
        Self::new(vec![credential], allow, PermissionSet::EMPTY)
    }

    pub fn credentials(&self) -> &[Credential] {
        &self.credentials
    }

    pub fn allowed(&self) -> PermissionSet {
        self.allow
    }

    pub fn denied(&self) -> PermissionSet {
        self.deny
    }
}

/// An ordered list of entries. Order carries no meaning for evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Acl {
    pub entries: Vec<Entry>,
}

impl Acl {
    pub fn new(entries: Vec<Entry>) -> Self {
        Acl { entries }
    }

    /// The empty ACL, which grants nothing to anyone.
    pub fn deny_all() -> Self {
        Acl::default()
    }

    /// Grants `perms` to every caller.
    pub fn any_user(perms: PermissionSet) -> Self {
        Acl::new(vec![
            Entry::allow(Credential::AnyUser, perms).expect("valid entry")
        ])
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Result of an evaluation together with dn-list lookups that failed along the way.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Evaluation {
    pub granted: PermissionSet,
    pub unavailable: Vec<DnListUnavailable>,
}

pub fn credential_matches(
    cred: &Credential,
    who: &CredentialSet,
    dn_lists: &dyn DnListSource,
) -> Result<bool, DnListUnavailable> {
    Ok(match cred {
        Credential::AnyUser => true,
        Credential::AuthUser => who.is_authenticated(),
        Credential::Person(dn) => who.dn().is_some_and(|own| normalize_dn(own) == normalize_dn(dn)),
        Credential::Voms(granted) => who.fqans().iter().any(|held| fqan_covers(granted, held)),
        Credential::DnList(location) => match who.dn() {
            None => false,
            Some(own) => {
                let own = normalize_dn(own);
                dn_lists
                    .fetch(location)?
                    .iter()
                    .any(|member| normalize_dn(member) == own)
            }
        },
    })
}

fn entry_matches(
    entry: &Entry,
    who: &CredentialSet,
    dn_lists: &dyn DnListSource,
    unavailable: &mut Vec<DnListUnavailable>,
) -> bool {
    entry
        .credentials
        .iter()
        .all(|c| match credential_matches(c, who, dn_lists) {
            Ok(m) => m,
            Err(e) => {
                unavailable.push(e);
                false
            }
        })
}

/// Evaluates `acl` for `who`, reporting dn-list failures instead of logging them.
pub fn evaluate_detailed(acl: &Acl, who: &CredentialSet, dn_lists: &dyn DnListSource) -> Evaluation {
    let mut unavailable = Vec::new();
    let mut allow = PermissionSet::EMPTY;
    let mut deny = PermissionSet::EMPTY;
    for entry in &acl.entries {
        if entry_matches(entry, who, dn_lists, &mut unavailable) {
            allow = allow.union(entry.allow);
            deny = deny.union(entry.deny);
        }
    }
    Evaluation {
        granted: allow.difference(deny),
        unavailable,
    }
}

/// Union of `allow` over matching entries minus the union of their `deny`.
///
/// An entry matches when every one of its credentials matches. A dn-list
/// that cannot be fetched counts as a non-match and is logged.
pub fn evaluate(acl: &Acl, who: &CredentialSet, dn_lists: &dyn DnListSource) -> PermissionSet {
    let eval = evaluate_detailed(acl, who, dn_lists);
    for e in &eval.unavailable {
        tracing::warn!(location = %e.location, reason = %e.reason, "dn-list unavailable");
    }
    eval.granted
}
