//! Grid access control lists.
//!
//! An [`Acl`] is a list of entries; each entry names one or more credentials
//! that must all be held by the caller and the permissions granted (or
//! denied) when they are. Evaluation unions the grants of every matching
//! entry and removes anything a matching entry denies.

mod acl;
mod credential;
mod dnlist;
mod permission;
mod resolve;
mod xml;

pub use acl::{credential_matches, evaluate, evaluate_detailed, Acl, Entry, EntryError, Evaluation};
pub use credential::{
    fqan_covers, normalize_dn, validate_dn, validate_fqan, Credential, CredentialError, CredentialSet,
};
pub use dnlist::{parse_dn_list, DnListSource, DnListUnavailable, FsDnLists, NoDnLists};
pub use permission::{Permission, PermissionSet};
pub use resolve::{
    acl_for_directory, acl_for_path, dir_control_path, file_control_path, is_control_file_name,
    normalized_relative, AclSource, ResolveError, ResolvedAcl, DIR_CONTROL_FILE, FILE_CONTROL_PREFIX,
};
pub use xml::{parse_acl, serialize_acl, AclParseError, GACL_VERSION};
