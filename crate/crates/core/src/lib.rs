//! Grid authorization primitives: GACL access control lists and
//! lock-file backed pool account allocation.

pub mod gacl;
pub mod mapfile;
pub mod pool;

pub use gacl::{
    acl_for_path, evaluate, parse_acl, serialize_acl, Acl, Credential, CredentialSet, Entry, Permission,
    PermissionSet,
};
