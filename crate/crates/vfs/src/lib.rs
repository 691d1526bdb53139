//! A user-space `/grid` style filesystem.
//!
//! A [`MountTable`] maps virtual prefixes to [`Backend`]s. The local backend
//! enforces GACL control files; the HTTP backend reads remote web content,
//! optionally presenting a client certificate.

mod backend;
mod config;
mod error;
mod http;
pub mod local;
mod mount;
pub mod path;

pub use backend::{Backend, Capabilities, FileKind, FileMeta, Op};
pub use config::{build_table, BackendSpec, MountSpec};
pub use error::VfsError;
pub use http::{build_client, DnListFetcher, HttpBackend, HttpOptions};
pub use local::LocalBackend;
pub use mount::{MountTable, Resolved};
