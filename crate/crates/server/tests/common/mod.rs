#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::sync::Arc;

use gridsite_core::gacl::{serialize_acl, Credential, Entry, FsDnLists};
use gridsite_core::{Acl, CredentialSet, PermissionSet};
use gridsite_server::Site;
use http::{Method, Request, Response};

pub const ALICE: &str = "/C=UK/O=eScience/CN=Alice";
pub const BOB: &str = "/C=UK/O=eScience/CN=Bob";

pub fn site(root: &Path) -> Site {
    Site::new(root, Acl::deny_all(), Arc::new(FsDnLists::rooted(root)))
}

pub fn grant(dn: &str, perms: PermissionSet) -> Acl {
    Acl::new(vec![Entry::allow(Credential::person(dn).unwrap(), perms).unwrap()])
}

pub fn write_acl(path: &Path, acl: &Acl) {
    fs::write(path, serialize_acl(acl)).unwrap();
}

pub fn req(method: Method, uri: &str, body: &[u8]) -> Request<Vec<u8>> {
    Request::builder()
        .method(method)
        .uri(uri)
        .body(body.to_vec())
        .unwrap()
}

pub fn call(site: &Site, who: &CredentialSet, method: Method, uri: &str, body: &[u8]) -> Response<Vec<u8>> {
    site.handle(who, &req(method, uri, body))
}

pub fn get(site: &Site, who: &CredentialSet, uri: &str) -> Response<Vec<u8>> {
    call(site, who, Method::GET, uri, b"")
}

pub fn put(site: &Site, who: &CredentialSet, uri: &str, body: &[u8]) -> Response<Vec<u8>> {
    call(site, who, Method::PUT, uri, body)
}

pub fn delete(site: &Site, who: &CredentialSet, uri: &str) -> Response<Vec<u8>> {
    call(site, who, Method::DELETE, uri, b"")
}
