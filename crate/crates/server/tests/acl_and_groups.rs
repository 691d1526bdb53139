mod common;

use std::fs;

use common::*;
use gridsite_core::gacl::{parse_acl, serialize_acl};
use gridsite_core::{Acl, Credential, CredentialSet, Entry, Permission, PermissionSet};
use gridsite_server::ACL_SOURCE_HEADER;
use http::StatusCode;

fn admin_tree() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_acl(&dir.path().join(".gacl"), &grant(ALICE, PermissionSet::ALL));
    fs::create_dir(dir.path().join("docs")).unwrap();
    fs::write(dir.path().join("docs/a.txt"), "a").unwrap();
    dir
}

#[test]
fn acl_get_reports_source() {
    let dir = admin_tree();
    let s = site(dir.path());
    let alice = CredentialSet::with_dn(ALICE);
    let r = get(&s, &alice, "/docs/a.txt?acl");
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.headers()[ACL_SOURCE_HEADER], "/.gacl");
    let acl = parse_acl(std::str::from_utf8(r.body()).unwrap()).unwrap();
    assert_eq!(acl, grant(ALICE, PermissionSet::ALL));
    assert_eq!(
        get(&s, &alice, "/docs/?acl=file").status(),
        StatusCode::BAD_REQUEST
    );
}

#[test]
fn replace_keeping_admin_takes_effect() {
    let dir = admin_tree();
    let s = site(dir.path());
    let alice = CredentialSet::with_dn(ALICE);
    let bob = CredentialSet::with_dn(BOB);
    assert_eq!(get(&s, &bob, "/docs/a.txt").status(), StatusCode::FORBIDDEN);
    let new = Acl::new(vec![
        Entry::allow(Credential::person(ALICE).unwrap(), PermissionSet::ALL).unwrap(),
        Entry::allow(
            Credential::person(BOB).unwrap(),
            PermissionSet::of(&[Permission::Read]),
        )
        .unwrap(),
    ]);
    let r = put(&s, &alice, "/docs/?acl", serialize_acl(&new).as_bytes());
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(get(&s, &bob, "/docs/a.txt").status(), StatusCode::OK);
    assert_eq!(
        get(&s, &alice, "/docs/a.txt?acl").headers()[ACL_SOURCE_HEADER],
        "/docs/.gacl"
    );
    // a per-file ACL overrides the directory one for that file alone
    let file_only = grant(ALICE, PermissionSet::of(&[Permission::Admin, Permission::Read]));
    let r = put(
        &s,
        &alice,
        "/docs/a.txt?acl",
        serialize_acl(&file_only).as_bytes(),
    );
    assert_eq!(r.status(), StatusCode::OK);
    assert!(dir.path().join("docs/.gacl-a.txt").exists());
    assert_eq!(get(&s, &bob, "/docs/a.txt").status(), StatusCode::FORBIDDEN);
}

#[test]
fn lock_out_guard() {
    let dir = admin_tree();
    let s = site(dir.path());
    let alice = CredentialSet::with_dn(ALICE);
    let before = fs::read(dir.path().join(".gacl")).unwrap();
    let nothing_for_me = grant(BOB, PermissionSet::ALL);
    let r = put(&s, &alice, "/?acl", serialize_acl(&nothing_for_me).as_bytes());
    assert_eq!(r.status(), StatusCode::CONFLICT);
    let deny_admin = Acl::new(vec![Entry::new(
        vec![Credential::person(ALICE).unwrap()],
        PermissionSet::ALL,
        PermissionSet::of(&[Permission::Admin]),
    )
    .unwrap()]);
    let r = put(&s, &alice, "/?acl", serialize_acl(&deny_admin).as_bytes());
    assert_eq!(r.status(), StatusCode::CONFLICT);
    assert_eq!(fs::read(dir.path().join(".gacl")).unwrap(), before);
}

#[test]
fn bad_acl_body_is_400_with_diagnostics() {
    let dir = admin_tree();
    let s = site(dir.path());
    let alice = CredentialSet::with_dn(ALICE);
    let r = put(&s, &alice, "/?acl", b"<gacl>\n<entry><bogus/></entry></gacl>");
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let msg = String::from_utf8(r.into_body()).unwrap();
    assert!(msg.contains("line 2"), "{msg}");
    assert_eq!(
        put(&s, &alice, "/?acl", b"<gacl").status(),
        StatusCode::BAD_REQUEST
    );
}

#[test]
fn writer_without_admin_cannot_touch_acls() {
    let dir = tempfile::tempdir().unwrap();
    write_acl(
        &dir.path().join(".gacl"),
        &grant(
            BOB,
            PermissionSet::of(&[Permission::Read, Permission::List, Permission::Write]),
        ),
    );
    let s = site(dir.path());
    let bob = CredentialSet::with_dn(BOB);
    assert_eq!(get(&s, &bob, "/?acl").status(), StatusCode::FORBIDDEN);
    let mine = serialize_acl(&grant(BOB, PermissionSet::ALL));
    assert_eq!(
        put(&s, &bob, "/?acl", mine.as_bytes()).status(),
        StatusCode::FORBIDDEN
    );
}

/// Groups are dn-list files in the tree. Their own per-file ACL lets group
/// administrators edit them with a plain PUT, and membership changes apply
/// on the very next request.
#[test]
fn group_admin_edits_membership() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    const GROUP_ADMIN: &str = "/C=UK/O=eScience/CN=Group Admin";
    const MEMBER: &str = "/C=UK/O=eScience/CN=New Member";
    fs::create_dir(root.join("groups")).unwrap();
    fs::create_dir(root.join("project")).unwrap();
    fs::write(root.join("groups/staff"), format!("# staff\n{ALICE}\n")).unwrap();
    fs::write(root.join("project/plan.txt"), "plan").unwrap();
    write_acl(&root.join(".gacl"), &grant(ALICE, PermissionSet::ALL));
    write_acl(
        &root.join("groups/.gacl-staff"),
        &Acl::new(vec![
            Entry::allow(
                Credential::person(GROUP_ADMIN).unwrap(),
                PermissionSet::of(&[Permission::Read, Permission::Write]),
            )
            .unwrap(),
            Entry::allow(Credential::AnyUser, PermissionSet::of(&[Permission::Read])).unwrap(),
        ]),
    );
    write_acl(
        &root.join("project/.gacl"),
        &Acl::new(vec![Entry::allow(
            Credential::dn_list("/groups/staff").unwrap(),
            PermissionSet::of(&[Permission::Read]),
        )
        .unwrap()]),
    );
    let s = site(root);
    let member = CredentialSet::with_dn(MEMBER);
    let admin = CredentialSet::with_dn(GROUP_ADMIN);
    assert_eq!(
        get(&s, &member, "/project/plan.txt").status(),
        StatusCode::FORBIDDEN
    );

    // a non-admin may read the list but not change it
    let r = get(&s, &member, "/groups/staff");
    assert_eq!(r.status(), StatusCode::OK);
    let mut list = String::from_utf8(r.into_body()).unwrap();
    list.push_str(MEMBER);
    list.push('\n');
    assert_eq!(
        put(&s, &member, "/groups/staff", list.as_bytes()).status(),
        StatusCode::FORBIDDEN
    );

    assert_eq!(
        put(&s, &admin, "/groups/staff", list.as_bytes()).status(),
        StatusCode::OK
    );
    assert_eq!(get(&s, &member, "/project/plan.txt").status(), StatusCode::OK);
    // comments survive editing untouched
    assert!(fs::read_to_string(root.join("groups/staff"))
        .unwrap()
        .starts_with("# staff\n"));

    let without: String = list
        .lines()
        .filter(|l| *l != MEMBER)
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(
        put(&s, &admin, "/groups/staff", without.as_bytes()).status(),
        StatusCode::OK
    );
    assert_eq!(
        get(&s, &member, "/project/plan.txt").status(),
        StatusCode::FORBIDDEN
    );
}
