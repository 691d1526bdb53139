#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;

use gridsite_core::gacl::{Credential, Entry};
use gridsite_core::{Acl, CredentialSet, PermissionSet};
use rand::rngs::StdRng;
use rand::Rng;

pub const ALICE: &str = "/C=UK/O=eScience/CN=Alice";
pub const BOB: &str = "/C=UK/O=eScience/CN=Bob";

pub struct Output {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Output {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }
}

/// Runs the `gridsite` binary with `args`, feeding `stdin`.
pub fn gridsite<S: AsRef<std::ffi::OsStr>>(args: &[S], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gridsite"))
        .args(args)
        .env_remove("GRIDSITE_LOG")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn gridsite");
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    let out = child.wait_with_output().unwrap();
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Identity flags for a credential set.
pub fn identity_args(who: &CredentialSet) -> Vec<String> {
    if !who.is_authenticated() {
        return vec!["--anonymous".into()];
    }
    let mut args = Vec::new();
    if let Some(dn) = who.dn() {
        args.extend(["--dn".to_string(), dn.to_string()]);
    }
    for f in who.fqans() {
        args.extend(["--fqan".to_string(), f.clone()]);
    }
    args
}

/// Minimal HTTP/1.1 fixture serving `files` for GET and HEAD, 404 otherwise.
pub fn stub_server(files: Vec<(String, Vec<u8>)>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request = String::new();
            if reader.read_line(&mut request).is_err() {
                continue;
            }
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap_or(0) == 0 || h == "\r\n" {
                    break;
                }
            }
            let mut parts = request.split_whitespace();
            let method = parts.next().unwrap_or("");
            let path = parts.next().unwrap_or("");
            let (status, body): (&str, &[u8]) = match files.iter().find(|(p, _)| p == path) {
                Some((_, b)) => ("200 OK", b),
                None => ("404 Not Found", b""),
            };
            let head = format!(
                "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                body.len()
            );
            let _ = stream.write_all(head.as_bytes());
            if method == "GET" {
                let _ = stream.write_all(body);
            }
            let _ = stream.flush();
            let _ = reader.read(&mut [0; 1]);
        }
    });
    format!("http://{addr}/")
}

/// Credential values chosen to stress escaping and FQAN prefixes.
pub const GEN_DNS: [&str; 4] = [
    "/C=UK/O=eScience/CN=Alice",
    "/C=UK/O=eScience/CN=Bob",
    "/C=CH/O=CERN/CN=Carol & Co <ops>",
    "/DC=org/DC=example/CN=\"Dan\" O'Neil",
];
pub const GEN_FQANS: [&str; 4] = ["/atlas", "/atlas/prod", "/atlas/prod/Role=manager", "/cms"];

pub fn random_credential(rng: &mut StdRng, kind: usize, lists: &[String]) -> Credential {
    match kind {
        0 => Credential::person(GEN_DNS[rng.random_range(0..GEN_DNS.len())]).unwrap(),
        1 => Credential::dn_list(lists[rng.random_range(0..lists.len())].clone()).unwrap(),
        2 => Credential::voms(GEN_FQANS[rng.random_range(0..GEN_FQANS.len())]).unwrap(),
        3 => Credential::AuthUser,
        _ => Credential::AnyUser,
    }
}

/// An ACL of 0..=5 entries, each with 1..=4 credentials.
pub fn random_acl(rng: &mut StdRng, lists: &[String]) -> Acl {
    let entries = (0..rng.random_range(0..=5))
        .map(|_| {
            let creds = (0..rng.random_range(1..=4))
                .map(|_| {
                    let kind = rng.random_range(0..5);
                    random_credential(rng, kind, lists)
                })
                .collect();
            let allow = PermissionSet::from_bits(rng.random_range(0..16));
            let deny = PermissionSet::from_bits(if rng.random_bool(0.3) {
                rng.random_range(0..16)
            } else {
                0
            });
            Entry::new(creds, allow, deny).unwrap()
        })
        .collect();
    Acl::new(entries)
}

pub fn random_identity(rng: &mut StdRng) -> CredentialSet {
    match rng.random_range(0..6) {
        0 => CredentialSet::anonymous(),
        1 => CredentialSet::from_parts(
            None,
            vec![GEN_FQANS[rng.random_range(0..GEN_FQANS.len())].into()],
            true,
        )
        .unwrap(),
        _ => {
            let mut who = CredentialSet::with_dn(GEN_DNS[rng.random_range(0..GEN_DNS.len())]);
            for _ in 0..rng.random_range(0..3) {
                who = who.add_fqan(GEN_FQANS[rng.random_range(0..GEN_FQANS.len())]);
            }
            who
        }
    }
}

/// Writes a dn-list naming the first two generated DNs and returns
/// `[present, missing]` locations.
pub fn dn_list_files(dir: &Path) -> Vec<String> {
    let present = dir.join("uk.txt");
    std::fs::write(&present, format!("# members\n{}\n{}\n", GEN_DNS[0], GEN_DNS[1])).unwrap();
    vec![
        present.to_string_lossy().into_owned(),
        dir.join("missing.txt").to_string_lossy().into_owned(),
    ]
}
