//! Replaying the history of a document reproduces every state it passed
//! through. The oracle is a plain list of the contents a scripted client
//! replaced or deleted.

mod common;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use common::*;
use gridsite_core::{CredentialSet, PermissionSet};
use gridsite_server::Site;
use http::StatusCode;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone)]
enum Step {
    Put {
        author: usize,
        body: Vec<u8>,
        clock: u64,
    },
    Delete {
        author: usize,
        clock: u64,
    },
}

struct Expected {
    content: Vec<u8>,
    author: &'static str,
}

fn run_script(steps: &[Step]) {
    let dir = tempfile::tempdir().unwrap();
    write_acl(
        &dir.path().join(".gacl"),
        &gridsite_core::Acl::new(vec![
            gridsite_core::Entry::allow(
                gridsite_core::Credential::person(ALICE).unwrap(),
                PermissionSet::ALL,
            )
            .unwrap(),
            gridsite_core::Entry::allow(
                gridsite_core::Credential::person(BOB).unwrap(),
                PermissionSet::ALL,
            )
            .unwrap(),
        ]),
    );
    let now = Arc::new(AtomicU64::new(0));
    let clock = now.clone();
    let s: Site = site(dir.path()).with_clock(Arc::new(move || clock.load(Ordering::SeqCst)));
    let authors = [ALICE, BOB];
    let mut current: Option<Vec<u8>> = None;
    let mut expected: Vec<Expected> = Vec::new();
    for step in steps {
        match step {
            Step::Put { author, body, clock } => {
                now.store(*clock, Ordering::SeqCst);
                let who = CredentialSet::with_dn(authors[*author]);
                let r = put(&s, &who, "/doc.txt", body);
                let want = if current.is_some() {
                    StatusCode::OK
                } else {
                    StatusCode::CREATED
                };
                assert_eq!(r.status(), want);
                if let Some(old) = current.replace(body.clone()) {
                    expected.push(Expected {
                        content: old,
                        author: authors[*author],
                    });
                }
            }
            Step::Delete { author, clock } => {
                now.store(*clock, Ordering::SeqCst);
                let who = CredentialSet::with_dn(authors[*author]);
                let r = delete(&s, &who, "/doc.txt");
                match current.take() {
                    Some(old) => {
                        assert_eq!(r.status(), StatusCode::NO_CONTENT);
                        expected.push(Expected {
                            content: old,
                            author: authors[*author],
                        });
                    }
                    None => assert_eq!(r.status(), StatusCode::NOT_FOUND),
                }
            }
        }
    }

    let alice = CredentialSet::with_dn(ALICE);
    let r = get(&s, &alice, "/doc.txt?history");
    if expected.is_empty() && current.is_none() {
        assert_eq!(r.status(), StatusCode::NOT_FOUND);
        return;
    }
    assert_eq!(r.status(), StatusCode::OK);
    let records: Vec<serde_json::Value> = serde_json::from_slice(r.body()).unwrap();
    assert_eq!(records.len(), expected.len());
    let mut last: Option<(u64, u64)> = None;
    for (rec, exp) in records.iter().zip(&expected) {
        let key = (
            rec["timestamp"].as_u64().unwrap(),
            rec["sequence"].as_u64().unwrap(),
        );
        if let Some(prev) = last {
            assert!(key > prev, "{prev:?} then {key:?}");
        }
        last = Some(key);
        assert_eq!(rec["author"], exp.author);
        assert_eq!(rec["size"].as_u64().unwrap(), exp.content.len() as u64);
        let href = rec["href"].as_str().unwrap();
        let archived = get(&s, &alice, href);
        assert_eq!(archived.status(), StatusCode::OK);
        assert_eq!(archived.body(), &exp.content);
    }
    let now_body = get(&s, &alice, "/doc.txt");
    match current {
        Some(c) => assert_eq!(now_body.body(), &c),
        None => assert_eq!(now_body.status(), StatusCode::NOT_FOUND),
    }
}

fn random_script(seed: u64, len: usize) -> Vec<Step> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut clock = 1_000_000u64;
    (0..len)
        .map(|i| {
            // the clock stalls and even steps back now and then
            clock = match rng.random_range(0..4) {
                0 => clock,
                1 => clock.saturating_sub(5),
                _ => clock + rng.random_range(1..100),
            };
            let author = rng.random_range(0..2);
            if rng.random_bool(0.2) {
                Step::Delete { author, clock }
            } else {
                let len = rng.random_range(0..64);
                let mut body: Vec<u8> = (0..len).map(|_| rng.random()).collect();
                body.extend_from_slice(format!("step {i}").as_bytes());
                Step::Put { author, body, clock }
            }
        })
        .collect()
}

#[test]
fn fifty_step_script() {
    run_script(&random_script(50, 50));
}

#[test]
fn n_overwrites_leave_n_minus_one_records() {
    let steps: Vec<Step> = (0..7)
        .map(|i| Step::Put {
            author: 0,
            body: vec![i],
            clock: 10,
        })
        .collect();
    run_script(&steps);
}

#[test]
fn unmodified_file_has_empty_history() {
    run_script(&[Step::Put {
        author: 1,
        body: b"only".to_vec(),
        clock: 1,
    }]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn any_script_replays(seed in any::<u64>(), len in 1usize..40) {
        run_script(&random_script(seed, len));
    }
}
