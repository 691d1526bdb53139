//! Grid mapfile construction.
//!
//! Each line maps a quoted DN to a concrete account (`"/C=UK/CN=A" alice`)
//! or to a pool (`"/C=UK/CN=B" .atlas`). Lines are sorted by DN.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::gacl::{DnListSource, DnListUnavailable};

/// A VO membership list whose members are mapped to `pool`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoSource {
    pub location: String,
    pub pool: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Mapfile {
    pub text: String,
    /// Sources that could not be read and were skipped.
    pub unavailable: Vec<DnListUnavailable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct MapfileParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Target {
    Account(String),
    Pool(String),
}

fn quote(dn: &str) -> String {
    let mut out = String::with_capacity(dn.len() + 2);
    out.push('"');
    for c in dn.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Builds the mapfile. Static entries take precedence over VO sources; among
/// VO sources the first one listing a DN decides its pool.
pub fn build_mapfile(
    static_entries: &[(String, String)],
    vo_sources: &[VoSource],
    dn_lists: &dyn DnListSource,
) -> Mapfile {
    let mut lines: BTreeMap<String, Target> = BTreeMap::new();
    for (dn, account) in static_entries {
        lines
            .entry(dn.trim_end().to_string())
            .or_insert_with(|| Target::Account(account.clone()));
    }
    let mut unavailable = Vec::new();
    for source in vo_sources {
        match dn_lists.fetch(&source.location) {
            Ok(members) => {
                for dn in members {
                    lines
                        .entry(dn)
                        .or_insert_with(|| Target::Pool(source.pool.clone()));
                }
            }
            Err(e) => {
                tracing::warn!(location = %e.location, reason = %e.reason, "VO source skipped");
                unavailable.push(e);
            }
        }
    }
    let mut text = String::new();
    for (dn, target) in lines {
        text.push_str(&quote(&dn));
        text.push(' ');
        match target {
            Target::Account(a) => text.push_str(&a),
            Target::Pool(p) => {
                text.push('.');
                text.push_str(&p);
            }
        }
        text.push('\n');
    }
    Mapfile { text, unavailable }
}

/// Reads `"<DN>" <account>` lines (the static-entry input format, which is
/// also the output format). Blank lines and `#` comments are skipped.
pub fn parse_mapfile(text: &str) -> Result<Vec<(String, String)>, MapfileParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| MapfileParseError {
            line: i + 1,
            message: message.to_string(),
        };
        let rest = line.strip_prefix('"').ok_or_else(|| err("DN must be quoted"))?;
        let mut dn = String::new();
        let mut chars = rest.char_indices();
        let mut end = None;
        while let Some((idx, c)) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some((_, escaped)) => dn.push(escaped),
                    None => return Err(err("dangling escape")),
                },
                '"' => {
                    end = Some(idx + 1);
                    break;
                }
                c => dn.push(c),
            }
        }
        let end = end.ok_or_else(|| err("unterminated quote"))?;
        let account = rest[end..].trim();
        if account.is_empty() {
            return Err(err("missing account"));
        }
        out.push((dn, account.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(loc: &str) -> Result<Vec<String>, DnListUnavailable> {
        match loc {
            "atlas.txt" => Ok(vec!["/C=UK/CN=B".into(), "/C=UK/CN=A".into()]),
            "cms.txt" => Ok(vec!["/C=UK/CN=B".into(), "/C=UK/CN=C".into()]),
            _ => Err(DnListUnavailable::new(loc, "missing")),
        }
    }

    #[test]
    fn static_line_format() {
        let m = build_mapfile(&[("/C=UK/CN=A".into(), "alice".into())], &[], &src);
        assert_eq!(m.text, "\"/C=UK/CN=A\" alice\n");
    }

    #[test]
    fn pool_line_format() {
        let vo = [VoSource {
            location: "atlas.txt".into(),
            pool: "atlas".into(),
        }];
        let m = build_mapfile(&[], &vo, &src);
        assert_eq!(m.text, "\"/C=UK/CN=A\" .atlas\n\"/C=UK/CN=B\" .atlas\n");
    }

    #[test]
    fn static_wins_and_first_source_wins() {
        let vo = [
            VoSource {
                location: "atlas.txt".into(),
                pool: "atlas".into(),
            },
            VoSource {
                location: "gone.txt".into(),
                pool: "gone".into(),
            },
            VoSource {
                location: "cms.txt".into(),
                pool: "cms".into(),
            },
        ];
        let m = build_mapfile(&[("/C=UK/CN=A".into(), "alice".into())], &vo, &src);
        assert_eq!(
            m.text,
            "\"/C=UK/CN=A\" alice\n\"/C=UK/CN=B\" .atlas\n\"/C=UK/CN=C\" .cms\n"
        );
        assert_eq!(m.unavailable.len(), 1);
    }

    #[test]
    fn parse_round_trips_quotes() {
        let entries = vec![
            ("/C=UK/CN=A \"Q\"".to_string(), "alice".to_string()),
            ("/C=UK/CN=B\\x".to_string(), "bob".to_string()),
        ];
        let m = build_mapfile(&entries, &[], &src);
        let mut parsed = parse_mapfile(&format!("# comment\n\n{}", m.text)).unwrap();
        parsed.sort();
        let mut expected = entries.clone();
        expected.sort();
        assert_eq!(parsed, expected);
        assert!(parse_mapfile("/C=UK/CN=A alice").is_err());
        assert!(parse_mapfile("\"/C=UK/CN=A\"").is_err());
    }
}
