//! GACL XML reading and canonical writing.
//!
//! ```xml
//! <gacl version="0.9.0">
//!   <entry>
//!     <person><dn>/C=UK/O=Grid/CN=Name</dn></person>
//!     <voms><fqan>/atlas/prod</fqan></voms>
//!     <allow><read/><list/></allow>
//!     <deny><admin/></deny>
//!   </entry>
//! </gacl>
//! ```
//!
//! Other credential elements are `<dn-list><url>…</url></dn-list>`,
//! `<auth-user/>` and `<any-user/>`. Parsing is strict: unknown elements
//! or attributes are rejected.

use std::fmt::Write as _;

use roxmltree::{Document, Node, NodeType};
use thiserror::Error;

use super::acl::{Acl, Entry, EntryError};
use super::credential::Credential;
use super::permission::{Permission, PermissionSet};

pub const GACL_VERSION: &str = "0.9.0";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AclParseError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    MalformedXml { line: u32, column: u32, message: String },
    #[error("schema violation in <{element}> at line {line}: {message}")]
    SchemaViolation {
        element: String,
        line: u32,
        message: String,
    },
}

impl AclParseError {
    pub fn line(&self) -> u32 {
        match self {
            AclParseError::MalformedXml { line, .. } | AclParseError::SchemaViolation { line, .. } => *line,
        }
    }
}

struct Ctx<'a> {
    doc: &'a Document<'a>,
}

impl Ctx<'_> {
    fn violation(&self, node: Node, message: impl Into<String>) -> AclParseError {
        AclParseError::SchemaViolation {
            element: node.tag_name().name().to_string(),
            line: self.doc.text_pos_at(node.range().start).row,
            message: message.into(),
        }
    }

    /// Child elements, rejecting stray non-whitespace text.
    fn elements<'a, 'i>(&self, node: Node<'a, 'i>) -> Result<Vec<Node<'a, 'i>>, AclParseError> {
        let mut out = Vec::new();
        for child in node.children() {
            match child.node_type() {
                NodeType::Element => {
                    if child.tag_name().namespace().is_some() {
                        return Err(self.violation(child, "namespaced elements are not allowed"));
                    }
                    out.push(child);
                }
                NodeType::Text if child.text().is_some_and(|t| !t.trim().is_empty()) => {
                    return Err(self.violation(node, "unexpected text content"));
                }
                _ => {}
            }
        }
        Ok(out)
    }

    fn no_attributes(&self, node: Node) -> Result<(), AclParseError> {
        match node.attributes().next() {
            Some(a) => Err(self.violation(node, format!("unknown attribute {:?}", a.name()))),
            None => Ok(()),
        }
    }

    fn empty_element(&self, node: Node) -> Result<(), AclParseError> {
        self.no_attributes(node)?;
        if let Some(child) = self.elements(node)?.first() {
            return Err(self.violation(*child, format!("<{}> must be empty", node.tag_name().name())));
        }
        Ok(())
    }

    /// Text of `<wrapper><inner>text</inner></wrapper>`.
    fn wrapped_text(&self, node: Node, inner: &str) -> Result<String, AclParseError> {
        self.no_attributes(node)?;
        let children = self.elements(node)?;
        let [value] = children.as_slice() else {
            return Err(self.violation(node, format!("expected exactly one <{inner}> child")));
        };
        if value.tag_name().name() != inner {
            return Err(self.violation(*value, format!("unknown element; expected <{inner}>")));
        }
        self.no_attributes(*value)?;
        let mut text = String::new();
        for child in value.children() {
            match child.node_type() {
                NodeType::Text => text.push_str(child.text().unwrap_or_default()),
                NodeType::Element => {
                    return Err(self.violation(child, "unknown element inside a value"));
                }
                _ => {}
            }
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(self.violation(*value, "empty value"));
        }
        Ok(text.to_string())
    }

    fn permissions(&self, node: Node) -> Result<PermissionSet, AclParseError> {
        self.no_attributes(node)?;
        let mut set = PermissionSet::EMPTY;
        for child in self.elements(node)? {
            let name = child.tag_name().name();
            let p = Permission::from_name(name)
                .ok_or_else(|| self.violation(child, format!("unknown permission {name:?}")))?;
            self.empty_element(child)?;
            set = set.with(p);
        }
        Ok(set)
    }

    fn entry(&self, node: Node) -> Result<Entry, AclParseError> {
        self.no_attributes(node)?;
        let mut credentials = Vec::new();
        let mut allow = None;
        let mut deny = None;
        for child in self.elements(node)? {
            let cred = match child.tag_name().name() {
                "person" => Credential::Person(self.wrapped_text(child, "dn")?),
                "dn-list" => Credential::DnList(self.wrapped_text(child, "url")?),
                "voms" => Credential::Voms(self.wrapped_text(child, "fqan")?),
                "auth-user" => {
                    self.empty_element(child)?;
                    Credential::AuthUser
                }
                "any-user" => {
                    self.empty_element(child)?;
                    Credential::AnyUser
                }
                block @ ("allow" | "deny") => {
                    let slot = if block == "allow" { &mut allow } else { &mut deny };
                    if slot.is_some() {
                        return Err(self.violation(child, format!("duplicate <{block}>")));
                    }
                    *slot = Some(self.permissions(child)?);
                    continue;
                }
                other => return Err(self.violation(child, format!("unknown element <{other}>"))),
            };
            if let Err(e) = cred.validate() {
                return Err(self.violation(child, e.to_string()));
            }
            credentials.push(cred);
        }
        Entry::new(credentials, allow.unwrap_or_default(), deny.unwrap_or_default()).map_err(|e| match e {
            EntryError::NoCredentials => self.violation(node, "entry has no credential"),
            other => self.violation(node, other.to_string()),
        })
    }
}

/// Parses a GACL document. Entries keep document order.
pub fn parse_acl(xml_text: &str) -> Result<Acl, AclParseError> {
    let doc = Document::parse(xml_text).map_err(|e| {
        let pos = e.pos();
        AclParseError::MalformedXml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let ctx = Ctx { doc: &doc };
    let root = doc.root_element();
    if root.tag_name().name() != "gacl" || root.tag_name().namespace().is_some() {
        return Err(ctx.violation(root, "root element must be <gacl>"));
    }
    if let Some(a) = root.attributes().find(|a| a.name() != "version") {
        return Err(ctx.violation(root, format!("unknown attribute {:?}", a.name())));
    }
    let mut entries = Vec::new();
    for child in ctx.elements(root)? {
        if child.tag_name().name() != "entry" {
            return Err(ctx.violation(child, format!("unknown element <{}>", child.tag_name().name())));
        }
        entries.push(ctx.entry(child)?);
    }
    Ok(Acl::new(entries))
}

fn escape(text: &str, out: &mut String) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

fn write_permissions(tag: &str, set: PermissionSet, out: &mut String) {
    if set.is_empty() {
        return;
    }
    let _ = write!(out, "    <{tag}>");
    for p in set.iter() {
        let _ = write!(out, "<{}/>", p.name());
    }
    let _ = writeln!(out, "</{tag}>");
}

/// Canonical form: credentials, then allow, then deny within each entry;
/// permissions in read, list, write, admin order; empty blocks omitted;
/// two-space indentation.
pub fn serialize_acl(acl: &Acl) -> String {
    let mut out = format!("<gacl version=\"{GACL_VERSION}\">\n");
    for entry in &acl.entries {
        out.push_str("  <entry>\n");
        for cred in entry.credentials() {
            out.push_str("    ");
            let (outer, inner) = match cred {
                Credential::Person(_) => ("person", "dn"),
                Credential::DnList(_) => ("dn-list", "url"),
                Credential::Voms(_) => ("voms", "fqan"),
                Credential::AuthUser | Credential::AnyUser => {
                    let _ = writeln!(out, "<{}/>", cred.kind_name());
                    continue;
                }
            };
            let _ = write!(out, "<{outer}><{inner}>");
            escape(cred.value().unwrap_or_default(), &mut out);
            let _ = writeln!(out, "</{inner}></{outer}>");
        }
        write_permissions("allow", entry.allowed(), &mut out);
        write_permissions("deny", entry.denied(), &mut out);
        out.push_str("  </entry>\n");
    }
    out.push_str("</gacl>\n");
    out
}
