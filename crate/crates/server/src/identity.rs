use std::collections::HashMap;
use std::fmt;

use gridsite_core::gacl::{validate_dn, validate_fqan};
use gridsite_core::CredentialSet;
use http::HeaderMap;
use x509_parser::prelude::{FromDer, X509Certificate};

pub const DN_HEADER: &str = "x-grid-dn";
pub const FQAN_HEADER: &str = "x-grid-fqan";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentitySource {
    ClientCertificate,
    DevHeaders,
    Anonymous,
}

impl fmt::Display for IdentitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdentitySource::ClientCertificate => "tls-client-cert",
            IdentitySource::DevHeaders => "dev-headers",
            IdentitySource::Anonymous => "anonymous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestIdentity {
    pub credentials: CredentialSet,
    pub source: IdentitySource,
}

impl RequestIdentity {
    pub fn anonymous() -> Self {
        RequestIdentity {
            credentials: CredentialSet::anonymous(),
            source: IdentitySource::Anonymous,
        }
    }
}

/// FQANs asserted for certificate-authenticated DNs, loaded from a file of
/// `"<DN>" <fqan> <fqan>...` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FqanAssertions {
    by_dn: HashMap<String, Vec<String>>,
}

impl FqanAssertions {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut by_dn: HashMap<String, Vec<String>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| format!("line {}: {m}", i + 1);
            let rest = line.strip_prefix('"').ok_or_else(|| err("expected quoted DN"))?;
            let (dn, fqans) = rest.split_once('"').ok_or_else(|| err("unterminated DN"))?;
            validate_dn(dn).map_err(|e| err(&e.to_string()))?;
            let list = by_dn.entry(dn.to_string()).or_default();
            for f in fqans.split_whitespace() {
                validate_fqan(f).map_err(|e| err(&e.to_string()))?;
                list.push(f.to_string());
            }
        }
        Ok(FqanAssertions { by_dn })
    }

    pub fn for_dn(&self, dn: &str) -> &[String] {
        self.by_dn.get(dn).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, Default)]
pub struct IdentityPolicy {
    /// Honour `X-Grid-DN` and `X-Grid-Fqan`. Development only.
    pub dev_headers: bool,
    pub fqans: FqanAssertions,
}

/// Derives the caller's credentials. A verified client certificate wins;
/// dev headers count only when enabled; anything else is anonymous.
/// Malformed input degrades to anonymous and the ACL layer decides.
pub fn identify(peer_dn: Option<&str>, headers: &HeaderMap, policy: &IdentityPolicy) -> RequestIdentity {
    if let Some(dn) = peer_dn {
        let mut creds = CredentialSet::with_dn(dn);
        for f in policy.fqans.for_dn(dn) {
            creds = creds.add_fqan(f.as_str());
        }
        return RequestIdentity {
            credentials: creds,
            source: IdentitySource::ClientCertificate,
        };
    }
    if policy.dev_headers {
        if let Some(creds) = from_headers(headers) {
            return RequestIdentity {
                credentials: creds,
                source: IdentitySource::DevHeaders,
            };
        }
    }
    RequestIdentity::anonymous()
}

fn from_headers(headers: &HeaderMap) -> Option<CredentialSet> {
    let dn = match headers.get(DN_HEADER) {
        Some(v) => Some(v.to_str().ok()?.trim().to_string()),
        None => None,
    };
    let mut fqans = Vec::new();
    for v in headers.get_all(FQAN_HEADER) {
        fqans.push(v.to_str().ok()?.trim().to_string());
    }
    if dn.is_none() && fqans.is_empty() {
        return None;
    }
    let valid = dn
        .as_deref()
        .map_or(Ok(()), validate_dn)
        .and_then(|()| fqans.iter().try_for_each(|f| validate_fqan(f)));
    match valid.and_then(|()| CredentialSet::from_parts(dn, fqans, true)) {
        Ok(c) => Some(c),
        Err(e) => {
            tracing::debug!(error = %e, "ignoring malformed identity headers");
            None
        }
    }
}

/// Subject of a DER certificate in one-line slash form, e.g. `/C=UK/O=Grid/CN=Name`.
pub fn dn_from_certificate(der: &[u8]) -> Option<String> {
    let (_, cert) = X509Certificate::from_der(der).ok()?;
    let mut dn = String::new();
    for rdn in cert.subject().iter() {
        for attr in rdn.iter() {
            let oid = attr.attr_type().to_id_string();
            let key = short_name(&oid).map_or(oid.clone(), str::to_string);
            let value = attr.as_str().ok()?;
            dn.push('/');
            dn.push_str(&key);
            dn.push('=');
            dn.push_str(value);
        }
    }
    (!dn.is_empty()).then_some(dn)
}

/// Attribute labels as grid tools print them.
fn short_name(oid: &str) -> Option<&'static str> {
    Some(match oid {
        "2.5.4.3" => "CN",
        "2.5.4.5" => "serialNumber",
        "2.5.4.6" => "C",
        "2.5.4.7" => "L",
        "2.5.4.8" => "ST",
        "2.5.4.10" => "O",
        "2.5.4.11" => "OU",
        "0.9.2342.19200300.100.1.1" => "UID",
        "0.9.2342.19200300.100.1.25" => "DC",
        "1.2.840.113549.1.9.1" => "emailAddress",
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use http::HeaderValue;

    fn headers(dn: Option<&str>, fqans: &[&str]) -> HeaderMap {
        let mut h = HeaderMap::new();
        if let Some(dn) = dn {
            h.insert(DN_HEADER, HeaderValue::from_str(dn).unwrap());
        }
        for f in fqans {
            h.append(FQAN_HEADER, HeaderValue::from_str(f).unwrap());
        }
        h
    }

    #[test]
    fn headers_ignored_unless_enabled() {
        let h = headers(Some("/C=UK/CN=A"), &[]);
        let id = identify(None, &h, &IdentityPolicy::default());
        assert_eq!(id, RequestIdentity::anonymous());
    }

    #[test]
    fn dev_headers_when_enabled() {
        let policy = IdentityPolicy {
            dev_headers: true,
            ..Default::default()
        };
        let id = identify(None, &headers(Some("/C=UK/CN=A"), &["/vo/g", "/vo2"]), &policy);
        assert_eq!(id.source, IdentitySource::DevHeaders);
        assert_eq!(id.credentials.dn(), Some("/C=UK/CN=A"));
        assert_eq!(id.credentials.fqans().len(), 2);
        assert!(id.credentials.is_authenticated());
        // malformed DN degrades to anonymous
        let id = identify(None, &headers(Some("CN=bad"), &[]), &policy);
        assert_eq!(id, RequestIdentity::anonymous());
    }

    #[test]
    fn certificate_beats_headers() {
        let policy = IdentityPolicy {
            dev_headers: true,
            fqans: FqanAssertions::parse("\"/CN=A\" /vo/x\n").unwrap(),
        };
        let id = identify(Some("/CN=A"), &headers(Some("/CN=B"), &[]), &policy);
        assert_eq!(id.source, IdentitySource::ClientCertificate);
        assert_eq!(id.credentials.dn(), Some("/CN=A"));
        assert_eq!(id.credentials.fqans(), ["/vo/x".to_string()]);
    }

    #[test]
    fn fqan_file_errors() {
        assert!(FqanAssertions::parse("/CN=A /vo").is_err());
        assert!(FqanAssertions::parse("\"/CN=A\" vo").is_err());
        assert!(FqanAssertions::parse("# c\n\n\"/CN=A\"\n").is_ok());
    }
}
