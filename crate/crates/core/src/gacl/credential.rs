use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CredentialError {
    #[error("distinguished name must be non-empty and start with '/': {0:?}")]
    InvalidDn(String),
    #[error("FQAN must start with '/' followed by a VO name: {0:?}")]
    InvalidFqan(String),
    #[error("dn-list location must be non-empty")]
    EmptyDnList,
    #[error("credential value contains a control character: {0:?}")]
    ControlCharacter(String),
    #[error("an unauthenticated credential set cannot carry a DN or FQANs")]
    AnonymousWithAttributes,
}

/// One credential requirement inside an ACL entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Credential {
    /// An X.509 subject DN in one-line slash form.
    Person(String),
    /// A group: path or URL of a file listing member DNs one per line.
    DnList(String),
    /// A VOMS FQAN such as `/atlas/prod/Role=manager`.
    Voms(String),
    /// Any caller holding a valid certificate.
    AuthUser,
    /// Every caller, authenticated or not.
    AnyUser,
}

impl Credential {
    pub fn person(dn: impl Into<String>) -> Result<Self, CredentialError> {
        let c = Credential::Person(dn.into()).normalized();
        c.validate()?;
        Ok(c)
    }

    pub fn dn_list(location: impl Into<String>) -> Result<Self, CredentialError> {
        let c = Credential::DnList(location.into()).normalized();
        c.validate()?;
        Ok(c)
    }

    pub fn voms(fqan: impl Into<String>) -> Result<Self, CredentialError> {
        let c = Credential::Voms(fqan.into()).normalized();
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CredentialError> {
        if let Some(v) = self.value() {
            if v.chars().any(char::is_control) {
                return Err(CredentialError::ControlCharacter(v.to_string()));
            }
        }
        match self {
            Credential::Person(dn) => validate_dn(dn),
            Credential::DnList(loc) if loc.trim().is_empty() => Err(CredentialError::EmptyDnList),
            Credential::Voms(fqan) => validate_fqan(fqan),
            _ => Ok(()),
        }
    }

    /// The text carried by valued kinds.
    pub fn value(&self) -> Option<&str> {
        match self {
            Credential::Person(v) | Credential::DnList(v) | Credential::Voms(v) => Some(v),
            Credential::AuthUser | Credential::AnyUser => None,
        }
    }

    /// Same credential with surrounding whitespace stripped from its value.
    #[must_use]
    pub fn normalized(self) -> Self {
        match self {
            Credential::Person(v) => Credential::Person(v.trim().to_string()),
            Credential::DnList(v) => Credential::DnList(v.trim().to_string()),
            Credential::Voms(v) => Credential::Voms(v.trim().to_string()),
            other => other,
        }
    }

    /// Kind name as used by the XML vocabulary.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Credential::Person(_) => "person",
            Credential::DnList(_) => "dn-list",
            Credential::Voms(_) => "voms",
            Credential::AuthUser => "auth-user",
            Credential::AnyUser => "any-user",
        }
    }
}

impl fmt::Display for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Credential::Person(dn) => write!(f, "person {dn}"),
            Credential::DnList(loc) => write!(f, "dn-list {loc}"),
            Credential::Voms(fqan) => write!(f, "voms {fqan}"),
            Credential::AuthUser => f.write_str("auth-user"),
            Credential::AnyUser => f.write_str("any-user"),
        }
    }
}

pub fn validate_dn(dn: &str) -> Result<(), CredentialError> {
    let dn = normalize_dn(dn);
    if dn.len() < 2 || !dn.starts_with('/') {
        return Err(CredentialError::InvalidDn(dn.to_string()));
    }
    Ok(())
}

pub fn validate_fqan(fqan: &str) -> Result<(), CredentialError> {
    let vo = fqan.strip_prefix('/').and_then(|rest| rest.split('/').next());
    match vo {
        Some(vo) if !vo.is_empty() && !fqan.ends_with('/') => Ok(()),
        _ => Err(CredentialError::InvalidFqan(fqan.to_string())),
    }
}

/// DNs compare byte-wise after trimming trailing whitespace.
pub fn normalize_dn(dn: &str) -> &str {
    dn.trim_end()
}

/// True when `granted` equals `held` or is an ancestor of it at a `/` boundary.
pub fn fqan_covers(granted: &str, held: &str) -> bool {
    match held.strip_prefix(granted) {
        Some("") => true,
        Some(rest) => rest.starts_with('/'),
        None => false,
    }
}

/// The identity a caller presents to an authorization decision.
///
/// An unauthenticated set never carries a DN or FQANs, and a DN implies
/// authentication.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CredentialSet {
    dn: Option<String>,
    fqans: Vec<String>,
    authenticated: bool,
}

impl CredentialSet {
    pub fn anonymous() -> Self {
        Self::default()
    }

    /// An authenticated caller identified by `dn`.
    pub fn with_dn(dn: impl Into<String>) -> Self {
        CredentialSet {
            dn: Some(dn.into()),
            fqans: Vec::new(),
            authenticated: true,
        }
    }

    #[must_use]
    pub fn add_fqan(mut self, fqan: impl Into<String>) -> Self {
        self.fqans.push(fqan.into());
        self.authenticated = true;
        self
    }

    pub fn from_parts(
        dn: Option<String>,
        fqans: Vec<String>,
        authenticated: bool,
    ) -> Result<Self, CredentialError> {
        if !authenticated && (dn.is_some() || !fqans.is_empty()) {
            return Err(CredentialError::AnonymousWithAttributes);
        }
        Ok(CredentialSet {
            dn,
            fqans,
            authenticated,
        })
    }

    pub fn dn(&self) -> Option<&str> {
        self.dn.as_deref()
    }

    pub fn fqans(&self) -> &[String] {
        &self.fqans
    }

    pub fn is_authenticated(&self) -> bool {
        self.authenticated
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fqan_prefix_only_at_slash_boundary() {
        assert!(fqan_covers("/atlas", "/atlas/prod/Role=manager"));
        assert!(fqan_covers("/atlas", "/atlas"));
        assert!(!fqan_covers("/atl", "/atlas/prod/Role=manager"));
        assert!(!fqan_covers("/atlas/prod/Role=manager", "/atlas"));
    }

    #[test]
    fn fqan_validation() {
        assert!(validate_fqan("/atlas").is_ok());
        assert!(validate_fqan("/atlas/prod/Role=manager").is_ok());
        assert!(validate_fqan("atlas").is_err());
        assert!(validate_fqan("/").is_err());
        assert!(validate_fqan("//x").is_err());
        assert!(validate_fqan("/atlas/").is_err());
    }

    #[test]
    fn dn_validation() {
        assert!(Credential::person("/C=UK/CN=A").is_ok());
        assert!(Credential::person("").is_err());
        assert!(Credential::person("/").is_err());
        assert!(Credential::person("C=UK").is_err());
    }

    #[test]
    fn anonymous_cannot_carry_dn() {
        let err = CredentialSet::from_parts(Some("/CN=A".into()), vec![], false).unwrap_err();
        assert_eq!(err, CredentialError::AnonymousWithAttributes);
        assert!(CredentialSet::from_parts(None, vec!["/vo".into()], false).is_err());
        assert!(CredentialSet::from_parts(None, vec![], true).is_ok());
    }

    #[test]
    fn dn_implies_authenticated() {
        let who = CredentialSet::with_dn("/CN=A");
        assert!(who.is_authenticated());
        assert!(!CredentialSet::anonymous().is_authenticated());
    }
}
