use std::fmt;

/// One of the four GACL permissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Permission {
    /// Read file contents.
    Read,
    /// Obtain directory listings.
    List,
    /// Create, overwrite or delete files and directories.
    Write,
    /// Read and modify access control lists.
    Admin,
}

impl Permission {
    /// Canonical order used by the XML serializer and the CLI report.
    pub const ALL: [Permission; 4] = [
        Permission::Read,
        Permission::List,
        Permission::Write,
        Permission::Admin,
    ];

    /// XML element / report name.
    pub fn name(self) -> &'static str {
        match self {
            Permission::Read => "read",
            Permission::List => "list",
            Permission::Write => "write",
            Permission::Admin => "admin",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A subset of {Read, List, Write, Admin}. The default value is the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PermissionSet {
    pub read: bool,
    pub list: bool,
    pub write: bool,
    pub admin: bool,
}

impl PermissionSet {
    pub const EMPTY: PermissionSet = PermissionSet {
        read: false,
        list: false,
        write: false,
        admin: false,
    };

    pub const ALL: PermissionSet = PermissionSet {
        read: true,
        list: true,
        write: true,
        admin: true,
    };

    pub fn of(perms: &[Permission]) -> Self {
        perms.iter().fold(Self::EMPTY, |set, p| set.with(*p))
    }

    /// Builds a set from the low four bits of `bits` (read = bit 0 .. admin = bit 3).
    pub fn from_bits(bits: u8) -> Self {
        PermissionSet {
            read: bits & 1 != 0,
            list: bits & 2 != 0,
            write: bits & 4 != 0,
            admin: bits & 8 != 0,
        }
    }

    pub fn bits(self) -> u8 {
        self.read as u8 | (self.list as u8) << 1 | (self.write as u8) << 2 | (self.admin as u8) << 3
    }

    pub fn contains(self, p: Permission) -> bool {
        match p {
            Permission::Read => self.read,
            Permission::List => self.list,
            Permission::Write => self.write,
            Permission::Admin => self.admin,
        }
    }

    #[must_use]
    pub fn with(mut self, p: Permission) -> Self {
        match p {
            Permission::Read => self.read = true,
            Permission::List => self.list = true,
            Permission::Write => self.write = true,
            Permission::Admin => self.admin = true,
        }
        self
    }

    pub fn is_empty(self) -> bool {
        self.bits() == 0
    }

    #[must_use]
    pub fn union(self, other: Self) -> Self {
        Self::from_bits(self.bits() | other.bits())
    }

    #[must_use]
    pub fn difference(self, other: Self) -> Self {
        Self::from_bits(self.bits() & !other.bits())
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.bits() & !other.bits() == 0
    }

    /// Members in canonical order.
    pub fn iter(self) -> impl Iterator<Item = Permission> {
        Permission::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

impl FromIterator<Permission> for PermissionSet {
    fn from_iter<I: IntoIterator<Item = Permission>>(iter: I) -> Self {
        iter.into_iter().fold(Self::EMPTY, |set, p| set.with(p))
    }
}

impl fmt::Display for PermissionSet {
    /// `read=yes list=no write=no admin=no`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in Permission::ALL.into_iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            let flag = if self.contains(p) { "yes" } else { "no" };
            write!(f, "{}={}", p.name(), flag)?;
        }
        Ok(())
    }
}
