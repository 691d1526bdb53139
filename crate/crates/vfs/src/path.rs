use crate::error::VfsError;

/// Collapses `.`, `..` and repeated separators of an absolute virtual path.
///
/// Returns the components of the normalized path. `..` above the root is a
/// [`VfsError::PathEscape`].
pub fn normalize(vpath: &str) -> Result<Vec<&str>, VfsError> {
    if !vpath.starts_with('/') {
        return Err(VfsError::InvalidPath(vpath.to_string()));
    }
    if vpath.contains('\0') {
        return Err(VfsError::InvalidPath(vpath.to_string()));
    }
    let mut parts = Vec::new();
    for seg in vpath.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                if parts.pop().is_none() {
                    return Err(VfsError::PathEscape(vpath.to_string()));
                }
            }
            s => parts.push(s),
        }
    }
    Ok(parts)
}

/// `/a/b` form of a component list (`/` for the root).
pub fn join(parts: &[&str]) -> String {
    format!("/{}", parts.join("/"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_dots() {
        assert_eq!(normalize("/grid/local/../web/x").unwrap(), ["grid", "web", "x"]);
        assert_eq!(normalize("//grid/./a//b/").unwrap(), ["grid", "a", "b"]);
        assert!(normalize("/").unwrap().is_empty());
    }

    #[test]
    fn escape_and_relative_rejected() {
        assert!(matches!(normalize("/.."), Err(VfsError::PathEscape(_))));
        assert!(matches!(normalize("/a/../../b"), Err(VfsError::PathEscape(_))));
        assert!(matches!(normalize("a/b"), Err(VfsError::InvalidPath(_))));
    }
}
