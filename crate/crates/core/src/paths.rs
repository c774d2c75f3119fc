//! Helpers for the absolute, normalized path strings used throughout the
//! scenario model. Paths are plain strings: always absolute, `/`-separated,
//! no `.`/`..` components, no duplicate or trailing separators.

/// True if `path` is an absolute normalized path.
pub fn is_normalized(path: &str) -> bool {
    if path == "/" {
        return true;
    }
    if !path.starts_with('/') || path.ends_with('/') {
        return false;
    }
    path[1..]
        .split('/')
        .all(|c| !c.is_empty() && c != "." && c != "..")
}

/// Parent path, or `None` for the root.
pub fn parent(path: &str) -> Option<&str> {
    if path == "/" {
        return None;
    }
    match path.rfind('/') {
        Some(0) => Some("/"),
        Some(i) => Some(&path[..i]),
        None => None,
    }
}

/// Proper ancestors of `path`, from the root down to its parent.
/// `/a/b/c` yields `/`, `/a`, `/a/b`; the root yields nothing.
pub fn ancestors(path: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut cur = path;
    while let Some(p) = parent(cur) {
        out.push(p);
        cur = p;
    }
    out.reverse();
    out
}

/// Component-wise prefix test: `path` equals `prefix` or lies below it.
/// `/home/website1evil` is not within `/home/website1`.
pub fn is_within(path: &str, prefix: &str) -> bool {
    if prefix == "/" {
        return path.starts_with('/');
    }
    path == prefix || (path.starts_with(prefix) && path.as_bytes().get(prefix.len()) == Some(&b'/'))
}

/// Strict variant of [`is_within`]: `path` lies below `prefix`, not equal to it.
pub fn is_strictly_under(path: &str, prefix: &str) -> bool {
    path != prefix && is_within(path, prefix)
}

/// Join a directory path and a single child name.
pub fn join(dir: &str, name: &str) -> String {
    if dir == "/" {
        format!("/{name}")
    } else {
        format!("{dir}/{name}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_rules() {
        assert!(is_normalized("/"));
        assert!(is_normalized("/home/website1/public_html"));
        assert!(!is_normalized("relative/path"));
        assert!(!is_normalized("/home//website1"));
        assert!(!is_normalized("/home/./website1"));
        assert!(!is_normalized("/home/../etc"));
        assert!(!is_normalized("/home/"));
        assert!(!is_normalized(""));
    }

    #[test]
    fn parent_chain() {
        assert_eq!(parent("/"), None);
        assert_eq!(parent("/home"), Some("/"));
        assert_eq!(parent("/home/website1"), Some("/home"));
        assert_eq!(ancestors("/home/website1/public_html"), vec!["/", "/home", "/home/website1"]);
        assert!(ancestors("/").is_empty());
    }

    #[test]
    fn prefix_matching_is_component_wise() {
        assert!(is_within("/home/website1", "/home/website1"));
        assert!(is_within("/home/website1/session", "/home/website1"));
        assert!(!is_within("/home/website1evil", "/home/website1"));
        assert!(is_within("/anything", "/"));
        assert!(is_strictly_under("/tmp/sess_a", "/tmp"));
        assert!(!is_strictly_under("/tmp", "/tmp"));
    }

    #[test]
    fn join_handles_root() {
        assert_eq!(join("/", "tmp"), "/tmp");
        assert_eq!(join("/home", "website1"), "/home/website1");
    }
}
