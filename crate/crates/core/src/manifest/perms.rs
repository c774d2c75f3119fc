//! The permissions manifest: one filesystem node per line. Both the spaced
//! form (`d rwx r-x --- web1:www-data /home/website1/public_html`) and the
//! compact form (`drwxr-x--- web1:www-data /home/website1/public_html`)
//! are accepted; the spaced form is canonical.

use crate::manifest::ParseError;
use crate::model::{FileKind, FileNode, Mode, Principal};
use crate::paths;

/// One parsed manifest line. Owner and group are account/group *names*;
/// they are resolved against the principal list when the scenario is
/// assembled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: FileKind,
    pub mode: Mode,
    pub owner: String,
    pub group: String,
}

impl ManifestEntry {
    /// Resolves the owner/group names to uids/gids. The group name must be
    /// some principal's primary group.
    pub fn resolve(&self, principals: &[Principal]) -> Result<FileNode, String> {
        let owner = principals
            .iter()
            .find(|p| p.name == self.owner)
            .ok_or_else(|| format!("unknown account `{}` for `{}`", self.owner, self.path))?;
        let group = principals
            .iter()
            .find(|p| p.name == self.group)
            .ok_or_else(|| format!("unknown group `{}` for `{}`", self.group, self.path))?;
        Ok(FileNode {
            path: self.path.clone(),
            kind: self.kind,
            owner: owner.uid,
            group: group.gid,
            mode: self.mode,
        })
    }
}

fn parse_kind(s: &str, line: usize) -> Result<FileKind, ParseError> {
    match s {
        "d" => Ok(FileKind::Dir),
        "-" => Ok(FileKind::File),
        other => Err(ParseError::new(line, format!("unknown node kind `{other}` (expected `d` or `-`)"))),
    }
}

fn parse_triple(s: &str, line: usize) -> Result<u16, ParseError> {
    let b = s.as_bytes();
    if b.len() != 3 {
        return Err(ParseError::new(line, format!("malformed permission triple `{s}`")));
    }
    let mut bits = 0;
    for (i, (on, bit)) in [(b'r', 0o4), (b'w', 0o2), (b'x', 0o1)].into_iter().enumerate() {
        match b[i] {
            c if c == on => bits |= bit,
            b'-' => {}
            _ => return Err(ParseError::new(line, format!("malformed permission triple `{s}`"))),
        }
    }
    Ok(bits)
}

fn parse_owner_group(s: &str, line: usize) -> Result<(String, String), ParseError> {
    let (owner, group) = s
        .split_once(':')
        .ok_or_else(|| ParseError::new(line, format!("missing `:` in owner:group `{s}`")))?;
    if owner.is_empty() || group.is_empty() {
        return Err(ParseError::new(line, format!("empty owner or group in `{s}`")));
    }
    Ok((owner.to_string(), group.to_string()))
}

fn parse_path(s: &str, line: usize) -> Result<String, ParseError> {
    if !paths::is_normalized(s) {
        return Err(ParseError::new(line, format!("`{s}` is not an absolute normalized path")));
    }
    Ok(s.to_string())
}

/// Parses a permissions manifest. Blank lines and `#` comments are
/// skipped; missing ancestor directories are not synthesized.
pub fn parse_permissions_manifest(text: &str) -> Result<Vec<ManifestEntry>, ParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let entry = match tokens.as_slice() {
            [kind, owner_triple, group_triple, other_triple, owner_group, path] => {
                let kind = parse_kind(kind, lineno)?;
                let mode = (parse_triple(owner_triple, lineno)? << 6)
                    | (parse_triple(group_triple, lineno)? << 3)
                    | parse_triple(other_triple, lineno)?;
                let (owner, group) = parse_owner_group(owner_group, lineno)?;
                ManifestEntry {
                    path: parse_path(path, lineno)?,
                    kind,
                    mode: Mode::new(mode),
                    owner,
                    group,
                }
            }
            [kind_mode, owner_group, path] if kind_mode.len() == 10 => {
                let kind = parse_kind(&kind_mode[..1], lineno)?;
                let mode = (parse_triple(&kind_mode[1..4], lineno)? << 6)
                    | (parse_triple(&kind_mode[4..7], lineno)? << 3)
                    | parse_triple(&kind_mode[7..10], lineno)?;
                let (owner, group) = parse_owner_group(owner_group, lineno)?;
                ManifestEntry {
                    path: parse_path(path, lineno)?,
                    kind,
                    mode: Mode::new(mode),
                    owner,
                    group,
                }
            }
            _ => {
                return Err(ParseError::new(
                    lineno,
                    format!("expected `<kind> <rwx> <rwx> <rwx> <owner>:<group> <path>`, got `{line}`"),
                ))
            }
        };
        out.push(entry);
    }
    Ok(out)
}

fn triple_str(bits: u16) -> String {
    let mut s = String::with_capacity(3);
    s.push(if bits & 0o4 != 0 { 'r' } else { '-' });
    s.push(if bits & 0o2 != 0 { 'w' } else { '-' });
    s.push(if bits & 0o1 != 0 { 'x' } else { '-' });
    s
}

/// Canonical spaced-triple emission, one line per node, sorted by path.
pub fn emit_permissions_manifest(
    nodes: &[FileNode],
    principals: &[Principal],
) -> Result<String, String> {
    let mut sorted: Vec<&FileNode> = nodes.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));

    let mut out = String::new();
    for node in sorted {
        let owner = principals
            .iter()
            .find(|p| p.uid == node.owner)
            .ok_or_else(|| format!("no account with uid {} for `{}`", node.owner, node.path))?;
        let group = principals
            .iter()
            .find(|p| p.gid == node.group)
            .ok_or_else(|| format!("no group with gid {} for `{}`", node.group, node.path))?;
        let kind = match node.kind {
            FileKind::Dir => 'd',
            FileKind::File => '-',
        };
        let bits = node.mode.bits();
        out.push_str(&format!(
            "{kind} {} {} {} {}:{} {}\n",
            triple_str(bits >> 6),
            triple_str(bits >> 3),
            triple_str(bits),
            owner.name,
            group.name,
            node.path
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn parses_spaced_figure_style_lines() {
        let text = "d rwx r-x --- web1:www-data /home/website1/public_html\n";
        let entries = parse_permissions_manifest(text).unwrap();
        assert_eq!(entries.len(), 1);
        let e = &entries[0];
        assert_eq!(e.kind, FileKind::Dir);
        assert_eq!(e.mode.bits(), 0o750);
        assert_eq!(e.owner, "web1");
        assert_eq!(e.group, "www-data");
        assert_eq!(e.path, "/home/website1/public_html");
    }

    #[test]
    fn parses_per_site_session_dir_line() {
        let entries =
            parse_permissions_manifest("d rwx r-x --- web2:web2 /home/website2/session\n").unwrap();
        assert_eq!(entries[0].mode.bits(), 0o750);
        assert_eq!(entries[0].owner, "web2");
        assert_eq!(entries[0].group, "web2");
    }

    #[test]
    fn parses_compact_form() {
        let entries =
            parse_permissions_manifest("drwxr-x--- web1:www-data /home/website1/public_html\n")
                .unwrap();
        assert_eq!(entries[0].mode.bits(), 0o750);
        let file = parse_permissions_manifest("-rw-r--r-- root:root /var/log/apache/access_log\n")
            .unwrap();
        assert_eq!(file[0].kind, FileKind::File);
        assert_eq!(file[0].mode.bits(), 0o644);
    }

    #[test]
    fn malformed_lines_report_their_line_number() {
        let err = parse_permissions_manifest("x qqq /foo\n").unwrap_err();
        assert_eq!(err.line, 1);

        let err = parse_permissions_manifest(
            "d rwx r-x --- web1:www-data /ok\nd qqq r-x --- a:b /x\n",
        )
        .unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("malformed permission triple"));

        let err = parse_permissions_manifest("d rwx r-x --- web1 /x\n").unwrap_err();
        assert!(err.message.contains("missing `:`"));

        let err = parse_permissions_manifest("d rwx r-x --- a:b relative/path\n").unwrap_err();
        assert!(err.message.contains("not an absolute normalized path"));
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let text = "# header\n\nd rwx r-x --- web1:web1 /home\n";
        assert_eq!(parse_permissions_manifest(text).unwrap().len(), 1);
    }

    #[test]
    fn emits_all_bits_clear_file() {
        let nodes = vec![FileNode::file("/x", 1001, 1001, 0o000)];
        let principals = vec![crate::model::Principal::new("web1", 1001, 1001, &[])];
        assert_eq!(
            emit_permissions_manifest(&nodes, &principals).unwrap(),
            "- --- --- --- web1:web1 /x\n"
        );
    }

    #[test]
    fn secure_session_dir_emits_figure_form() {
        let s = fixture::secure();
        let node = s.fs.get("/home/website1/session").unwrap().clone();
        let line = emit_permissions_manifest(&[node], &s.principals).unwrap();
        assert_eq!(line, "d rwx r-x --- web1:web1 /home/website1/session\n");
    }

    #[test]
    fn unresolvable_ids_are_emit_errors() {
        let nodes = vec![FileNode::file("/x", 9999, 9999, 0o644)];
        let principals = vec![crate::model::Principal::new("web1", 1001, 1001, &[])];
        assert!(emit_permissions_manifest(&nodes, &principals).is_err());
    }
}
