//! Deliberately naive re-implementation of the access rules, used as the
//! comparison baseline for the real engine. Everything here works directly
//! on raw mode bits and string-split paths and shares no evaluation code
//! with `tenantguard-core`.

use tenantguard_core::access::AccessKind;
use tenantguard_core::model::{FileKind, FsSnapshot, Principal};

/// Plain boolean POSIX access check. `None` when the path (or an ancestor)
/// is missing from the snapshot or the kind does not apply.
pub fn naive_access_oracle(
    fs: &FsSnapshot,
    p: &Principal,
    path: &str,
    kind: AccessKind,
) -> Option<bool> {
    let node = fs.get(path)?;
    if kind == AccessKind::CreateIn && node.kind != FileKind::Dir {
        return None;
    }
    if p.uid == 0 {
        return Some(true);
    }

    // Walk every ancestor directory from the root down, re-deriving the
    // permission class at each step, and demand the execute bit.
    for anc in ancestor_list(path) {
        let dir = fs.get(&anc)?;
        if dir.kind != FileKind::Dir {
            return None;
        }
        let rwx = class_bits(p, dir.owner, dir.group, dir.mode.bits());
        if rwx & 0o1 == 0 {
            return Some(false);
        }
    }

    let rwx = class_bits(p, node.owner, node.group, node.mode.bits());
    let ok = match kind {
        AccessKind::Traverse => node.kind != FileKind::Dir || rwx & 0o1 != 0,
        AccessKind::Read => rwx & 0o4 != 0,
        AccessKind::Write => rwx & 0o2 != 0,
        AccessKind::CreateIn => rwx & 0o2 != 0 && rwx & 0o1 != 0,
    };
    Some(ok)
}

/// php-layer check: base POSIX decision, then open_basedir prefixes, then
/// safe_mode owner comparison.
pub fn naive_php_oracle(
    fs: &FsSnapshot,
    identity: &Principal,
    script_owner_uid: u32,
    basedir: Option<&[String]>,
    safe_mode: bool,
    path: &str,
    kind: AccessKind,
) -> Option<bool> {
    if !naive_access_oracle(fs, identity, path, kind)? {
        return Some(false);
    }
    if let Some(prefixes) = basedir {
        if !prefixes.iter().any(|pre| naive_within(path, pre)) {
            return Some(false);
        }
    }
    if safe_mode && fs.get(path)?.owner != script_owner_uid {
        return Some(false);
    }
    Some(true)
}

/// Component-wise prefix test, re-derived from scratch.
pub fn naive_within(path: &str, prefix: &str) -> bool {
    let pc: Vec<&str> = path.split('/').filter(|c| !c.is_empty()).collect();
    let fc: Vec<&str> = prefix.split('/').filter(|c| !c.is_empty()).collect();
    pc.len() >= fc.len() && pc[..fc.len()] == fc[..]
}

fn ancestor_list(path: &str) -> Vec<String> {
    let mut out = Vec::new();
    if path == "/" {
        return out;
    }
    out.push("/".to_string());
    let comps: Vec<&str> = path[1..].split('/').collect();
    let mut acc = String::new();
    for c in &comps[..comps.len() - 1] {
        acc.push('/');
        acc.push_str(c);
        out.push(acc.clone());
    }
    out
}

fn class_bits(p: &Principal, owner: u32, group: u32, mode: u16) -> u16 {
    if p.uid == owner {
        (mode >> 6) & 0o7
    } else if p.groups.contains(&group) {
        (mode >> 3) & 0o7
    } else {
        mode & 0o7
    }
}
