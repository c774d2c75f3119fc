//! What can a site's scripts actually reach? Classic POSIX permission
//! evaluation with full evidence chains, per-mode execution identities,
//! the inherited log descriptor table, and the PHP restriction overlays
//! (open_basedir, safe_mode) layered on top.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::{ExecMode, FileKind, FsSnapshot, Perm, Principal, Scenario, Site, Who};
use crate::paths;

/// The kinds of filesystem access the analyses ask about. `CreateIn` is
/// write+traverse on a directory: the precondition for creating a new file
/// inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AccessKind {
    Read,
    Write,
    Traverse,
    CreateIn,
}

impl AccessKind {
    pub const ALL: [AccessKind; 4] =
        [AccessKind::Read, AccessKind::Write, AccessKind::Traverse, AccessKind::CreateIn];
}

/// Which rule granted or denied a single evidence step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermissionClass {
    Owner,
    Group,
    Other,
    Superuser,
    Fd,
    SafeMode,
    OpenBasedir,
    Flag,
}

impl PermissionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PermissionClass::Owner => "owner",
            PermissionClass::Group => "group",
            PermissionClass::Other => "other",
            PermissionClass::Superuser => "superuser",
            PermissionClass::Fd => "fd",
            PermissionClass::SafeMode => "safe_mode",
            PermissionClass::OpenBasedir => "open_basedir",
            PermissionClass::Flag => "flag",
        }
    }
}

impl fmt::Display for PermissionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recorded check: what was tested at which path, under which
/// permission class, and how it came out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceStep {
    pub path: String,
    pub check: String,
    pub class: PermissionClass,
    pub outcome: bool,
}

impl EvidenceStep {
    pub fn new(path: impl Into<String>, check: impl Into<String>, class: PermissionClass, outcome: bool) -> Self {
        EvidenceStep { path: path.into(), check: check.into(), class, outcome }
    }
}

/// An access verdict together with the ordered checks that produced it.
/// The chain is never empty and its last step's outcome equals `allowed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessDecision {
    pub allowed: bool,
    pub chain: Vec<EvidenceStep>,
}

impl AccessDecision {
    /// The verdict is always the outcome of the final step.
    pub fn from_chain(chain: Vec<EvidenceStep>) -> Self {
        debug_assert!(!chain.is_empty());
        let allowed = chain.last().map(|s| s.outcome).unwrap_or(false);
        AccessDecision { allowed, chain }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AccessError {
    #[error("path `{0}` does not exist in the snapshot")]
    PathNotFound(String),
    #[error("path `{0}` is not a directory")]
    NotADirectory(String),
}

/// Open mode of an inherited descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenMode {
    Read,
    WriteAppend,
}

/// One inherited file descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FdEntry {
    pub path: String,
    pub mode: OpenMode,
}

/// PHP-level restrictions active for a script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restrictions {
    pub safe_mode: bool,
    /// open_basedir prefixes; `None` means unrestricted.
    pub basedir: Option<Vec<String>>,
    /// uid of the account owning the site's scripts.
    pub script_owner: u32,
}

/// The derived runtime of one site: who its scripts run as, which log
/// descriptors the worker inherited, and which PHP restrictions apply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionContext {
    pub site: String,
    pub identity: Principal,
    pub fd_table: Vec<FdEntry>,
    pub restrictions: Restrictions,
}

/// Paths reachable through the inherited descriptor table. Any held fd can
/// be reopened read-only through the process fd directory, so `readable`
/// covers every entry; `writable` covers the write-append ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DescriptorPaths {
    pub readable: BTreeSet<String>,
    pub writable: BTreeSet<String>,
}

/// The account a site's scripts execute as: the webserver for module/CGI
/// setups, the site owner for the identity-switching modes.
pub fn exec_identity<'a>(s: &'a Scenario, site: &Site) -> &'a Principal {
    let name = if s.host.mode.runs_as_site_owner() { &site.owner } else { &s.host.webserver };
    s.principal_by_name(name)
        .unwrap_or_else(|| panic!("validated scenario: principal `{name}` exists"))
}

/// Derives the execution context of one site.
///
/// Workers forked from the webserver parent keep the write-mode
/// descriptors of the logs their vhost is configured with; a module-mode
/// worker additionally holds the host-wide shared access log. A fresh
/// CGI-family interpreter process starts with no inherited descriptors.
pub fn build_exec_context(s: &Scenario, site: &Site) -> ExecutionContext {
    let identity = exec_identity(s, site).clone();

    let mut fd_table = Vec::new();
    if s.host.mode.inherits_log_fds() {
        let mut push = |path: &str| {
            if !fd_table.iter().any(|e: &FdEntry| e.path == path) {
                fd_table.push(FdEntry { path: path.to_string(), mode: OpenMode::WriteAppend });
            }
        };
        push(&site.error_log);
        push(&site.access_log);
        if s.host.mode == ExecMode::ApacheModule {
            if let Some(shared) = &s.host.shared_access_log {
                push(shared);
            }
        }
    }

    let script_owner = s
        .principal_by_name(&site.owner)
        .unwrap_or_else(|| panic!("validated scenario: principal `{}` exists", site.owner))
        .uid;

    ExecutionContext {
        site: site.id.clone(),
        identity,
        fd_table,
        restrictions: Restrictions {
            safe_mode: s.host.safe_mode,
            basedir: s.host.basedir_for(&site.id).map(<[String]>::to_vec),
            script_owner,
        },
    }
}

fn class_for(p: &Principal, owner: u32, group: u32) -> (Who, PermissionClass) {
    if p.uid == owner {
        (Who::Owner, PermissionClass::Owner)
    } else if p.in_group(group) {
        (Who::Group, PermissionClass::Group)
    } else {
        (Who::Other, PermissionClass::Other)
    }
}

/// Classic POSIX access evaluation with an evidence chain: the execute bit
/// is demanded on every ancestor directory, then the requested bits on the
/// node itself, using the first matching permission class (owner, then
/// group, then other). uid 0 bypasses every check.
pub fn can_access(
    fs: &FsSnapshot,
    p: &Principal,
    path: &str,
    kind: AccessKind,
) -> Result<AccessDecision, AccessError> {
    let node = fs.get(path).ok_or_else(|| AccessError::PathNotFound(path.to_string()))?;
    if kind == AccessKind::CreateIn && !node.is_dir() {
        return Err(AccessError::NotADirectory(path.to_string()));
    }

    let check_name = match kind {
        AccessKind::Read => "read",
        AccessKind::Write => "write",
        AccessKind::Traverse => "traverse",
        AccessKind::CreateIn => "create",
    };

    if p.is_superuser() {
        return Ok(AccessDecision::from_chain(vec![EvidenceStep::new(
            path,
            check_name,
            PermissionClass::Superuser,
            true,
        )]));
    }

    let mut chain = Vec::new();
    for anc in paths::ancestors(path) {
        let dir = fs.get(anc).ok_or_else(|| AccessError::PathNotFound(anc.to_string()))?;
        if !dir.is_dir() {
            return Err(AccessError::NotADirectory(anc.to_string()));
        }
        let (who, class) = class_for(p, dir.owner, dir.group);
        let ok = dir.mode.allows(who, Perm::Exec);
        chain.push(EvidenceStep::new(anc, "traverse", class, ok));
        if !ok {
            return Ok(AccessDecision::from_chain(chain));
        }
    }

    let (who, class) = class_for(p, node.owner, node.group);
    match kind {
        AccessKind::Traverse => {
            if node.is_dir() {
                let ok = node.mode.allows(who, Perm::Exec);
                chain.push(EvidenceStep::new(path, "traverse", class, ok));
            }
            // Traversing *to* a file only needs the ancestors.
        }
        AccessKind::Read => {
            let ok = node.mode.allows(who, Perm::Read);
            chain.push(EvidenceStep::new(path, "read", class, ok));
        }
        AccessKind::Write => {
            let ok = node.mode.allows(who, Perm::Write);
            chain.push(EvidenceStep::new(path, "write", class, ok));
        }
        AccessKind::CreateIn => {
            let ok = node.mode.allows(who, Perm::Write) && node.mode.allows(who, Perm::Exec);
            chain.push(EvidenceStep::new(path, "create", class, ok));
        }
    }

    if chain.is_empty() {
        // Traverse to a file directly under "/": every ancestor passed.
        chain.push(EvidenceStep::new(path, "traverse", class, true));
    }

    Ok(AccessDecision::from_chain(chain))
}

/// [`can_access`] under the site's execution identity, then the PHP
/// overlays in order: open_basedir prefix containment, then safe_mode
/// owner comparison. Overlays only ever deny.
pub fn php_can_access(
    ctx: &ExecutionContext,
    fs: &FsSnapshot,
    path: &str,
    kind: AccessKind,
) -> Result<AccessDecision, AccessError> {
    let mut decision = can_access(fs, &ctx.identity, path, kind)?;
    if !decision.allowed {
        return Ok(decision);
    }

    if let Some(prefixes) = &ctx.restrictions.basedir {
        if !prefixes.iter().any(|prefix| paths::is_within(path, prefix)) {
            decision.chain.push(EvidenceStep::new(
                path,
                "open_basedir",
                PermissionClass::OpenBasedir,
                false,
            ));
            decision.allowed = false;
            return Ok(decision);
        }
    }

    if ctx.restrictions.safe_mode {
        let node = fs.get(path).ok_or_else(|| AccessError::PathNotFound(path.to_string()))?;
        if node.owner != ctx.restrictions.script_owner {
            decision.chain.push(EvidenceStep::new(
                path,
                "safe_mode",
                PermissionClass::SafeMode,
                false,
            ));
            decision.allowed = false;
        }
    }

    Ok(decision)
}

/// Paths reachable through the context's inherited descriptors.
pub fn descriptor_paths(ctx: &ExecutionContext) -> DescriptorPaths {
    let mut out = DescriptorPaths::default();
    for fd in &ctx.fd_table {
        out.readable.insert(fd.path.clone());
        if fd.mode == OpenMode::WriteAppend {
            out.writable.insert(fd.path.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::model::ExecMode;

    fn ctx_for(s: &Scenario, site_id: &str) -> ExecutionContext {
        let site = s.site(site_id).unwrap();
        build_exec_context(s, site)
    }

    #[test]
    fn identity_follows_execution_mode() {
        let mut s = fixture::default_insecure();
        let site = s.site("website1").unwrap().clone();
        assert_eq!(exec_identity(&s, &site).name, "www-data");

        s.host.mode = ExecMode::ItkMpm;
        assert_eq!(exec_identity(&s, &site).name, "web1");

        s.host.mode = ExecMode::SuPhp;
        let site2 = s.site("website2").unwrap().clone();
        assert_eq!(exec_identity(&s, &site2).name, "web2");

        s.host.mode = ExecMode::Cgi;
        assert_eq!(exec_identity(&s, &site).name, "www-data");
    }

    #[test]
    fn module_workers_hold_shared_log_descriptors() {
        let s = fixture::default_insecure();
        let ctx = ctx_for(&s, "website1");
        let paths: Vec<&str> = ctx.fd_table.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, vec!["/var/log/apache/error_log", "/var/log/apache/access_log"]);
        assert!(ctx.fd_table.iter().all(|e| e.mode == OpenMode::WriteAppend));

        let d = descriptor_paths(&ctx);
        assert!(d.writable.contains("/var/log/apache/access_log"));
        assert!(d.readable.contains("/var/log/apache/error_log"));
    }

    #[test]
    fn cgi_interpreters_inherit_nothing() {
        let mut s = fixture::default_insecure();
        s.host.mode = ExecMode::Cgi;
        let ctx = ctx_for(&s, "website1");
        assert!(ctx.fd_table.is_empty());
        let d = descriptor_paths(&ctx);
        assert!(d.readable.is_empty() && d.writable.is_empty());
    }

    #[test]
    fn itk_workers_hold_only_their_own_logs() {
        let s = fixture::secure();
        let ctx = ctx_for(&s, "website1");
        let entries: Vec<(&str, OpenMode)> =
            ctx.fd_table.iter().map(|e| (e.path.as_str(), e.mode)).collect();
        assert_eq!(
            entries,
            vec![
                ("/home/website1/log/error_log", OpenMode::WriteAppend),
                ("/home/website1/log/access_log", OpenMode::WriteAppend),
            ]
        );
        let d = descriptor_paths(&ctx);
        assert_eq!(d.writable.len(), 2);
        assert!(!d.writable.contains("/home/website2/log/access_log"));
    }

    #[test]
    fn webserver_reads_docroot_via_group_class() {
        let s = fixture::default_insecure();
        let www = s.principal_by_name("www-data").unwrap();
        let d = can_access(&s.fs, www, "/home/website1/public_html", AccessKind::Read).unwrap();
        assert!(d.allowed);
        let last = d.chain.last().unwrap();
        assert_eq!(last.class, PermissionClass::Group);
        assert_eq!(last.check, "read");
        // Every ancestor was checked: /, /home, /home/website1, then the node.
        assert_eq!(d.chain.len(), 4);
    }

    #[test]
    fn hardened_home_blocks_foreign_traversal() {
        let s = fixture::secure();
        let web2 = s.principal_by_name("web2").unwrap();
        let d = can_access(&s.fs, web2, "/home/website1/session", AccessKind::Read).unwrap();
        assert!(!d.allowed);
        let last = d.chain.last().unwrap();
        assert_eq!(last.path, "/home/website1");
        assert_eq!(last.check, "traverse");
        assert_eq!(last.class, PermissionClass::Other);
    }

    #[test]
    fn superuser_bypasses_everything() {
        let s = fixture::secure();
        let root = s.principal_by_name("root").unwrap();
        for path in ["/home/website1/session/sess_abc123", "/home/website2/log/access_log"] {
            let d = can_access(&s.fs, root, path, AccessKind::Write).unwrap();
            assert!(d.allowed);
            assert_eq!(d.chain.len(), 1);
            assert_eq!(d.chain[0].class, PermissionClass::Superuser);
        }
    }

    #[test]
    fn missing_paths_and_bad_kinds_are_errors() {
        let s = fixture::default_insecure();
        let www = s.principal_by_name("www-data").unwrap();
        assert_eq!(
            can_access(&s.fs, www, "/nope", AccessKind::Read),
            Err(AccessError::PathNotFound("/nope".to_string()))
        );
        assert_eq!(
            can_access(&s.fs, www, "/tmp/sess_abc123", AccessKind::CreateIn),
            Err(AccessError::NotADirectory("/tmp/sess_abc123".to_string()))
        );
    }

    #[test]
    fn php_overlays_deny_in_order() {
        let s = fixture::default_insecure();
        let target = "/home/website2/public_html/config.php";

        // Unrestricted module mode: cross-site read allowed.
        let ctx = ctx_for(&s, "website1");
        let d = php_can_access(&ctx, &s.fs, target, AccessKind::Read).unwrap();
        assert!(d.allowed);

        // open_basedir outside the prefix: denied with the basedir class.
        let mut restricted = s.clone();
        restricted
            .host
            .open_basedir
            .insert("website1".to_string(), vec!["/home/website1".to_string()]);
        let ctx = ctx_for(&restricted, "website1");
        let d = php_can_access(&ctx, &restricted.fs, target, AccessKind::Read).unwrap();
        assert!(!d.allowed);
        assert_eq!(d.chain.last().unwrap().class, PermissionClass::OpenBasedir);

        // safe_mode: target owned by web2, script owner web1: denied.
        let mut safe = s.clone();
        safe.host.safe_mode = true;
        let ctx = ctx_for(&safe, "website1");
        let d = php_can_access(&ctx, &safe.fs, target, AccessKind::Read).unwrap();
        assert!(!d.allowed);
        assert_eq!(d.chain.last().unwrap().class, PermissionClass::SafeMode);
    }

    #[test]
    fn basedir_match_is_component_wise() {
        let mut s = fixture::default_insecure();
        s.fs.insert(crate::model::FileNode::dir("/home/website1evil", 0, 0, 0o755));
        s.host.open_basedir.insert("website1".to_string(), vec!["/home/website1".to_string()]);
        let ctx = ctx_for(&s, "website1");

        let inside = php_can_access(&ctx, &s.fs, "/home/website1/public_html", AccessKind::Read).unwrap();
        assert!(inside.allowed);
        let outside = php_can_access(&ctx, &s.fs, "/home/website1evil", AccessKind::Read).unwrap();
        assert!(!outside.allowed);
        assert_eq!(outside.chain.last().unwrap().class, PermissionClass::OpenBasedir);
    }

    #[test]
    fn decisions_end_with_their_verdict() {
        let s = fixture::default_insecure();
        for name in ["www-data", "web1", "web2", "root"] {
            let p = s.principal_by_name(name).unwrap();
            for node in s.fs.iter() {
                for kind in AccessKind::ALL {
                    if let Ok(d) = can_access(&s.fs, p, &node.path, kind) {
                        assert!(!d.chain.is_empty());
                        assert_eq!(d.allowed, d.chain.last().unwrap().outcome);
                    }
                }
            }
        }
    }
}
