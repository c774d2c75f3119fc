//! Core domain types for a shared-hosting scenario: OS principals, a
//! filesystem snapshot with POSIX permission bits, per-site virtual host
//! data and the host-wide execution configuration. All types are immutable
//! values after construction; every other module consumes them read-only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::paths;

/// A named OS account: the unit of access identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub name: String,
    pub uid: u32,
    /// Primary group id.
    pub gid: u32,
    /// Supplementary groups; always contains `gid`.
    pub groups: BTreeSet<u32>,
}

impl Principal {
    pub fn new(name: impl Into<String>, uid: u32, gid: u32, extra_groups: &[u32]) -> Self {
        let mut groups: BTreeSet<u32> = extra_groups.iter().copied().collect();
        groups.insert(gid);
        Principal { name: name.into(), uid, gid, groups }
    }

    pub fn is_superuser(&self) -> bool {
        self.uid == 0
    }

    pub fn in_group(&self, gid: u32) -> bool {
        self.groups.contains(&gid)
    }
}

/// Which permission triple of a mode applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Who {
    Owner,
    Group,
    Other,
}

/// One permission bit within a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perm {
    Read,
    Write,
    Exec,
}

/// The nine POSIX permission bits (owner rwx, group rwx, other rwx).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Mode(u16);

impl Mode {
    /// `bits` must fit in the low nine bits (0o777).
    pub fn new(bits: u16) -> Self {
        assert!(bits <= 0o777, "mode {bits:#o} exceeds nine permission bits");
        Mode(bits)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn allows(self, who: Who, perm: Perm) -> bool {
        let shift = match who {
            Who::Owner => 6,
            Who::Group => 3,
            Who::Other => 0,
        };
        let bit = match perm {
            Perm::Read => 0o4,
            Perm::Write => 0o2,
            Perm::Exec => 0o1,
        };
        (self.0 >> shift) & bit != 0
    }

    /// Returns a mode with one extra permission bit set.
    pub fn with_bit(self, who: Who, perm: Perm) -> Self {
        let shift = match who {
            Who::Owner => 6,
            Who::Group => 3,
            Who::Other => 0,
        };
        let bit = match perm {
            Perm::Read => 0o4,
            Perm::Write => 0o2,
            Perm::Exec => 0o1,
        };
        Mode(self.0 | (bit << shift))
    }
}

impl fmt::Debug for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mode({:03o})", self.0)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03o}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    File,
    Dir,
}

/// A file or directory in the snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileNode {
    /// Absolute normalized path.
    pub path: String,
    pub kind: FileKind,
    /// Owning uid.
    pub owner: u32,
    /// Owning gid.
    pub group: u32,
    pub mode: Mode,
}

impl FileNode {
    pub fn dir(path: impl Into<String>, owner: u32, group: u32, mode: u16) -> Self {
        FileNode { path: path.into(), kind: FileKind::Dir, owner, group, mode: Mode::new(mode) }
    }

    pub fn file(path: impl Into<String>, owner: u32, group: u32, mode: u16) -> Self {
        FileNode { path: path.into(), kind: FileKind::File, owner, group, mode: Mode::new(mode) }
    }

    pub fn is_dir(&self) -> bool {
        self.kind == FileKind::Dir
    }
}

/// An absolute-path tree of files and directories. No symbolic links exist
/// in the model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FsSnapshot {
    nodes: BTreeMap<String, FileNode>,
}

impl FsSnapshot {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a snapshot from nodes; a later node replaces an earlier one
    /// with the same path.
    pub fn from_nodes(nodes: impl IntoIterator<Item = FileNode>) -> Self {
        let mut fs = FsSnapshot::new();
        for n in nodes {
            fs.insert(n);
        }
        fs
    }

    pub fn insert(&mut self, node: FileNode) {
        self.nodes.insert(node.path.clone(), node);
    }

    pub fn get(&self, path: &str) -> Option<&FileNode> {
        self.nodes.get(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.nodes.contains_key(path)
    }

    pub fn is_dir(&self, path: &str) -> bool {
        self.get(path).is_some_and(FileNode::is_dir)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All nodes in path order.
    pub fn iter(&self) -> impl Iterator<Item = &FileNode> {
        self.nodes.values()
    }

    /// Nodes strictly below `dir`, in path order.
    pub fn nodes_under<'a>(&'a self, dir: &'a str) -> impl Iterator<Item = &'a FileNode> {
        self.nodes.values().filter(move |n| paths::is_strictly_under(&n.path, dir))
    }

    /// Copy of the snapshot with one extra (or replaced) node.
    pub fn with_node(&self, node: FileNode) -> FsSnapshot {
        let mut fs = self.clone();
        fs.insert(node);
        fs
    }
}

/// How the webserver runs site scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExecMode {
    /// Script interpreter loaded as a webserver module; scripts run as the
    /// webserver account inside long-lived worker processes.
    ApacheModule,
    /// Interpreter spawned per request as the webserver account.
    Cgi,
    /// CGI wrapper that switches to the site owner before executing.
    SuExecCgi,
    /// setuid helper running scripts as the site owner.
    SuPhp,
    /// Per-site worker pools running as the site owner.
    PeruserMpm,
    /// Per-request handler processes running as the site owner.
    ItkMpm,
}

impl ExecMode {
    pub const ALL: [ExecMode; 6] = [
        ExecMode::ApacheModule,
        ExecMode::Cgi,
        ExecMode::SuExecCgi,
        ExecMode::SuPhp,
        ExecMode::PeruserMpm,
        ExecMode::ItkMpm,
    ];

    /// Modes where each site's scripts run as the site owner account.
    pub fn runs_as_site_owner(self) -> bool {
        matches!(
            self,
            ExecMode::SuExecCgi | ExecMode::SuPhp | ExecMode::PeruserMpm | ExecMode::ItkMpm
        )
    }

    /// Modes whose workers are forked from the webserver parent and so
    /// inherit log file descriptors. CGI-family interpreters are fresh
    /// processes and inherit nothing.
    pub fn inherits_log_fds(self) -> bool {
        matches!(self, ExecMode::ApacheModule | ExecMode::PeruserMpm | ExecMode::ItkMpm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExecMode::ApacheModule => "apache_module",
            ExecMode::Cgi => "cgi",
            ExecMode::SuExecCgi => "suexec_cgi",
            ExecMode::SuPhp => "suphp",
            ExecMode::PeruserMpm => "peruser_mpm",
            ExecMode::ItkMpm => "itk_mpm",
        }
    }
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "apache_module" => Ok(ExecMode::ApacheModule),
            "cgi" => Ok(ExecMode::Cgi),
            "suexec_cgi" => Ok(ExecMode::SuExecCgi),
            "suphp" => Ok(ExecMode::SuPhp),
            "peruser_mpm" => Ok(ExecMode::PeruserMpm),
            "itk_mpm" => Ok(ExecMode::ItkMpm),
            other => Err(format!("unknown execution mode `{other}`")),
        }
    }
}

/// Facts about a site's application that the filesystem alone cannot show.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SiteAnnotations {
    /// The site has a local file inclusion vulnerability.
    pub has_lfi: bool,
    /// The site keeps CSRF tokens in its session files.
    pub csrf_in_session: bool,
    /// The site's application needs upload directories writable by the
    /// webserver account (CMS-style uploads).
    pub uploads_writable_by_webserver: bool,
}

/// One hosted website: identity, vhost paths and annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub id: String,
    /// Account name of the site owner.
    pub owner: String,
    pub server_name: String,
    pub docroot: String,
    pub error_log: String,
    pub access_log: String,
    pub session_dir: String,
    pub annotations: SiteAnnotations,
    /// Unsupported vhost directives, preserved verbatim for round-tripping.
    pub extra_vhost_lines: Vec<String>,
}

/// Host-wide webserver configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostConfig {
    pub mode: ExecMode,
    /// Account name the webserver runs as.
    pub webserver: String,
    pub safe_mode: bool,
    /// Per-site open_basedir prefixes; absent entry means unrestricted.
    pub open_basedir: BTreeMap<String, Vec<String>>,
    pub userdir_enabled: bool,
    pub local_traffic_filtered: bool,
    pub shared_access_log: Option<String>,
    /// Preferred isolation mode for remediation, when the operator wants
    /// something other than the default.
    pub recommended_mode: Option<ExecMode>,
    pub sites: Vec<Site>,
}

impl HostConfig {
    pub fn site(&self, id: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.id == id)
    }

    pub fn basedir_for(&self, site_id: &str) -> Option<&[String]> {
        self.open_basedir.get(site_id).map(Vec::as_slice)
    }
}

/// A complete modeled host: accounts, filesystem and webserver config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub principals: Vec<Principal>,
    pub fs: FsSnapshot,
    pub host: HostConfig,
}

impl Scenario {
    pub fn principal_by_name(&self, name: &str) -> Option<&Principal> {
        self.principals.iter().find(|p| p.name == name)
    }

    pub fn principal_by_uid(&self, uid: u32) -> Option<&Principal> {
        self.principals.iter().find(|p| p.uid == uid)
    }

    /// Principal whose primary gid matches; used to name file groups.
    pub fn principal_by_gid(&self, gid: u32) -> Option<&Principal> {
        self.principals.iter().find(|p| p.gid == gid)
    }

    pub fn site(&self, id: &str) -> Option<&Site> {
        self.host.site(id)
    }
}

/// Checks every structural invariant of a scenario and returns one
/// description per violation. The list is deterministic and order-stable:
/// identical inputs produce identical lists. An empty list means the
/// scenario is safe to feed to every analysis.
pub fn validate_scenario(s: &Scenario) -> Vec<String> {
    let mut v = Vec::new();

    // Principals: unique names and uids, root naming, primary group membership.
    let mut seen_names: BTreeMap<&str, u32> = BTreeMap::new();
    let mut dup_names: BTreeSet<&str> = BTreeSet::new();
    let mut seen_uids: BTreeMap<u32, &str> = BTreeMap::new();
    let mut dup_uids: BTreeSet<u32> = BTreeSet::new();
    for p in &s.principals {
        if seen_names.insert(&p.name, p.uid).is_some() {
            dup_names.insert(&p.name);
        }
        if seen_uids.insert(p.uid, &p.name).is_some() {
            dup_uids.insert(p.uid);
        }
    }
    for name in dup_names {
        v.push(format!("principals: duplicate account name `{name}`"));
    }
    for uid in dup_uids {
        v.push(format!("principals: duplicate uid {uid}"));
    }
    for p in &s.principals {
        if p.uid == 0 && p.name != "root" {
            v.push(format!("principal `{}`: uid 0 is reserved for `root`", p.name));
        }
        if p.name == "root" && p.uid != 0 {
            v.push(format!("principal `root`: must have uid 0, has {}", p.uid));
        }
        if !p.groups.contains(&p.gid) {
            v.push(format!("principal `{}`: groups must contain primary gid {}", p.name, p.gid));
        }
    }

    // Filesystem: rooted, normalized, closed under parents, resolvable ids.
    if !s.fs.is_dir("/") {
        v.push("filesystem: missing root directory `/`".to_string());
    }
    let uids: BTreeSet<u32> = s.principals.iter().map(|p| p.uid).collect();
    let gids: BTreeSet<u32> = s.principals.iter().map(|p| p.gid).collect();
    for node in s.fs.iter() {
        let path = &node.path;
        if !paths::is_normalized(path) {
            v.push(format!("path `{path}`: not an absolute normalized path"));
            continue;
        }
        if let Some(parent) = paths::parent(path) {
            match s.fs.get(parent) {
                None => v.push(format!("path `{path}`: parent `{parent}` missing from snapshot")),
                Some(p) if !p.is_dir() => {
                    v.push(format!("path `{path}`: parent `{parent}` is not a directory"))
                }
                _ => {}
            }
        }
        if !uids.contains(&node.owner) {
            v.push(format!("path `{path}`: owner uid {} has no principal", node.owner));
        }
        if !gids.contains(&node.group) {
            v.push(format!("path `{path}`: group gid {} has no principal", node.group));
        }
    }

    // Host config.
    if s.host.sites.is_empty() {
        v.push("host: at least one site is required".to_string());
    }
    let mut site_ids: BTreeSet<&str> = BTreeSet::new();
    let mut dup_ids: BTreeSet<&str> = BTreeSet::new();
    let mut server_names: BTreeSet<&str> = BTreeSet::new();
    let mut dup_servers: BTreeSet<&str> = BTreeSet::new();
    for site in &s.host.sites {
        if !site_ids.insert(&site.id) {
            dup_ids.insert(&site.id);
        }
        if !server_names.insert(&site.server_name) {
            dup_servers.insert(&site.server_name);
        }
    }
    for id in dup_ids {
        v.push(format!("host: duplicate site id `{id}`"));
    }
    for name in dup_servers {
        v.push(format!("host: duplicate server name `{name}`"));
    }
    if s.principal_by_name(&s.host.webserver).is_none() {
        v.push(format!("host: webserver account `{}` has no principal", s.host.webserver));
    }
    for site in &s.host.sites {
        if site.owner == s.host.webserver {
            v.push(format!(
                "host: webserver account `{}` must be distinct from the owner of site `{}`",
                s.host.webserver, site.id
            ));
        }
    }

    // Sites.
    for site in &s.host.sites {
        if s.principal_by_name(&site.owner).is_none() {
            v.push(format!("site `{}`: owner `{}` has no principal", site.id, site.owner));
        }
        if !s.fs.is_dir(&site.docroot) {
            v.push(format!("site `{}`: docroot `{}` is not a directory in the snapshot", site.id, site.docroot));
        }
        if !s.fs.is_dir(&site.session_dir) {
            v.push(format!("site `{}`: session dir `{}` is not a directory in the snapshot", site.id, site.session_dir));
        }
        for (label, log) in [("error log", &site.error_log), ("access log", &site.access_log)] {
            match paths::parent(log) {
                Some(parent) if s.fs.is_dir(parent) => {}
                Some(parent) => v.push(format!(
                    "site `{}`: {label} parent `{parent}` is not a directory in the snapshot",
                    site.id
                )),
                None => v.push(format!("site `{}`: {label} `{log}` has no parent directory", site.id)),
            }
        }
    }

    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn mode_bit_queries() {
        let m = Mode::new(0o750);
        assert!(m.allows(Who::Owner, Perm::Read));
        assert!(m.allows(Who::Owner, Perm::Write));
        assert!(m.allows(Who::Owner, Perm::Exec));
        assert!(m.allows(Who::Group, Perm::Read));
        assert!(!m.allows(Who::Group, Perm::Write));
        assert!(m.allows(Who::Group, Perm::Exec));
        assert!(!m.allows(Who::Other, Perm::Read));
        assert_eq!(m.with_bit(Who::Other, Perm::Read).bits(), 0o754);
        assert_eq!(m.to_string(), "750");
        assert_eq!(Mode::new(0o000).to_string(), "000");
    }

    #[test]
    #[should_panic(expected = "exceeds nine permission bits")]
    fn mode_rejects_extra_bits() {
        Mode::new(0o1777);
    }

    #[test]
    fn default_fixture_is_valid() {
        let s = fixture::default_insecure();
        assert_eq!(validate_scenario(&s), Vec::<String>::new());
    }

    #[test]
    fn secure_fixture_is_valid() {
        let s = fixture::secure();
        assert_eq!(validate_scenario(&s), Vec::<String>::new());
    }

    #[test]
    fn missing_docroot_is_one_violation_naming_the_path() {
        let mut s = fixture::default_insecure();
        s.host.sites[0].docroot = "/home/website1/gone".to_string();
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("/home/website1/gone"), "{v:?}");
    }

    #[test]
    fn duplicate_uid_is_one_violation() {
        let mut s = fixture::default_insecure();
        // web1 and web2 collide on 1001.
        for p in &mut s.principals {
            if p.name == "web2" {
                p.uid = 1001;
            }
        }
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("duplicate uid 1001"), "{v:?}");
    }

    #[test]
    fn uid_zero_must_be_root() {
        let mut s = fixture::default_insecure();
        for p in &mut s.principals {
            if p.name == "root" {
                p.name = "admin".to_string();
            }
        }
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("reserved for `root`"), "{v:?}");
    }

    #[test]
    fn orphan_node_and_bad_path_are_reported() {
        let mut s = fixture::default_insecure();
        s.fs.insert(FileNode::file("/nowhere/file", 0, 0, 0o644));
        s.fs.insert(FileNode::file("bad//path", 0, 0, 0o644));
        let v = validate_scenario(&s);
        assert!(v.iter().any(|m| m.contains("`/nowhere/file`") && m.contains("parent")));
        assert!(v.iter().any(|m| m.contains("`bad//path`") && m.contains("normalized")));
    }

    #[test]
    fn webserver_must_not_own_a_site() {
        let mut s = fixture::default_insecure();
        s.host.webserver = "web1".to_string();
        let v = validate_scenario(&s);
        assert!(v.iter().any(|m| m.contains("distinct from the owner")), "{v:?}");
    }

    #[test]
    fn validation_is_order_stable() {
        let mut s = fixture::default_insecure();
        s.host.sites[0].docroot = "/missing1".to_string();
        s.host.sites[1].session_dir = "/missing2".to_string();
        let a = validate_scenario(&s);
        let b = validate_scenario(&s);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }
}
