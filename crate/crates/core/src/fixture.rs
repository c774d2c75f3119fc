//! Canonical example scenarios. `default_insecure` is the classic two-site
//! shared host with a module-mode interpreter, a shared access log and
//! shared `/tmp` sessions; `secure` is the same host after full isolation
//! hardening. The files under `fixtures/` in the repository are the
//! serialized form of these builders.

use std::collections::BTreeMap;

use crate::model::{
    ExecMode, FileNode, FsSnapshot, HostConfig, Principal, Scenario, Site, SiteAnnotations,
};

pub const WEBSERVER: &str = "www-data";
pub const SHARED_ACCESS_LOG: &str = "/var/log/apache/access_log";
pub const SHARED_ERROR_LOG: &str = "/var/log/apache/error_log";

fn base_principals() -> Vec<Principal> {
    vec![
        Principal::new("root", 0, 0, &[]),
        Principal::new(WEBSERVER, 33, 33, &[]),
        Principal::new("web1", 1001, 1001, &[]),
        Principal::new("web2", 1002, 1002, &[]),
    ]
}

fn annotations_all() -> SiteAnnotations {
    SiteAnnotations { has_lfi: true, csrf_in_session: true, uploads_writable_by_webserver: true }
}

fn system_dirs() -> Vec<FileNode> {
    vec![
        FileNode::dir("/", 0, 0, 0o755),
        FileNode::dir("/home", 0, 0, 0o755),
        FileNode::dir("/var", 0, 0, 0o755),
        FileNode::dir("/var/log", 0, 0, 0o755),
        FileNode::dir("/var/log/apache", 0, 0, 0o755),
        FileNode::dir("/tmp", 0, 0, 0o777),
    ]
}

/// Two sites served by a module-mode interpreter under the webserver
/// account: world-traversable home directories, group-readable docroots,
/// webserver-writable upload directories, one shared root-owned access
/// log and shared `/tmp` session storage. Every cross-tenant attack is
/// feasible here.
pub fn default_insecure() -> Scenario {
    let mut nodes = system_dirs();
    for (home, uid) in [("/home/website1", 1001), ("/home/website2", 1002)] {
        nodes.push(FileNode::dir(home, 0, 0, 0o755));
        nodes.push(FileNode::dir(format!("{home}/public_html"), uid, 33, 0o750));
        nodes.push(FileNode::file(format!("{home}/public_html/config.php"), uid, 33, 0o640));
        nodes.push(FileNode::dir(format!("{home}/public_html/uploads"), uid, 33, 0o770));
        nodes.push(FileNode::file(format!("{home}/public_html/uploads/avatar.png"), 33, 33, 0o664));
    }
    nodes.push(FileNode::file("/var/log/apache/access_log", 0, 0, 0o644));
    nodes.push(FileNode::file("/var/log/apache/error_log", 0, 0, 0o644));
    nodes.push(FileNode::file("/tmp/sess_abc123", 33, 33, 0o600));
    nodes.push(FileNode::file("/tmp/sess_def456", 33, 33, 0o600));

    let site = |id: &str, owner: &str| Site {
        id: id.to_string(),
        owner: owner.to_string(),
        server_name: id.to_string(),
        docroot: format!("/home/{id}/public_html"),
        error_log: SHARED_ERROR_LOG.to_string(),
        access_log: SHARED_ACCESS_LOG.to_string(),
        session_dir: "/tmp".to_string(),
        annotations: annotations_all(),
        extra_vhost_lines: Vec::new(),
    };

    Scenario {
        principals: base_principals(),
        fs: FsSnapshot::from_nodes(nodes),
        host: HostConfig {
            mode: ExecMode::ApacheModule,
            webserver: WEBSERVER.to_string(),
            safe_mode: false,
            open_basedir: BTreeMap::new(),
            userdir_enabled: true,
            local_traffic_filtered: false,
            shared_access_log: Some(SHARED_ACCESS_LOG.to_string()),
            recommended_mode: None,
            sites: vec![site("website1", "web1"), site("website2", "web2")],
        },
    }
}

/// The hardened form of [`default_insecure`]: per-site worker identities
/// (ITK), per-site log and session directories with owner-only group
/// permissions, per-site open_basedir, filtered local traffic and userdir
/// URLs disabled. Stale world-readable artifacts (`/tmp` sessions, the old
/// shared logs) are left in place; they are outside every configured path.
pub fn secure() -> Scenario {
    let mut nodes = system_dirs();
    for (home, uid, sess) in
        [("/home/website1", 1001, "sess_abc123"), ("/home/website2", 1002, "sess_def456")]
    {
        let gid = uid;
        nodes.push(FileNode::dir(home, uid, gid, 0o750));
        nodes.push(FileNode::dir(format!("{home}/public_html"), uid, gid, 0o750));
        nodes.push(FileNode::file(format!("{home}/public_html/config.php"), uid, gid, 0o640));
        nodes.push(FileNode::dir(format!("{home}/public_html/uploads"), uid, gid, 0o770));
        nodes.push(FileNode::file(format!("{home}/public_html/uploads/avatar.png"), uid, gid, 0o664));
        nodes.push(FileNode::dir(format!("{home}/log"), uid, gid, 0o750));
        nodes.push(FileNode::file(format!("{home}/log/error_log"), uid, gid, 0o640));
        nodes.push(FileNode::file(format!("{home}/log/access_log"), uid, gid, 0o640));
        nodes.push(FileNode::dir(format!("{home}/session"), uid, gid, 0o750));
        nodes.push(FileNode::file(format!("{home}/session/{sess}"), uid, gid, 0o600));
    }
    // Stale shared artifacts from before the hardening.
    nodes.push(FileNode::file("/var/log/apache/access_log", 0, 0, 0o644));
    nodes.push(FileNode::file("/var/log/apache/error_log", 0, 0, 0o644));
    nodes.push(FileNode::file("/tmp/sess_old999", 33, 33, 0o600));

    let site = |id: &str, owner: &str| Site {
        id: id.to_string(),
        owner: owner.to_string(),
        server_name: id.to_string(),
        docroot: format!("/home/{id}/public_html"),
        error_log: format!("/home/{id}/log/error_log"),
        access_log: format!("/home/{id}/log/access_log"),
        session_dir: format!("/home/{id}/session"),
        annotations: annotations_all(),
        extra_vhost_lines: Vec::new(),
    };

    let mut open_basedir = BTreeMap::new();
    open_basedir.insert("website1".to_string(), vec!["/home/website1".to_string()]);
    open_basedir.insert("website2".to_string(), vec!["/home/website2".to_string()]);

    Scenario {
        principals: base_principals(),
        fs: FsSnapshot::from_nodes(nodes),
        host: HostConfig {
            mode: ExecMode::ItkMpm,
            webserver: WEBSERVER.to_string(),
            safe_mode: false,
            open_basedir,
            userdir_enabled: false,
            local_traffic_filtered: true,
            shared_access_log: None,
            recommended_mode: None,
            sites: vec![site("website1", "web1"), site("website2", "web2")],
        },
    }
}

/// One tenant alone on the host, with the same lax defaults as
/// [`default_insecure`]. No co-tenant exists, so nothing fires.
pub fn single_site() -> Scenario {
    let mut s = default_insecure();
    s.host.sites.truncate(1);
    s.principals.retain(|p| p.name != "web2");
    let fs_nodes: Vec<FileNode> =
        s.fs.iter().filter(|n| !n.path.starts_with("/home/website2")).cloned().collect();
    s.fs = FsSnapshot::from_nodes(fs_nodes);
    s
}
