//! Feasibility checks for the ten cross-tenant attacks. Each check is a
//! predicate over the scenario evaluated through the access engine; a
//! satisfied predicate yields one [`Finding`] per (attacker, victim) pair
//! with the evidence chain that proves it.

use crate::access::{
    build_exec_context, descriptor_paths, php_can_access, AccessKind, DescriptorPaths,
    EvidenceStep, ExecutionContext, PermissionClass,
};
use crate::model::{FileNode, Scenario, Site};
use crate::paths;
use crate::remediation::{ids, site_home};
use crate::report::AuditReport;

/// Attacker label for host-level findings that are not tied to one tenant.
pub const ANY_TENANT: &str = "any-tenant";

/// Name of the hypothetical file an attacker plants for the LFI check.
pub const PLANTED_FILE: &str = "payload.php";

/// The ten attacks, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AttackId {
    ConfidentialityViolation,
    IntegrityViolation,
    SessionPoisoning,
    SessionSnooping,
    LogPoisoning,
    LogSnooping,
    IntensiveLfi,
    CsrfTokenPoisoning,
    FastBruteForce,
    ConvenientPhishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Critical,
    High,
    Medium,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "critical",
            Severity::High => "high",
            Severity::Medium => "medium",
        }
    }
}

impl AttackId {
    pub const ALL: [AttackId; 10] = [
        AttackId::ConfidentialityViolation,
        AttackId::IntegrityViolation,
        AttackId::SessionPoisoning,
        AttackId::SessionSnooping,
        AttackId::LogPoisoning,
        AttackId::LogSnooping,
        AttackId::IntensiveLfi,
        AttackId::CsrfTokenPoisoning,
        AttackId::FastBruteForce,
        AttackId::ConvenientPhishing,
    ];

    /// Stable identifier, e.g. `A5_LogPoisoning`.
    pub fn id_str(self) -> &'static str {
        match self {
            AttackId::ConfidentialityViolation => "A1_ConfidentialityViolation",
            AttackId::IntegrityViolation => "A2_IntegrityViolation",
            AttackId::SessionPoisoning => "A3_SessionPoisoning",
            AttackId::SessionSnooping => "A4_SessionSnooping",
            AttackId::LogPoisoning => "A5_LogPoisoning",
            AttackId::LogSnooping => "A6_LogSnooping",
            AttackId::IntensiveLfi => "A7_IntensiveLFI",
            AttackId::CsrfTokenPoisoning => "A8_CsrfTokenPoisoning",
            AttackId::FastBruteForce => "A9_FastBruteForce",
            AttackId::ConvenientPhishing => "A10_ConvenientPhishing",
        }
    }

    /// Short code, `A1` .. `A10`.
    pub fn code(self) -> &'static str {
        self.id_str().split('_').next().expect("id has a code prefix")
    }

    /// Write-capable attacks are critical, read-capable high, and the
    /// host-level facilitation conditions medium.
    pub fn severity(self) -> Severity {
        match self {
            AttackId::IntegrityViolation
            | AttackId::SessionPoisoning
            | AttackId::LogPoisoning
            | AttackId::CsrfTokenPoisoning => Severity::Critical,
            AttackId::ConfidentialityViolation
            | AttackId::SessionSnooping
            | AttackId::LogSnooping
            | AttackId::IntensiveLfi => Severity::High,
            AttackId::FastBruteForce | AttackId::ConvenientPhishing => Severity::Medium,
        }
    }

    /// Accepts a short code (`A5`) or a full id (`A5_LogPoisoning`),
    /// case-insensitively.
    pub fn parse(s: &str) -> Option<AttackId> {
        let needle = s.to_ascii_lowercase();
        AttackId::ALL.into_iter().find(|id| {
            id.code().to_ascii_lowercase() == needle || id.id_str().to_ascii_lowercase() == needle
        })
    }
}

/// One feasible attack instance with the evidence that proves it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub attack: AttackId,
    /// Site id, or [`ANY_TENANT`] for host-level conditions.
    pub attacker: String,
    /// Victim site id; `None` only for the host-level attacks A9/A10.
    pub victim: Option<String>,
    pub evidence: Vec<EvidenceStep>,
    pub severity: Severity,
    pub remediation_refs: Vec<String>,
}

struct SiteCtx<'a> {
    site: &'a Site,
    ctx: ExecutionContext,
    fds: DescriptorPaths,
}

fn site_ctxs(s: &Scenario) -> Vec<SiteCtx<'_>> {
    s.host
        .sites
        .iter()
        .map(|site| {
            let ctx = build_exec_context(s, site);
            let fds = descriptor_paths(&ctx);
            SiteCtx { site, ctx, fds }
        })
        .collect()
}

fn allowed(s: &Scenario, ctx: &ExecutionContext, path: &str, kind: AccessKind) -> Option<Vec<EvidenceStep>> {
    match php_can_access(ctx, &s.fs, path, kind) {
        Ok(d) if d.allowed => Some(d.chain),
        _ => None,
    }
}

/// Files in path order strictly below `dir`.
fn files_under<'a>(s: &'a Scenario, dir: &'a str) -> impl Iterator<Item = &'a FileNode> {
    s.fs.nodes_under(dir).filter(|n| !n.is_dir())
}

/// Log paths whose contents concern the victim: its own two logs plus the
/// host-wide shared access log when configured.
fn victim_logs(s: &Scenario, victim: &Site) -> Vec<String> {
    let mut out = vec![victim.access_log.clone(), victim.error_log.clone()];
    if let Some(shared) = &s.host.shared_access_log {
        out.push(shared.clone());
    }
    out.dedup();
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|p| seen.insert(p.clone()));
    out
}

fn fd_step(path: &str, check: &str) -> EvidenceStep {
    EvidenceStep::new(path, check, PermissionClass::Fd, true)
}

/// A1: some file under the victim's docroot is readable.
fn confidentiality(s: &Scenario, a: &SiteCtx, b: &SiteCtx) -> Option<Vec<EvidenceStep>> {
    files_under(s, &b.site.docroot)
        .find_map(|node| allowed(s, &a.ctx, &node.path, AccessKind::Read))
}

/// A2: the victim's application keeps webserver-writable paths under its
/// docroot and the attacker can write an existing node or create files in
/// a directory there (the docroot itself counts).
fn integrity(s: &Scenario, a: &SiteCtx, b: &SiteCtx) -> Option<Vec<EvidenceStep>> {
    if !b.site.annotations.uploads_writable_by_webserver {
        return None;
    }
    let docroot_node = s.fs.get(&b.site.docroot);
    let candidates = docroot_node.into_iter().chain(s.fs.nodes_under(&b.site.docroot));
    for node in candidates {
        let kind = if node.is_dir() { AccessKind::CreateIn } else { AccessKind::Write };
        if let Some(chain) = allowed(s, &a.ctx, &node.path, kind) {
            return Some(chain);
        }
    }
    None
}

/// A3: the attacker can create files in the victim's session directory.
fn session_poisoning(s: &Scenario, a: &SiteCtx, b: &SiteCtx) -> Option<Vec<EvidenceStep>> {
    allowed(s, &a.ctx, &b.site.session_dir, AccessKind::CreateIn)
}

/// A4: some session file of the victim is readable or writable.
fn session_snooping(s: &Scenario, a: &SiteCtx, b: &SiteCtx) -> Option<Vec<EvidenceStep>> {
    for node in files_under(s, &b.site.session_dir) {
        if let Some(chain) = allowed(s, &a.ctx, &node.path, AccessKind::Read) {
            return Some(chain);
        }
        if let Some(chain) = allowed(s, &a.ctx, &node.path, AccessKind::Write) {
            return Some(chain);
        }
    }
    None
}

/// A5: one of the victim's logs is writable, through an inherited
/// descriptor or plain file permissions.
fn log_poisoning(s: &Scenario, a: &SiteCtx, b: &SiteCtx) -> Option<Vec<EvidenceStep>> {
    for log in victim_logs(s, b.site) {
        if a.fds.writable.contains(&log) {
            return Some(vec![fd_step(&log, "fd_write_append")]);
        }
        if s.fs.contains(&log) {
            if let Some(chain) = allowed(s, &a.ctx, &log, AccessKind::Write) {
                return Some(chain);
            }
        }
    }
    None
}

/// A6: one of the victim's logs is readable; any inherited descriptor can
/// be reopened read-only.
fn log_snooping(s: &Scenario, a: &SiteCtx, b: &SiteCtx) -> Option<Vec<EvidenceStep>> {
    for log in victim_logs(s, b.site) {
        if a.fds.readable.contains(&log) {
            return Some(vec![fd_step(&log, "fd_readable")]);
        }
        if s.fs.contains(&log) {
            if let Some(chain) = allowed(s, &a.ctx, &log, AccessKind::Read) {
                return Some(chain);
            }
        }
    }
    None
}

/// A7: the victim has an LFI bug and some directory exists where the
/// attacker can plant a file (owned by the attacker's identity, mode 644)
/// that the victim's scripts can then read and include.
fn intensive_lfi(s: &Scenario, a: &SiteCtx, b: &SiteCtx) -> Option<Vec<EvidenceStep>> {
    if !b.site.annotations.has_lfi {
        return None;
    }
    for dir in s.fs.iter().filter(|n| n.is_dir()) {
        let Some(mut chain) = allowed(s, &a.ctx, &dir.path, AccessKind::CreateIn) else {
            continue;
        };
        let planted_path = paths::join(&dir.path, PLANTED_FILE);
        let planted =
            FileNode::file(planted_path.clone(), a.ctx.identity.uid, a.ctx.identity.gid, 0o644);
        let fs_with_planted = s.fs.with_node(planted);
        match php_can_access(&b.ctx, &fs_with_planted, &planted_path, AccessKind::Read) {
            Ok(d) if d.allowed => {
                chain.extend(d.chain);
                return Some(chain);
            }
            _ => {}
        }
    }
    None
}

/// A8: CSRF tokens live in the victim's session files and one of the
/// session attacks works against it.
fn csrf_token_poisoning(s: &Scenario, a: &SiteCtx, b: &SiteCtx) -> Option<Vec<EvidenceStep>> {
    if !b.site.annotations.csrf_in_session {
        return None;
    }
    session_poisoning(s, a, b).or_else(|| session_snooping(s, a, b))
}

fn flag_finding(attack: AttackId, check: &str, refs: Vec<String>) -> Finding {
    Finding {
        attack,
        attacker: ANY_TENANT.to_string(),
        victim: None,
        evidence: vec![EvidenceStep::new("host.settings", check, PermissionClass::Flag, true)],
        severity: attack.severity(),
        remediation_refs: refs,
    }
}

fn refs_for(attack: AttackId, attacker: &str, victim: &str) -> Vec<String> {
    match attack {
        AttackId::ConfidentialityViolation | AttackId::IntegrityViolation | AttackId::IntensiveLfi => vec![
            ids::set_mode(),
            ids::vhost(attacker, "open_basedir"),
            ids::chmod(&site_home(victim)),
        ],
        AttackId::SessionPoisoning | AttackId::SessionSnooping | AttackId::CsrfTokenPoisoning => vec![
            ids::set_mode(),
            ids::vhost(victim, "session.save_path"),
            ids::chmod(&format!("{}/session", site_home(victim))),
        ],
        AttackId::LogPoisoning | AttackId::LogSnooping => vec![
            ids::set_mode(),
            ids::vhost(victim, "ErrorLog"),
            ids::vhost(victim, "CustomLog"),
            ids::set_flag("shared_access_log"),
        ],
        AttackId::FastBruteForce => vec![ids::set_flag("local_traffic_filtered")],
        AttackId::ConvenientPhishing => vec![ids::set_flag("userdir_enabled")],
    }
}

/// Evaluates one attack over the whole scenario. Findings are ordered by
/// (attacker, victim).
pub fn check_attack(s: &Scenario, id: AttackId) -> Vec<Finding> {
    let ctxs = site_ctxs(s);
    let mut findings = Vec::new();

    match id {
        AttackId::FastBruteForce => {
            if ctxs.len() >= 2 && !s.host.local_traffic_filtered {
                findings.push(flag_finding(
                    id,
                    "local_traffic_filtered=false",
                    refs_for(id, ANY_TENANT, ANY_TENANT),
                ));
            }
        }
        AttackId::ConvenientPhishing => {
            if ctxs.len() >= 2 && s.host.userdir_enabled {
                findings.push(flag_finding(
                    id,
                    "userdir_enabled=true",
                    refs_for(id, ANY_TENANT, ANY_TENANT),
                ));
            }
        }
        _ => {
            let predicate = |a: &SiteCtx, b: &SiteCtx| -> Option<Vec<EvidenceStep>> {
                match id {
                    AttackId::ConfidentialityViolation => confidentiality(s, a, b),
                    AttackId::IntegrityViolation => integrity(s, a, b),
                    AttackId::SessionPoisoning => session_poisoning(s, a, b),
                    AttackId::SessionSnooping => session_snooping(s, a, b),
                    AttackId::LogPoisoning => log_poisoning(s, a, b),
                    AttackId::LogSnooping => log_snooping(s, a, b),
                    AttackId::IntensiveLfi => intensive_lfi(s, a, b),
                    AttackId::CsrfTokenPoisoning => csrf_token_poisoning(s, a, b),
                    AttackId::FastBruteForce | AttackId::ConvenientPhishing => unreachable!(),
                }
            };
            for a in &ctxs {
                for b in &ctxs {
                    if a.site.id == b.site.id {
                        continue;
                    }
                    if let Some(evidence) = predicate(a, b) {
                        findings.push(Finding {
                            attack: id,
                            attacker: a.site.id.clone(),
                            victim: Some(b.site.id.clone()),
                            evidence,
                            severity: id.severity(),
                            remediation_refs: refs_for(id, &a.site.id, &b.site.id),
                        });
                    }
                }
            }
        }
    }

    findings.sort_by(|x, y| (&x.attacker, &x.victim).cmp(&(&y.attacker, &y.victim)));
    findings
}

/// Runs every attack check and assembles the full report, ordered by
/// (attack, attacker, victim). Output is deterministic.
pub fn audit_all(s: &Scenario) -> AuditReport {
    let mut findings = Vec::new();
    for id in AttackId::ALL {
        findings.extend(check_attack(s, id));
    }
    AuditReport::new(s, findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::model::ExecMode;
    use std::collections::BTreeSet;

    fn attack_codes(s: &Scenario) -> BTreeSet<&'static str> {
        AttackId::ALL
            .into_iter()
            .filter(|id| !check_attack(s, *id).is_empty())
            .map(|id| id.code())
            .collect()
    }

    fn all_codes() -> BTreeSet<&'static str> {
        AttackId::ALL.into_iter().map(|id| id.code()).collect()
    }

    #[test]
    fn ids_are_stable() {
        assert_eq!(AttackId::ALL.len(), 10);
        assert_eq!(AttackId::ConfidentialityViolation.id_str(), "A1_ConfidentialityViolation");
        assert_eq!(AttackId::ConvenientPhishing.id_str(), "A10_ConvenientPhishing");
        assert_eq!(AttackId::LogPoisoning.code(), "A5");
        assert_eq!(AttackId::parse("a6"), Some(AttackId::LogSnooping));
        assert_eq!(AttackId::parse("A7_IntensiveLFI"), Some(AttackId::IntensiveLfi));
        assert_eq!(AttackId::parse("A99"), None);
    }

    #[test]
    fn default_fixture_is_vulnerable_to_all_ten() {
        let s = fixture::default_insecure();
        assert_eq!(attack_codes(&s), all_codes());
    }

    #[test]
    fn secure_fixture_yields_no_findings() {
        let s = fixture::secure();
        for id in AttackId::ALL {
            assert!(check_attack(&s, id).is_empty(), "{} fired", id.id_str());
        }
    }

    #[test]
    fn single_site_yields_no_findings() {
        let s = fixture::single_site();
        for id in AttackId::ALL {
            assert!(check_attack(&s, id).is_empty(), "{} fired", id.id_str());
        }
    }

    #[test]
    fn confidentiality_fires_both_directions_via_group_class() {
        let s = fixture::default_insecure();
        let findings = check_attack(&s, AttackId::ConfidentialityViolation);
        let pairs: Vec<(&str, &str)> = findings
            .iter()
            .map(|f| (f.attacker.as_str(), f.victim.as_deref().unwrap()))
            .collect();
        assert_eq!(pairs, vec![("website1", "website2"), ("website2", "website1")]);

        let f = &findings[0];
        let last = f.evidence.last().unwrap();
        assert_eq!(last.check, "read");
        assert_eq!(last.class, PermissionClass::Group);
        assert!(last.path.starts_with("/home/website2/public_html/"));
        assert_eq!(f.severity, Severity::High);
    }

    #[test]
    fn cgi_mode_removes_log_poisoning_but_not_snooping() {
        let mut s = fixture::default_insecure();
        s.host.mode = ExecMode::Cgi;
        assert!(check_attack(&s, AttackId::LogPoisoning).is_empty());

        let snooping = check_attack(&s, AttackId::LogSnooping);
        assert!(!snooping.is_empty());
        // Without descriptors the evidence is a plain file-permission read.
        let f = &snooping[0];
        assert!(f.evidence.iter().all(|step| step.class != PermissionClass::Fd));
        assert_eq!(f.evidence.last().unwrap().check, "read");
    }

    #[test]
    fn module_mode_log_attacks_cite_descriptors() {
        let s = fixture::default_insecure();
        let poisoning = check_attack(&s, AttackId::LogPoisoning);
        assert!(!poisoning.is_empty());
        let f = &poisoning[0];
        assert_eq!(f.evidence.len(), 1);
        assert_eq!(f.evidence[0].class, PermissionClass::Fd);
        assert_eq!(f.evidence[0].path, "/var/log/apache/access_log");
        assert_eq!(f.severity, Severity::Critical);
    }

    #[test]
    fn annotations_gate_a2_a7_a8() {
        let mut s = fixture::default_insecure();
        for site in &mut s.host.sites {
            site.annotations.has_lfi = false;
            site.annotations.csrf_in_session = false;
            site.annotations.uploads_writable_by_webserver = false;
        }
        let expected: BTreeSet<&str> =
            ["A1", "A3", "A4", "A5", "A6", "A9", "A10"].into_iter().collect();
        assert_eq!(attack_codes(&s), expected);
    }

    #[test]
    fn session_separation_removes_exactly_a3_a4_a8() {
        let s = separate_sessions(&fixture::default_insecure());
        let mut expected = all_codes();
        for gone in ["A3", "A4", "A8"] {
            expected.remove(gone);
        }
        assert_eq!(attack_codes(&s), expected);
    }

    #[test]
    fn log_separation_removes_exactly_a5_a6() {
        let s = separate_logs(&fixture::default_insecure());
        let mut expected = all_codes();
        for gone in ["A5", "A6"] {
            expected.remove(gone);
        }
        assert_eq!(attack_codes(&s), expected);
    }

    #[test]
    fn flag_toggles_remove_exactly_their_attack() {
        let mut s = fixture::default_insecure();
        s.host.local_traffic_filtered = true;
        let mut expected = all_codes();
        expected.remove("A9");
        assert_eq!(attack_codes(&s), expected);

        let mut s = fixture::default_insecure();
        s.host.userdir_enabled = false;
        let mut expected = all_codes();
        expected.remove("A10");
        assert_eq!(attack_codes(&s), expected);
    }

    #[test]
    fn basedir_removes_docroot_crossing_attacks() {
        let mut s = fixture::default_insecure();
        for site in ["website1", "website2"] {
            s.host.open_basedir.insert(site.to_string(), vec![crate::remediation::site_home(site)]);
        }
        // Sessions and logs are outside the basedirs too, so only the
        // descriptor-based attacks and the host flags survive.
        let expected: BTreeSet<&str> = ["A5", "A6", "A9", "A10"].into_iter().collect();
        assert_eq!(attack_codes(&s), expected);
    }

    #[test]
    fn host_level_findings_use_the_any_tenant_label() {
        let s = fixture::default_insecure();
        for id in [AttackId::FastBruteForce, AttackId::ConvenientPhishing] {
            let findings = check_attack(&s, id);
            assert_eq!(findings.len(), 1);
            assert_eq!(findings[0].attacker, ANY_TENANT);
            assert_eq!(findings[0].victim, None);
            assert_eq!(findings[0].severity, Severity::Medium);
            assert!(!findings[0].evidence.is_empty());
        }
    }

    #[test]
    fn audits_are_deterministic() {
        let s = fixture::default_insecure();
        let a = audit_all(&s);
        let b = audit_all(&s);
        assert_eq!(a, b);
    }

    /// Move sessions to per-site 750 owner-group dirs, as the hardened
    /// layout does, leaving everything else untouched.
    fn separate_sessions(s: &Scenario) -> Scenario {
        let mut out = s.clone();
        for i in 0..out.host.sites.len() {
            let (id, owner) = {
                let site = &out.host.sites[i];
                (site.id.clone(), site.owner.clone())
            };
            let uid = out.principal_by_name(&owner).unwrap().uid;
            let dir = format!("/home/{id}/session");
            out.fs.insert(FileNode::dir(dir.clone(), uid, uid, 0o750));
            out.fs.insert(FileNode::file(format!("{dir}/sess_xyz"), uid, uid, 0o600));
            out.host.sites[i].session_dir = dir;
        }
        out
    }

    /// Move logs to per-site 750 owner-group dirs and drop the shared log.
    fn separate_logs(s: &Scenario) -> Scenario {
        let mut out = s.clone();
        for i in 0..out.host.sites.len() {
            let (id, owner) = {
                let site = &out.host.sites[i];
                (site.id.clone(), site.owner.clone())
            };
            let uid = out.principal_by_name(&owner).unwrap().uid;
            let dir = format!("/home/{id}/log");
            out.fs.insert(FileNode::dir(dir.clone(), uid, uid, 0o750));
            out.fs.insert(FileNode::file(format!("{dir}/error_log"), uid, uid, 0o640));
            out.fs.insert(FileNode::file(format!("{dir}/access_log"), uid, uid, 0o640));
            out.host.sites[i].error_log = format!("{dir}/error_log");
            out.host.sites[i].access_log = format!("{dir}/access_log");
        }
        out.host.shared_access_log = None;
        out
    }
}
