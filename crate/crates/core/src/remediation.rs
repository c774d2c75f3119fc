//! Generates the hardened configuration as an ordered, idempotent action
//! plan and applies it. The target layout gives every site its own
//! `/home/<site>/{log,session}` directories with 750 owner-group
//! permissions, per-site log and session vhost directives, an owner-only
//! home and docroot, per-site open_basedir, an identity-isolating
//! execution mode, filtered local traffic and no userdir URLs.

use std::fmt;

use thiserror::Error;

use crate::model::{ExecMode, FileKind, FileNode, Mode, Principal, Scenario};
use crate::paths;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    CreateDir,
    Chown,
    Chmod,
    SetVhostDirective,
    SetMode,
    SetFlag,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::CreateDir => "create_dir",
            ActionKind::Chown => "chown",
            ActionKind::Chmod => "chmod",
            ActionKind::SetVhostDirective => "set_vhost_directive",
            ActionKind::SetMode => "set_mode",
            ActionKind::SetFlag => "set_flag",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One idempotent configuration mutation. Applying an action twice equals
/// applying it once; every target value is absolute, never relative to the
/// current state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemediationAction {
    /// Stable identifier, also used by findings as `remediation_refs`.
    pub id: String,
    pub kind: ActionKind,
    /// A path (create_dir/chown/chmod), a site id (set_vhost_directive),
    /// `mode` (set_mode) or a flag name (set_flag).
    pub target: String,
    /// `owner:group`, an octal mode, `<directive> <value>`, a mode name,
    /// or a flag value (`true`/`false`/`none`).
    pub value: String,
    /// Defense-in-depth actions not needed for a clean audit.
    pub optional: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RemediationPlan {
    pub actions: Vec<RemediationAction>,
    pub advisory_notes: Vec<String>,
}

impl RemediationPlan {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Stable action id constructors, shared with the attack engine's
/// `remediation_refs`.
pub mod ids {
    pub fn create_dir(path: &str) -> String {
        format!("create-dir:{path}")
    }
    pub fn chown(path: &str) -> String {
        format!("chown:{path}")
    }
    pub fn chmod(path: &str) -> String {
        format!("chmod:{path}")
    }
    pub fn vhost(site: &str, directive: &str) -> String {
        format!("vhost:{site}:{directive}")
    }
    pub fn set_mode() -> String {
        "set-mode".to_string()
    }
    pub fn set_flag(flag: &str) -> String {
        format!("set-flag:{flag}")
    }
}

/// The per-site hardened home directory.
pub fn site_home(site_id: &str) -> String {
    format!("/home/{site_id}")
}

/// The execution mode the plan moves the host to: the operator's
/// recommended mode when it isolates site identities, otherwise ITK.
pub fn target_mode(s: &Scenario) -> ExecMode {
    match s.host.recommended_mode {
        Some(m) if m.runs_as_site_owner() => m,
        _ => ExecMode::ItkMpm,
    }
}

fn group_name_for(s: &Scenario, owner: &Principal) -> String {
    s.principal_by_gid(owner.gid).map(|p| p.name.clone()).unwrap_or_else(|| owner.name.clone())
}

/// Computes the hardening plan for a scenario. Actions already satisfied
/// by the input are omitted, so a fully hardened scenario yields an empty
/// plan and `plan ∘ apply ∘ plan` is always empty.
pub fn plan_remediation(s: &Scenario) -> RemediationPlan {
    let mut actions: Vec<RemediationAction> = Vec::new();
    let mut notes: Vec<String> = Vec::new();

    let push = |actions: &mut Vec<RemediationAction>, id: String, kind, target: &str, value: String, optional| {
        actions.push(RemediationAction { id, kind, target: target.to_string(), value, optional });
    };

    let ensure_dir = |s: &Scenario, actions: &mut Vec<RemediationAction>, path: &str, owner_spec: &str| {
        // Missing ancestors first, as plain root-owned directories.
        for anc in paths::ancestors(path) {
            if anc != "/" && !s.fs.contains(anc) {
                push(actions, ids::create_dir(anc), ActionKind::CreateDir, anc, String::new(), false);
            }
        }
        let node = s.fs.get(path);
        if node.is_none() {
            push(actions, ids::create_dir(path), ActionKind::CreateDir, path, String::new(), false);
        }
        let needs_chown =
            node.map(|n| format_owner(s, n) != owner_spec).unwrap_or(true);
        if needs_chown {
            push(actions, ids::chown(path), ActionKind::Chown, path, owner_spec.to_string(), false);
        }
        if node.map(|n| n.mode.bits() != 0o750).unwrap_or(true) {
            push(actions, ids::chmod(path), ActionKind::Chmod, path, "750".to_string(), false);
        }
    };

    for site in &s.host.sites {
        let Some(owner) = s.principal_by_name(&site.owner) else {
            continue; // invalid scenario; validation reports it
        };
        let owner_spec = format!("{}:{}", owner.name, group_name_for(s, owner));
        let home = site_home(&site.id);
        let log_dir = format!("{home}/log");
        let session_dir = format!("{home}/session");

        ensure_dir(s, &mut actions, &home, &owner_spec);
        ensure_dir(s, &mut actions, &site.docroot, &owner_spec);
        ensure_dir(s, &mut actions, &log_dir, &owner_spec);
        ensure_dir(s, &mut actions, &session_dir, &owner_spec);

        let error_log = format!("{log_dir}/error_log");
        let access_log = format!("{log_dir}/access_log");
        if site.error_log != error_log {
            push(
                &mut actions,
                ids::vhost(&site.id, "ErrorLog"),
                ActionKind::SetVhostDirective,
                &site.id,
                format!("ErrorLog {error_log}"),
                false,
            );
        }
        if site.access_log != access_log {
            push(
                &mut actions,
                ids::vhost(&site.id, "CustomLog"),
                ActionKind::SetVhostDirective,
                &site.id,
                format!("CustomLog {access_log}"),
                false,
            );
        }
        if site.session_dir != session_dir {
            push(
                &mut actions,
                ids::vhost(&site.id, "session.save_path"),
                ActionKind::SetVhostDirective,
                &site.id,
                format!("session.save_path {session_dir}"),
                false,
            );
        }
        if s.host.basedir_for(&site.id) != Some(std::slice::from_ref(&home)) {
            push(
                &mut actions,
                ids::vhost(&site.id, "open_basedir"),
                ActionKind::SetVhostDirective,
                &site.id,
                format!("open_basedir {home}"),
                true,
            );
        }
    }

    let mode = target_mode(s);
    if let Some(requested) = s.host.recommended_mode {
        if !requested.runs_as_site_owner() {
            notes.push(format!(
                "recommended_mode {requested} keeps every site on the webserver identity and cannot isolate tenants; using {mode} instead"
            ));
        }
    }
    if s.host.mode != mode {
        push(&mut actions, ids::set_mode(), ActionKind::SetMode, "mode", mode.to_string(), false);
    }
    if !s.host.local_traffic_filtered {
        push(
            &mut actions,
            ids::set_flag("local_traffic_filtered"),
            ActionKind::SetFlag,
            "local_traffic_filtered",
            "true".to_string(),
            false,
        );
    }
    if s.host.userdir_enabled {
        push(
            &mut actions,
            ids::set_flag("userdir_enabled"),
            ActionKind::SetFlag,
            "userdir_enabled",
            "false".to_string(),
            false,
        );
    }
    if s.host.shared_access_log.is_some() {
        push(
            &mut actions,
            ids::set_flag("shared_access_log"),
            ActionKind::SetFlag,
            "shared_access_log",
            "none".to_string(),
            false,
        );
    }

    // Sites can share missing ancestors (`/home`); keep the first action per id.
    let mut seen_ids = std::collections::BTreeSet::new();
    actions.retain(|a| seen_ids.insert(a.id.clone()));

    if actions.is_empty() {
        return RemediationPlan::default();
    }

    notes.push(format!(
        "{} terminates each handler process after its request and keeps no idle per-site worker pool; peruser_mpm keeps per-site pools at a higher memory cost",
        ExecMode::ItkMpm
    ));
    notes.push(
        "suexec_cgi and suphp also switch to the owner identity but spawn an interpreter per \
         request, widely reported as a severe performance cost on busy shared hosts"
            .to_string(),
    );
    notes.push(
        "open_basedir directives are defense in depth on top of identity isolation and are \
         marked optional"
            .to_string(),
    );
    notes.push(
        "local_traffic_filtered assumes same-host HTTP traffic is routed through the same \
         WAF/NIDPS inspection as external requests"
            .to_string(),
    );

    RemediationPlan { actions, advisory_notes: notes }
}

fn format_owner(s: &Scenario, node: &FileNode) -> String {
    let owner = s.principal_by_uid(node.owner).map(|p| p.name.clone()).unwrap_or_default();
    let group = s.principal_by_gid(node.group).map(|p| p.name.clone()).unwrap_or_default();
    format!("{owner}:{group}")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("action `{action}`: site `{site}` does not exist")]
    UnknownSite { action: String, site: String },
    #[error("action `{action}`: account or group `{name}` does not exist")]
    UnknownAccount { action: String, name: String },
    #[error("action `{action}`: parent of `{path}` does not exist")]
    MissingParent { action: String, path: String },
    #[error("action `{action}`: `{path}` does not exist")]
    MissingNode { action: String, path: String },
    #[error("action `{action}`: `{path}` is not a directory")]
    NotADirectory { action: String, path: String },
    #[error("action `{action}`: {message}")]
    BadValue { action: String, message: String },
}

/// Applies a plan to a scenario, returning the mutated copy. The input is
/// untouched. Applying the same plan twice yields the same scenario.
pub fn apply_plan(s: &Scenario, plan: &RemediationPlan) -> Result<Scenario, ApplyError> {
    let mut out = s.clone();

    for action in &plan.actions {
        let aid = action.id.clone();
        match action.kind {
            ActionKind::CreateDir => {
                let path = &action.target;
                match out.fs.get(path) {
                    Some(node) if node.is_dir() => {}
                    Some(_) => {
                        return Err(ApplyError::NotADirectory { action: aid, path: path.clone() })
                    }
                    None => {
                        let parent_ok = paths::parent(path)
                            .map(|p| out.fs.is_dir(p))
                            .unwrap_or(false);
                        if !parent_ok {
                            return Err(ApplyError::MissingParent { action: aid, path: path.clone() });
                        }
                        out.fs.insert(FileNode {
                            path: path.clone(),
                            kind: FileKind::Dir,
                            owner: 0,
                            group: 0,
                            mode: Mode::new(0o755),
                        });
                    }
                }
            }
            ActionKind::Chown => {
                let (owner_name, group_name) =
                    action.value.split_once(':').ok_or_else(|| ApplyError::BadValue {
                        action: aid.clone(),
                        message: format!("expected `owner:group`, got `{}`", action.value),
                    })?;
                let owner = out
                    .principal_by_name(owner_name)
                    .ok_or_else(|| ApplyError::UnknownAccount {
                        action: aid.clone(),
                        name: owner_name.to_string(),
                    })?
                    .uid;
                let group = out
                    .principal_by_name(group_name)
                    .ok_or_else(|| ApplyError::UnknownAccount {
                        action: aid.clone(),
                        name: group_name.to_string(),
                    })?
                    .gid;
                let mut node = out
                    .fs
                    .get(&action.target)
                    .cloned()
                    .ok_or_else(|| ApplyError::MissingNode { action: aid, path: action.target.clone() })?;
                node.owner = owner;
                node.group = group;
                out.fs.insert(node);
            }
            ActionKind::Chmod => {
                let bits = u16::from_str_radix(&action.value, 8)
                    .ok()
                    .filter(|b| *b <= 0o777)
                    .ok_or_else(|| ApplyError::BadValue {
                        action: aid.clone(),
                        message: format!("invalid mode `{}`", action.value),
                    })?;
                let mut node = out
                    .fs
                    .get(&action.target)
                    .cloned()
                    .ok_or_else(|| ApplyError::MissingNode { action: aid, path: action.target.clone() })?;
                node.mode = Mode::new(bits);
                out.fs.insert(node);
            }
            ActionKind::SetVhostDirective => {
                let (directive, value) =
                    action.value.split_once(' ').ok_or_else(|| ApplyError::BadValue {
                        action: aid.clone(),
                        message: format!("expected `<directive> <value>`, got `{}`", action.value),
                    })?;
                let site_id = action.target.clone();
                if directive == "open_basedir" {
                    if out.host.site(&site_id).is_none() {
                        return Err(ApplyError::UnknownSite { action: aid, site: site_id });
                    }
                    out.host
                        .open_basedir
                        .insert(site_id, value.split(':').map(str::to_string).collect());
                    continue;
                }
                let site = out
                    .host
                    .sites
                    .iter_mut()
                    .find(|site| site.id == site_id)
                    .ok_or(ApplyError::UnknownSite { action: aid.clone(), site: site_id })?;
                match directive {
                    "ErrorLog" => site.error_log = value.to_string(),
                    "CustomLog" => site.access_log = value.to_string(),
                    "session.save_path" => site.session_dir = value.to_string(),
                    other => {
                        return Err(ApplyError::BadValue {
                            action: aid,
                            message: format!("unknown vhost directive `{other}`"),
                        })
                    }
                }
            }
            ActionKind::SetMode => {
                out.host.mode = action.value.parse().map_err(|message| ApplyError::BadValue {
                    action: aid,
                    message,
                })?;
            }
            ActionKind::SetFlag => match (action.target.as_str(), action.value.as_str()) {
                ("local_traffic_filtered", v) => {
                    out.host.local_traffic_filtered = v == "true";
                }
                ("userdir_enabled", v) => {
                    out.host.userdir_enabled = v == "true";
                }
                ("shared_access_log", "none") => {
                    out.host.shared_access_log = None;
                }
                ("shared_access_log", path) => {
                    out.host.shared_access_log = Some(path.to_string());
                }
                (flag, _) => {
                    return Err(ApplyError::BadValue {
                        action: aid,
                        message: format!("unknown flag `{flag}`"),
                    })
                }
            },
        }
    }

    Ok(out)
}

/// Renders a plan as reviewable text: shell-style filesystem commands, the
/// fully regenerated vhosts.conf, host.settings changes, and advisory
/// notes as comments. Output is byte-stable for equal inputs.
pub fn emit_remediation_script(plan: &RemediationPlan, remediated: &Scenario) -> String {
    let mut out = String::new();
    out.push_str(&format!("# remediation plan (tenantguard v{})\n", env!("CARGO_PKG_VERSION")));

    if plan.is_empty() {
        out.push_str("# no actions: the scenario already satisfies the hardened configuration\n");
        return out;
    }

    out.push_str("\n## filesystem\n");
    for a in &plan.actions {
        match a.kind {
            ActionKind::CreateDir => out.push_str(&format!("mkdir -p {}\n", a.target)),
            ActionKind::Chown => out.push_str(&format!("chown {} {}\n", a.value, a.target)),
            ActionKind::Chmod => out.push_str(&format!("chmod {} {}\n", a.value, a.target)),
            _ => {}
        }
    }

    out.push_str("\n## vhosts.conf\n");
    out.push_str(&crate::manifest::emit_vhost_text(
        &remediated.host.sites,
        &remediated.host.open_basedir,
    ));

    out.push_str("\n## host.settings\n");
    for a in &plan.actions {
        match a.kind {
            ActionKind::SetMode => out.push_str(&format!("mode = {}\n", a.value)),
            ActionKind::SetFlag => out.push_str(&format!("{} = {}\n", a.target, a.value)),
            _ => {}
        }
    }

    if !plan.advisory_notes.is_empty() {
        out.push_str("\n## notes\n");
        for note in &plan.advisory_notes {
            out.push_str(&format!("# {note}\n"));
        }
    }
    out
}
