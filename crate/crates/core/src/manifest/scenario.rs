//! Scenario directory I/O: a scenario lives in a directory holding
//! `fs.manifest`, `vhosts.conf`, `host.settings` and `principals.settings`.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::manifest::{
    emit_host_settings, emit_permissions_manifest, emit_principals, emit_vhost_text,
    parse_host_settings, parse_permissions_manifest, parse_principals, parse_vhost_text,
    ParseError,
};
use crate::model::{FsSnapshot, HostConfig, Scenario, Site};
use crate::validate_scenario;

/// The four files that make up a scenario directory.
pub const SCENARIO_FILES: [&str; 4] =
    ["fs.manifest", "vhosts.conf", "host.settings", "principals.settings"];

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read `{file}`: {source}")]
    Io {
        file: String,
        #[source]
        source: io::Error,
    },
    #[error("{file}: {source}")]
    Parse {
        file: String,
        #[source]
        source: ParseError,
    },
    #[error("{file}: {message}")]
    Assemble { file: String, message: String },
    #[error("scenario is invalid:{}", .violations.iter().map(|v| format!("\n  - {v}")).collect::<String>())]
    Invalid { violations: Vec<String> },
}

fn read(dir: &Path, file: &str) -> Result<String, LoadError> {
    std::fs::read_to_string(dir.join(file))
        .map_err(|source| LoadError::Io { file: file.to_string(), source })
}

/// Reads and assembles a scenario without validating its invariants.
/// Use [`load_scenario`] unless you specifically want to inspect an
/// invalid scenario (the `validate` CLI command does).
pub fn parse_scenario_dir(dir: &Path) -> Result<Scenario, LoadError> {
    let principals = parse_principals(&read(dir, "principals.settings")?)
        .map_err(|source| LoadError::Parse { file: "principals.settings".into(), source })?;

    let entries = parse_permissions_manifest(&read(dir, "fs.manifest")?)
        .map_err(|source| LoadError::Parse { file: "fs.manifest".into(), source })?;
    let mut fs = FsSnapshot::new();
    for entry in &entries {
        let node = entry.resolve(&principals).map_err(|message| LoadError::Assemble {
            file: "fs.manifest".into(),
            message,
        })?;
        if fs.contains(&node.path) {
            return Err(LoadError::Assemble {
                file: "fs.manifest".into(),
                message: format!("duplicate entry for `{}`", node.path),
            });
        }
        fs.insert(node);
    }

    let blocks = parse_vhost_text(&read(dir, "vhosts.conf")?)
        .map_err(|source| LoadError::Parse { file: "vhosts.conf".into(), source })?;

    let settings = parse_host_settings(&read(dir, "host.settings")?)
        .map_err(|source| LoadError::Parse { file: "host.settings".into(), source })?;

    let mut open_basedir = BTreeMap::new();
    let mut sites = Vec::with_capacity(settings.sites.len());
    let mut used = vec![false; blocks.len()];
    for decl in &settings.sites {
        let (idx, block) = blocks
            .iter()
            .enumerate()
            .find(|(_, b)| b.server_name == decl.server_name)
            .ok_or_else(|| LoadError::Assemble {
                file: "vhosts.conf".into(),
                message: format!(
                    "no vhost block with ServerName `{}` for site `{}`",
                    decl.server_name, decl.id
                ),
            })?;
        used[idx] = true;
        if let Some(prefixes) = &block.basedir {
            open_basedir.insert(decl.id.clone(), prefixes.clone());
        }
        sites.push(Site {
            id: decl.id.clone(),
            owner: decl.owner.clone(),
            server_name: block.server_name.clone(),
            docroot: block.docroot.clone(),
            error_log: block.error_log.clone(),
            access_log: block.access_log.clone(),
            session_dir: block.session_dir.clone(),
            annotations: settings.annotations.get(&decl.id).copied().unwrap_or_default(),
            extra_vhost_lines: block.extra_lines.clone(),
        });
    }
    if let Some(idx) = used.iter().position(|u| !u) {
        return Err(LoadError::Assemble {
            file: "host.settings".into(),
            message: format!(
                "vhost block `{}` has no site declaration",
                blocks[idx].server_name
            ),
        });
    }

    Ok(Scenario {
        principals,
        fs,
        host: HostConfig {
            mode: settings.mode,
            webserver: settings.webserver,
            safe_mode: settings.safe_mode,
            open_basedir,
            userdir_enabled: settings.userdir_enabled,
            local_traffic_filtered: settings.local_traffic_filtered,
            shared_access_log: settings.shared_access_log,
            recommended_mode: settings.recommended_mode,
            sites,
        },
    })
}

/// Loads a scenario directory and validates every invariant; any
/// violation aborts the load.
pub fn load_scenario(dir: &Path) -> Result<Scenario, LoadError> {
    let scenario = parse_scenario_dir(dir)?;
    let violations = validate_scenario(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(LoadError::Invalid { violations })
    }
}

#[derive(Debug, Error)]
pub enum SaveError {
    #[error("cannot write `{file}`: {source}")]
    Io {
        file: String,
        #[source]
        source: io::Error,
    },
    #[error("fs.manifest: {0}")]
    Emit(String),
}

/// Writes the four canonical scenario files into `dir` (created if
/// missing).
pub fn save_scenario(s: &Scenario, dir: &Path) -> Result<(), SaveError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| SaveError::Io { file: dir.display().to_string(), source })?;
    let nodes: Vec<_> = s.fs.iter().cloned().collect();
    let manifest = emit_permissions_manifest(&nodes, &s.principals).map_err(SaveError::Emit)?;
    let files = [
        ("fs.manifest", manifest),
        ("vhosts.conf", emit_vhost_text(&s.host.sites, &s.host.open_basedir)),
        ("host.settings", emit_host_settings(&s.host)),
        ("principals.settings", emit_principals(&s.principals)),
    ];
    for (name, content) in files {
        std::fs::write(dir.join(name), content)
            .map_err(|source| SaveError::Io { file: name.to_string(), source })?;
    }
    Ok(())
}
