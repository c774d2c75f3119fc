//! Parsing and emission of the scenario's text artifacts:
//!
//! * `fs.manifest` — one file/directory per line with owner, group and
//!   permission triples (`d rwx r-x --- web1:www-data /home/website1/public_html`),
//! * `vhosts.conf` — an Apache-subset of `<VirtualHost *:80>` blocks,
//! * `host.settings` — `key = value` host options plus `site` and
//!   `annotate` lines,
//! * `principals.settings` — `name uid gid [g1,g2,...]` account lines.
//!
//! All formats are UTF-8 with LF line endings. Parsers return structured
//! errors with line numbers and never panic; emitters produce a canonical
//! form that parses back to the same value.

mod perms;
mod scenario;
mod settings;
mod vhost;

use thiserror::Error;

pub use perms::{emit_permissions_manifest, parse_permissions_manifest, ManifestEntry};
pub use scenario::{
    load_scenario, parse_scenario_dir, save_scenario, LoadError, SaveError, SCENARIO_FILES,
};
pub use settings::{
    emit_host_settings, emit_principals, parse_host_settings, parse_principals, HostSettings,
    SiteDecl,
};
pub use vhost::{emit_vhost_text, parse_vhost_text, VhostBlock};

/// A parse failure at a specific line of one of the text formats.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError { line, message: message.into() }
    }
}
