//! Apache-subset virtual host parsing and emission. Only `<VirtualHost *:80>`
//! blocks are supported. The supported directives are DocumentRoot,
//! ServerName, ErrorLog, CustomLog, `php_value session.save_path` and
//! `php_admin_value open_basedir`; every other line inside a block is
//! preserved verbatim for round-tripping. The CustomLog format token is
//! accepted on input and normalized to `common` on emission.

use std::collections::BTreeMap;

use crate::manifest::ParseError;
use crate::model::Site;

/// One parsed `<VirtualHost *:80>` block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VhostBlock {
    pub server_name: String,
    pub docroot: String,
    pub error_log: String,
    pub access_log: String,
    pub session_dir: String,
    /// `php_admin_value open_basedir`, colon-separated on disk.
    pub basedir: Option<Vec<String>>,
    /// Unsupported directives, verbatim in encounter order.
    pub extra_lines: Vec<String>,
}

const OPENING: &str = "<VirtualHost *:80>";
const CLOSING: &str = "</VirtualHost>";

#[derive(Default)]
struct PartialBlock {
    opened_at: usize,
    server_name: Option<String>,
    docroot: Option<String>,
    error_log: Option<String>,
    access_log: Option<String>,
    session_dir: Option<String>,
    basedir: Option<Vec<String>>,
    extra_lines: Vec<String>,
}

impl PartialBlock {
    fn set(field: &mut Option<String>, name: &str, value: &str, line: usize) -> Result<(), ParseError> {
        if field.is_some() {
            return Err(ParseError::new(line, format!("duplicate directive `{name}` in block")));
        }
        *field = Some(value.to_string());
        Ok(())
    }

    fn finish(self) -> Result<VhostBlock, ParseError> {
        let at = self.opened_at;
        let require = |field: Option<String>, name: &str| {
            field.ok_or_else(|| {
                ParseError::new(at, format!("block opened at line {at} is missing `{name}`"))
            })
        };
        Ok(VhostBlock {
            server_name: require(self.server_name, "ServerName")?,
            docroot: require(self.docroot, "DocumentRoot")?,
            error_log: require(self.error_log, "ErrorLog")?,
            access_log: require(self.access_log, "CustomLog")?,
            session_dir: require(self.session_dir, "php_value session.save_path")?,
            basedir: self.basedir,
            extra_lines: self.extra_lines,
        })
    }
}

/// Parses vhost text into blocks, in input order.
pub fn parse_vhost_text(text: &str) -> Result<Vec<VhostBlock>, ParseError> {
    let mut blocks = Vec::new();
    let mut current: Option<PartialBlock> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();

        let Some(block) = current.as_mut() else {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let normalized = line.split_whitespace().collect::<Vec<_>>().join(" ");
            if normalized == OPENING {
                current = Some(PartialBlock { opened_at: lineno, ..PartialBlock::default() });
                continue;
            }
            if normalized.starts_with("<VirtualHost") {
                return Err(ParseError::new(lineno, format!("only `{OPENING}` blocks are supported")));
            }
            if normalized == CLOSING {
                return Err(ParseError::new(lineno, format!("`{CLOSING}` without an open block")));
            }
            return Err(ParseError::new(lineno, format!("directive outside a vhost block: `{line}`")));
        };

        if line == CLOSING {
            let done = current.take().expect("block is open");
            blocks.push(done.finish()?);
            continue;
        }

        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["DocumentRoot", v] => PartialBlock::set(&mut block.docroot, "DocumentRoot", v, lineno)?,
            ["ServerName", v] => PartialBlock::set(&mut block.server_name, "ServerName", v, lineno)?,
            ["ErrorLog", v] => PartialBlock::set(&mut block.error_log, "ErrorLog", v, lineno)?,
            ["CustomLog", v] | ["CustomLog", v, _] => {
                PartialBlock::set(&mut block.access_log, "CustomLog", v, lineno)?
            }
            ["php_value", "session.save_path", v] => {
                PartialBlock::set(&mut block.session_dir, "php_value session.save_path", v, lineno)?
            }
            ["php_admin_value", "open_basedir", v] => {
                if block.basedir.is_some() {
                    return Err(ParseError::new(
                        lineno,
                        "duplicate directive `php_admin_value open_basedir` in block",
                    ));
                }
                block.basedir = Some(v.split(':').map(str::to_string).collect());
            }
            _ => block.extra_lines.push(raw.to_string()),
        }
    }

    if let Some(block) = current {
        return Err(ParseError::new(
            block.opened_at,
            format!("block opened at line {} is never closed", block.opened_at),
        ));
    }
    Ok(blocks)
}

/// Emits one block per site in input order, directives in canonical order
/// (DocumentRoot, ServerName, ErrorLog, CustomLog, session.save_path,
/// open_basedir when configured), then any preserved opaque lines.
pub fn emit_vhost_text(sites: &[Site], open_basedir: &BTreeMap<String, Vec<String>>) -> String {
    let mut out = String::new();
    for (i, site) in sites.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(OPENING);
        out.push('\n');
        out.push_str(&format!("  DocumentRoot {}\n", site.docroot));
        out.push_str(&format!("  ServerName {}\n", site.server_name));
        out.push_str(&format!("  ErrorLog {}\n", site.error_log));
        out.push_str(&format!("  CustomLog {} common\n", site.access_log));
        out.push_str(&format!("  php_value session.save_path {}\n", site.session_dir));
        if let Some(prefixes) = open_basedir.get(&site.id) {
            out.push_str(&format!("  php_admin_value open_basedir {}\n", prefixes.join(":")));
        }
        for raw in &site.extra_vhost_lines {
            out.push_str(raw);
            out.push('\n');
        }
        out.push_str(CLOSING);
        out.push('\n');
    }
    out
}
