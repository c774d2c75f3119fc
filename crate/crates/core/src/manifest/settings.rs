//! `host.settings` and `principals.settings` parsing and emission.
//!
//! host.settings grammar, one statement per line:
//!
//! ```text
//! # comment
//! mode = apache_module
//! webserver = www-data
//! safe_mode = false
//! userdir_enabled = true
//! local_traffic_filtered = false
//! shared_access_log = /var/log/apache/access_log
//! recommended_mode = itk_mpm
//!
//! site website1 owner=web1 server_name=website1
//! annotate website1 has_lfi=true
//! ```
//!
//! principals.settings lines are `name uid gid [g1,g2,...]` where the
//! optional fourth token lists supplementary gids.

use std::collections::BTreeMap;

use crate::manifest::ParseError;
use crate::model::{ExecMode, HostConfig, Principal, SiteAnnotations};

/// A `site` declaration line; the vhost block with the matching
/// ServerName supplies the rest of the site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteDecl {
    pub id: String,
    pub owner: String,
    pub server_name: String,
}

/// Everything host.settings contributes to a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostSettings {
    pub mode: ExecMode,
    pub webserver: String,
    pub safe_mode: bool,
    pub userdir_enabled: bool,
    pub local_traffic_filtered: bool,
    pub shared_access_log: Option<String>,
    pub recommended_mode: Option<ExecMode>,
    pub sites: Vec<SiteDecl>,
    pub annotations: BTreeMap<String, SiteAnnotations>,
}

fn parse_bool(v: &str, line: usize) -> Result<bool, ParseError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ParseError::new(line, format!("expected `true` or `false`, got `{other}`"))),
    }
}

fn parse_kv<'a>(token: &'a str, line: usize) -> Result<(&'a str, &'a str), ParseError> {
    token
        .split_once('=')
        .ok_or_else(|| ParseError::new(line, format!("expected `key=value`, got `{token}`")))
}

pub fn parse_host_settings(text: &str) -> Result<HostSettings, ParseError> {
    let mut mode: Option<(ExecMode, usize)> = None;
    let mut webserver: Option<String> = None;
    let mut safe_mode = false;
    let mut userdir_enabled = false;
    let mut local_traffic_filtered = false;
    let mut shared_access_log: Option<String> = None;
    let mut recommended_mode: Option<ExecMode> = None;
    let mut sites: Vec<SiteDecl> = Vec::new();
    let mut annotations: BTreeMap<String, SiteAnnotations> = BTreeMap::new();
    let mut seen: Vec<&str> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }

        if let Some(rest) = line.strip_prefix("site ") {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            let [id, kvs @ ..] = tokens.as_slice() else {
                return Err(ParseError::new(lineno, "expected `site <id> owner=.. server_name=..`"));
            };
            if sites.iter().any(|s| s.id == *id) {
                return Err(ParseError::new(lineno, format!("duplicate site declaration `{id}`")));
            }
            let mut owner = None;
            let mut server_name = None;
            for kv in kvs {
                match parse_kv(kv, lineno)? {
                    ("owner", v) => owner = Some(v.to_string()),
                    ("server_name", v) => server_name = Some(v.to_string()),
                    (k, _) => {
                        return Err(ParseError::new(lineno, format!("unknown site attribute `{k}`")))
                    }
                }
            }
            let owner = owner
                .ok_or_else(|| ParseError::new(lineno, format!("site `{id}` is missing `owner=`")))?;
            let server_name = server_name.ok_or_else(|| {
                ParseError::new(lineno, format!("site `{id}` is missing `server_name=`"))
            })?;
            sites.push(SiteDecl { id: id.to_string(), owner, server_name });
            continue;
        }

        if let Some(rest) = line.strip_prefix("annotate ") {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            let [id, kv] = tokens.as_slice() else {
                return Err(ParseError::new(lineno, "expected `annotate <site> <key>=<bool>`"));
            };
            if !sites.iter().any(|s| s.id == *id) {
                return Err(ParseError::new(
                    lineno,
                    format!("annotate references undeclared site `{id}` (declare it first)"),
                ));
            }
            let ann = annotations.entry(id.to_string()).or_default();
            let (key, value) = parse_kv(kv, lineno)?;
            let value = parse_bool(value, lineno)?;
            match key {
                "has_lfi" => ann.has_lfi = value,
                "csrf_in_session" => ann.csrf_in_session = value,
                "uploads_writable_by_webserver" => ann.uploads_writable_by_webserver = value,
                other => {
                    return Err(ParseError::new(lineno, format!("unknown annotation key `{other}`")))
                }
            }
            continue;
        }

        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| ParseError::new(lineno, format!("unrecognized line `{line}`")))?;
        if seen.contains(&key) {
            return Err(ParseError::new(lineno, format!("duplicate key `{key}`")));
        }
        match key {
            "mode" => {
                let m = value.parse::<ExecMode>().map_err(|e| ParseError::new(lineno, e))?;
                mode = Some((m, lineno));
                seen.push("mode");
            }
            "webserver" => {
                webserver = Some(value.to_string());
                seen.push("webserver");
            }
            "safe_mode" => {
                safe_mode = parse_bool(value, lineno)?;
                seen.push("safe_mode");
            }
            "userdir_enabled" => {
                userdir_enabled = parse_bool(value, lineno)?;
                seen.push("userdir_enabled");
            }
            "local_traffic_filtered" => {
                local_traffic_filtered = parse_bool(value, lineno)?;
                seen.push("local_traffic_filtered");
            }
            "shared_access_log" => {
                shared_access_log = match value {
                    "none" => None,
                    path => Some(path.to_string()),
                };
                seen.push("shared_access_log");
            }
            "recommended_mode" => {
                recommended_mode =
                    Some(value.parse::<ExecMode>().map_err(|e| ParseError::new(lineno, e))?);
                seen.push("recommended_mode");
            }
            other => return Err(ParseError::new(lineno, format!("unknown key `{other}`"))),
        }
    }

    let (mode, _) = mode.ok_or_else(|| ParseError::new(0, "missing required key `mode`"))?;
    let webserver =
        webserver.ok_or_else(|| ParseError::new(0, "missing required key `webserver`"))?;

    Ok(HostSettings {
        mode,
        webserver,
        safe_mode,
        userdir_enabled,
        local_traffic_filtered,
        shared_access_log,
        recommended_mode,
        sites,
        annotations,
    })
}

/// Canonical host.settings emission for a host config.
pub fn emit_host_settings(host: &HostConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("mode = {}\n", host.mode));
    out.push_str(&format!("webserver = {}\n", host.webserver));
    out.push_str(&format!("safe_mode = {}\n", host.safe_mode));
    out.push_str(&format!("userdir_enabled = {}\n", host.userdir_enabled));
    out.push_str(&format!("local_traffic_filtered = {}\n", host.local_traffic_filtered));
    if let Some(path) = &host.shared_access_log {
        out.push_str(&format!("shared_access_log = {path}\n"));
    }
    if let Some(mode) = host.recommended_mode {
        out.push_str(&format!("recommended_mode = {mode}\n"));
    }
    out.push('\n');
    for site in &host.sites {
        out.push_str(&format!(
            "site {} owner={} server_name={}\n",
            site.id, site.owner, site.server_name
        ));
    }
    out.push('\n');
    for site in &host.sites {
        let a = site.annotations;
        out.push_str(&format!("annotate {} has_lfi={}\n", site.id, a.has_lfi));
        out.push_str(&format!("annotate {} csrf_in_session={}\n", site.id, a.csrf_in_session));
        out.push_str(&format!(
            "annotate {} uploads_writable_by_webserver={}\n",
            site.id, a.uploads_writable_by_webserver
        ));
    }
    out
}

/// Parses `name uid gid [g1,g2,...]` account lines.
pub fn parse_principals(text: &str) -> Result<Vec<Principal>, ParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let (name, uid, gid, extra) = match tokens.as_slice() {
            [name, uid, gid] => (*name, *uid, *gid, None),
            [name, uid, gid, extra] => (*name, *uid, *gid, Some(*extra)),
            _ => {
                return Err(ParseError::new(
                    lineno,
                    format!("expected `name uid gid [g1,g2,...]`, got `{line}`"),
                ))
            }
        };
        let uid: u32 = uid
            .parse()
            .map_err(|_| ParseError::new(lineno, format!("invalid uid `{uid}`")))?;
        let gid: u32 = gid
            .parse()
            .map_err(|_| ParseError::new(lineno, format!("invalid gid `{gid}`")))?;
        let mut groups = Vec::new();
        if let Some(extra) = extra {
            for g in extra.split(',') {
                groups.push(
                    g.parse::<u32>()
                        .map_err(|_| ParseError::new(lineno, format!("invalid gid `{g}`")))?,
                );
            }
        }
        out.push(Principal::new(name, uid, gid, &groups));
    }
    Ok(out)
}

/// Canonical principals.settings emission, in input order; supplementary
/// groups beyond the primary gid are listed comma-separated.
pub fn emit_principals(principals: &[Principal]) -> String {
    let mut out = String::new();
    for p in principals {
        let extras: Vec<String> =
            p.groups.iter().filter(|g| **g != p.gid).map(u32::to_string).collect();
        if extras.is_empty() {
            out.push_str(&format!("{} {} {}\n", p.name, p.uid, p.gid));
        } else {
            out.push_str(&format!("{} {} {} {}\n", p.name, p.uid, p.gid, extras.join(",")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SETTINGS: &str = "\
# host settings
mode = apache_module
webserver = www-data
safe_mode = false
userdir_enabled = true
local_traffic_filtered = false
shared_access_log = /var/log/apache/access_log

site website1 owner=web1 server_name=website1
site website2 owner=web2 server_name=website2

annotate website1 has_lfi=true
annotate website1 csrf_in_session=true
annotate website1 uploads_writable_by_webserver=true
annotate website2 has_lfi=false
";

    #[test]
    fn parses_full_settings() {
        let s = parse_host_settings(SETTINGS).unwrap();
        assert_eq!(s.mode, ExecMode::ApacheModule);
        assert_eq!(s.webserver, "www-data");
        assert!(s.userdir_enabled);
        assert!(!s.local_traffic_filtered);
        assert_eq!(s.shared_access_log.as_deref(), Some("/var/log/apache/access_log"));
        assert_eq!(s.sites.len(), 2);
        assert_eq!(s.sites[0], SiteDecl {
            id: "website1".into(),
            owner: "web1".into(),
            server_name: "website1".into()
        });
        let a1 = s.annotations.get("website1").unwrap();
        assert!(a1.has_lfi && a1.csrf_in_session && a1.uploads_writable_by_webserver);
        let a2 = s.annotations.get("website2").unwrap();
        assert!(!a2.has_lfi);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_bools() {
        assert!(parse_host_settings("mode = apache_module\nwebserver = w\nbogus = 1\n")
            .unwrap_err()
            .message
            .contains("unknown key"));
        assert!(parse_host_settings("mode = apache_module\nwebserver = w\nsafe_mode = yes\n")
            .unwrap_err()
            .message
            .contains("expected `true` or `false`"));
        assert!(parse_host_settings("webserver = w\n").unwrap_err().message.contains("`mode`"));
        let err = parse_host_settings("mode = php\nwebserver = w\n").unwrap_err();
        assert!(err.message.contains("unknown execution mode"));
    }

    #[test]
    fn annotate_requires_declared_site() {
        let text = "mode = cgi\nwebserver = w\nannotate nosuch has_lfi=true\n";
        let err = parse_host_settings(text).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("undeclared site"));
    }

    #[test]
    fn principals_round_trip() {
        let text = "root 0 0\nwww-data 33 33\nweb1 1001 1001 33,2000\n";
        let ps = parse_principals(text).unwrap();
        assert_eq!(ps.len(), 3);
        assert_eq!(ps[2].groups.iter().copied().collect::<Vec<u32>>(), vec![33, 1001, 2000]);
        assert_eq!(emit_principals(&ps), text);
    }

    #[test]
    fn principal_parse_errors_carry_line_numbers() {
        let err = parse_principals("root 0 0\nweb1 one 1001\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(parse_principals("short 1\n").is_err());
    }
}
