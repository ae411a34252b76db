//! Flat `key = value` config files and their merge into the argument list.
//!
//! Values from the environment and the config file are turned into flags
//! placed ahead of the user's own flags; every argument overrides earlier
//! occurrences of itself, so the precedence is flags > config > env >
//! built-in defaults.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use crate::Error;

pub const SEED_ENV: &str = "EDWARDS_SEED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// skipped, and `_` in keys is read as `-`.
pub fn parse(text: &str) -> Result<Vec<Entry>, String> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(format!("line {line}: expected `key = value`"));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(format!("line {line}: bad key `{key}`"));
        }
        if value.is_empty() {
            return Err(format!("line {line}: empty value for `{key}`"));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(format!("line {line}: `{key}` already set on line {}", prev.line));
        }
        entries.push(Entry { key, value, line });
    }
    Ok(entries)
}

pub fn load(path: &Path) -> Result<Vec<Entry>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text).map_err(|m| Error::Usage(format!("config {}: {m}", path.display())))
}

/// What a subcommand accepts: its long option names, and which of them are
/// plain switches.
#[derive(Debug, Clone, Default)]
pub struct KnownArgs {
    pub options: BTreeSet<String>,
    pub switches: BTreeSet<String>,
}

/// Flags for the config entries and the seed from the environment, in
/// the order they must precede the user's flags.
pub fn injected_flags(
    entries: &[Entry],
    known: &KnownArgs,
    env_seed: Option<String>,
    origin: &Path,
) -> Result<Vec<OsString>, Error> {
    let mut out = Vec::new();
    if let Some(seed) = env_seed {
        if known.options.contains("seed") {
            out.push("--seed".into());
            out.push(seed.into());
        }
    }
    for e in entries {
        let bad = |m: String| Error::Usage(format!("config {} line {}: {m}", origin.display(), e.line));
        if e.key == "config" {
            return Err(bad("`config` cannot be set from a config file".into()));
        }
        if known.switches.contains(&e.key) {
            match e.value.as_str() {
                "true" => out.push(format!("--{}", e.key).into()),
                "false" => {}
                v => return Err(bad(format!("`{}` takes true or false, got `{v}`", e.key))),
            }
        } else if known.options.contains(&e.key) {
            out.push(format!("--{}", e.key).into());
            out.push(e.value.clone().into());
        } else {
            return Err(bad(format!("unknown key `{}`", e.key)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn known() -> KnownArgs {
        KnownArgs {
            options: ["seed", "n", "h-max"].iter().map(|s| s.to_string()).collect(),
            switches: ["json"].iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn parses_comments_and_underscores() {
        let e = parse("# header\nn = 100  # paths\n\nh_max=12.5\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(
            (e[1].key.as_str(), e[1].value.as_str(), e[1].line),
            ("h-max", "12.5", 4)
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("n 100").is_err());
        assert!(parse("n =").is_err());
        assert!(parse("n = 1\nn = 2").unwrap_err().contains("line 1"));
        assert!(parse("b@d = 1").is_err());
    }

    #[test]
    fn env_seed_comes_first_and_unknown_keys_fail() {
        let e = parse("seed = 5\njson = true").unwrap();
        let flags = injected_flags(&e, &known(), Some("9".into()), Path::new("c")).unwrap();
        let flags: Vec<String> = flags.into_iter().map(|f| f.into_string().unwrap()).collect();
        assert_eq!(flags, ["--seed", "9", "--seed", "5", "--json"]);
        let bad = parse("paths = 3").unwrap();
        let err = injected_flags(&bad, &known(), None, Path::new("c")).unwrap_err();
        assert!(err.to_string().contains("unknown key `paths`"));
        assert!(injected_flags(&parse("json = yes").unwrap(), &known(), None, Path::new("c")).is_err());
    }
}
