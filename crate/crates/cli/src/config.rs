//! `--config file.json` support: the file's keys become flags of the chosen
//! subcommand, placed before the command-line flags so that the latter win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

pub const COMMANDS: [&str; 6] = ["lr-calc", "trotter-scan", "certify", "decompose", "simulate", "geometry-check"];

/// Value of `--config` among raw arguments, if any.
fn config_path(args: &[OsString]) -> Result<Option<(usize, usize, OsString)>> {
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let value = args.get(i + 1).context("--config needs a file path")?;
            return Ok(Some((i, 2, value.clone())));
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Ok(Some((i, 1, OsString::from(v))));
        }
    }
    Ok(None)
}

fn flag(key: &str) -> OsString {
    OsString::from(format!("--{}", key.replace('_', "-")))
}

fn scalar(key: &str, v: &Value) -> Result<OsString> {
    Ok(match v {
        Value::String(s) => OsString::from(s),
        Value::Number(n) => OsString::from(n.to_string()),
        other => bail!("config key {key:?}: unsupported value {other}"),
    })
}

/// Flags equivalent to the config object.
fn config_flags(path: &Path, value: &Value) -> Result<(Option<String>, Vec<OsString>)> {
    let obj = value.as_object().with_context(|| format!("{}: top level must be a JSON object", path.display()))?;
    let mut command = None;
    let mut out = Vec::new();
    for (key, v) in obj {
        if key == "command" {
            command = Some(v.as_str().with_context(|| format!("{}: \"command\" must be a string", path.display()))?.to_string());
            continue;
        }
        match v {
            Value::Bool(true) => out.push(flag(key)),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                // Lists travel as one comma-separated value so a later flag replaces them whole.
                let parts = items.iter().map(|item| scalar(key, item)).collect::<Result<Vec<_>>>()?;
                let joined = parts.iter().map(|p| p.to_string_lossy().into_owned()).collect::<Vec<_>>().join(",");
                out.push(flag(key));
                out.push(OsString::from(joined));
            }
            other => {
                out.push(flag(key));
                out.push(scalar(key, other)?);
            }
        }
    }
    Ok((command, out))
}

/// Rewrites `args` so the config's flags follow the subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some((at, width, path)) = config_path(&args)? else {
        return Ok(args);
    };
    let path = Path::new(&path).to_path_buf();
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let (command, flags) = config_flags(&path, &value)?;

    let mut rest: Vec<OsString> = args.iter().enumerate().filter(|(i, _)| *i < at || *i >= at + width).map(|(_, a)| a.clone()).collect();
    let position = rest.iter().position(|a| COMMANDS.contains(&a.to_string_lossy().as_ref()));
    let insert_at = match (position, command) {
        (Some(p), Some(c)) if rest[p].to_string_lossy() != c => {
            bail!("config {} is for {c:?} but the command line asks for {:?}", path.display(), rest[p])
        }
        (Some(p), _) => p + 1,
        (None, Some(c)) => {
            rest.insert(1.min(rest.len()), OsString::from(c));
            2.min(rest.len())
        }
        (None, None) => bail!("no subcommand given on the command line or in config {}", path.display()),
    };
    rest.splice(insert_at..insert_at, flags);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_flags_precede_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"command": "decompose", "omega": 4, "verify": true, "coupling": [1, 0.5], "dry": false}"#).unwrap();
        let args = os(&["certdyn", "--config", path.to_str().unwrap(), "--omega", "6"]);
        let out = expand(args).unwrap();
        assert_eq!(
            out,
            os(&["certdyn", "decompose", "--coupling", "1,0.5", "--omega", "4", "--verify", "--omega", "6"])
        );
    }

    #[test]
    fn mismatched_command_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"command": "decompose"}"#).unwrap();
        let arg = format!("--config={}", path.display());
        assert!(expand(os(&["certdyn", "lr-calc", &arg])).is_err());
        assert_eq!(expand(os(&["certdyn", "decompose", &arg])).unwrap(), os(&["certdyn", "decompose"]));
    }

    #[test]
    fn malformed_config_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\n  \"omega\": ,\n}").unwrap();
        let err = expand(os(&["certdyn", "decompose", "--config", path.to_str().unwrap()])).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("bad.json") && msg.contains("line 2"), "{msg}");
    }
}
