//! `key = value` config files. Each key is the long name of a flag of the
//! invoked subcommand; values are spliced into the argument list unless the
//! same flag was given on the command line.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

/// Parses the config text into `(line, key, value)` triples.
fn parse(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), n + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            bail!("{}:{}: empty key", path.display(), n + 1);
        }
        out.push((n + 1, key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn given(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let prefix = format!("--{long}=");
    args.iter()
        .filter_map(|a| a.to_str())
        .any(|a| a == flag || a.starts_with(&prefix))
}

/// Returns `args` with the config's flags inserted right after the
/// subcommand named by `path` (e.g. `["adapters", "gradcheck"]`).
pub fn merge(args: &[OsString], root: &Command, path: &[String], file: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading config {}", file.display()))?;
    let mut cmd = root;
    for name in path {
        cmd = cmd
            .find_subcommand(name)
            .with_context(|| format!("unknown subcommand {name}"))?;
    }

    let mut extra: Vec<OsString> = Vec::new();
    for (line, key, value) in parse(&text, file)? {
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config");
        let Some(arg) = arg else {
            bail!(
                "{}:{line}: unknown key `{key}` for `{}`",
                file.display(),
                path.join(" ")
            );
        };
        if given(args, &key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => extra.push(format!("--{key}").into()),
                "false" => {}
                _ => bail!("{}:{line}: `{key}` expects true or false", file.display()),
            },
            _ => {
                extra.push(format!("--{key}").into());
                extra.push(value.into());
            }
        }
    }

    // position just past the last subcommand token
    let mut at = 1;
    for name in path {
        let found = args[at..]
            .iter()
            .position(|a| a.to_str() == Some(name.as_str()))
            .with_context(|| format!("subcommand {name} not found in arguments"))?;
        at += found + 1;
    }
    let mut merged = args[..at].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[at..]);
    Ok(merged)
}
