//! `--config FILE` support: flat `key = value` lines whose keys are the long
//! flag names of the chosen subcommand. File values are spliced in right
//! after the subcommand name, so flags given on the command line win.

use std::ffi::OsString;
use std::fs;

use clap::error::ErrorKind;
use clap::{ArgAction, Command};

pub fn expand(cmd: &Command, raw: Vec<OsString>) -> Result<Vec<OsString>, clap::Error> {
    let Some(path) = find_config(&raw) else {
        return Ok(raw);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| cmd.clone().error(ErrorKind::Io, format!("cannot read config {path}: {e}")))?;
    let names: Vec<&str> = cmd.get_subcommands().map(|s| s.get_name()).collect();
    let Some(pos) = raw.iter().position(|a| a.to_str().is_some_and(|s| names.contains(&s))) else {
        return Ok(raw);
    };
    let sub = cmd.find_subcommand(raw[pos].to_str().unwrap()).unwrap();

    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| cmd.clone().error(ErrorKind::InvalidValue, format!("{path}:{}: {msg}", n + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "config" {
            return Err(bad("config files cannot nest".into()));
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| {
                cmd.clone().error(
                    ErrorKind::UnknownArgument,
                    format!("{path}:{}: unknown key `{key}` for `{}`", n + 1, sub.get_name()),
                )
            })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => return Err(bad(format!("`{key}` takes true or false"))),
            }
        } else {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        }
    }
    let mut out = raw[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&raw[pos + 1..]);
    Ok(out)
}

fn find_config(raw: &[OsString]) -> Option<String> {
    let mut it = raw.iter().filter_map(|a| a.to_str());
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(str::to_string);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}
