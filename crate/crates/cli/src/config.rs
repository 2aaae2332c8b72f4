//! `--config FILE` support: a flat `key=value` file whose keys are the long
//! flag names of the chosen subcommand. Values from the file are appended to
//! the argument list unless the flag was already given on the command line.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};
use latent_decode::dataio::{parse_key_values, read_text};

use crate::Failure;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Walks subcommand names in `args` to find the leaf command being invoked.
fn leaf_command<'a>(root: &'a Command, args: &[OsString]) -> &'a Command {
    let mut cmd = root;
    for a in args.iter().skip(1) {
        let s = a.to_string_lossy();
        if s.starts_with('-') {
            continue;
        }
        match cmd.find_subcommand(s.as_ref()) {
            Some(sub) => cmd = sub,
            None => {
                if cmd.has_subcommands() {
                    continue;
                }
                break;
            }
        }
    }
    cmd
}

fn given_on_command_line(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let prefix = format!("--{long}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag.as_str() || s.starts_with(&prefix)
    })
}

fn truthy(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

/// Returns `args` extended with the settings of the config file, if any.
pub fn merge(root: &Command, args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = read_text(path)?;
    let pairs = parse_key_values(&text, &path.display().to_string())?;
    let leaf = leaf_command(root, &args);
    let mut merged = args.clone();
    for (key, value) in pairs {
        let long = key.replace('_', "-");
        let arg = leaf
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()) && long != "config")
            .ok_or_else(|| {
                Failure::invalid(format!(
                    "{}: unknown key {key:?} for `{}`",
                    path.display(),
                    leaf.get_name()
                ))
            })?;
        if given_on_command_line(&args, &long) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => {
                let on = truthy(&value).ok_or_else(|| {
                    Failure::invalid(format!("{}: {key} expects true or false, got {value:?}", path.display()))
                })?;
                if on {
                    merged.push(format!("--{long}").into());
                }
            }
            _ => merged.push(format!("--{long}={value}").into()),
        }
    }
    Ok(merged)
}
