//! `key = value` config files, merged into the argument list ahead of the
//! user's own flags so that later command-line flags override them.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `key = value`", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("{origin}:{}: empty key", n + 1)));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Returns `args` with the config file's pairs spliced in as flags right
/// after the subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Core(mnn_core::MnnError::Io { path: path.into(), source: e }))?;
    let pairs = parse_pairs(&text, &path.display().to_string())?;

    let cmd = Cli::command();
    let Some((pos, sub)) = args.iter().enumerate().skip(1).find_map(|(i, a)| {
        let name = a.to_str()?;
        cmd.find_subcommand(name).map(|s| (i, s))
    }) else {
        return Ok(args);
    };

    let mut injected = Vec::new();
    for (key, value) in pairs {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| {
                CliError::Usage(format!("{}: unknown key `{key}` for `{}`", path.display(), sub.get_name()))
            })?;
        if arg.get_action().takes_values() {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => {
                    return Err(CliError::Usage(format!(
                        "{}: `{key}` takes true or false, got `{value}`",
                        path.display()
                    )))
                }
            }
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}
