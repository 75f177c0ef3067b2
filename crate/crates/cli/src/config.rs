//! Config files: flat `key = value` lines whose keys are long flag names.
//!
//! The file is expanded into ordinary `--key value` arguments placed right
//! after the subcommand, ahead of the user's own flags. Every subcommand
//! lets later occurrences override earlier ones, so command-line flags win.
//! Keys that belong to a different subcommand are ignored, so one file can
//! serve several commands.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", no + 1))?;
        let key = key.trim().trim_start_matches("--");
        let value = value.trim().trim_matches('"');
        if key.is_empty() {
            return Err(format!("config line {}: empty key", no + 1));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn find_config(args: &[OsString]) -> Option<(usize, usize, OsString)> {
    for (i, a) in args.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return args.get(i + 1).map(|v| (i, 2, v.clone()));
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some((i, 1, OsString::from(v)));
        }
    }
    None
}

/// Splices the config file named by `--config` into `args`.
pub fn expand_args(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some((at, len, path)) = find_config(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| format!("cannot read config {}: {e}", path.to_string_lossy()))?;
    let entries = parse_config(&text)?;
    args.drain(at..at + len);

    let cli = Cli::command();
    let names: Vec<String> = cli.get_subcommands().map(|c| c.get_name().to_string()).collect();
    let Some(pos) = args
        .iter()
        .position(|a| names.iter().any(|n| a.to_string_lossy() == n.as_str()))
    else {
        // no subcommand: let clap report the usage error
        return Ok(args);
    };
    let sub_name = args[pos].to_string_lossy().into_owned();
    let sub = cli.find_subcommand(&sub_name).expect("known subcommand");

    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in entries {
        let own = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str()));
        match own {
            Some(arg) => {
                if arg.get_action().takes_values() {
                    extra.push(format!("--{key}").into());
                    extra.push(value.into());
                } else {
                    match value.as_str() {
                        "true" | "yes" | "1" | "" => extra.push(format!("--{key}").into()),
                        "false" | "no" | "0" => {}
                        _ => return Err(format!("config key `{key}` is a flag; use true or false")),
                    }
                }
            }
            None => {
                let known_elsewhere = cli
                    .get_subcommands()
                    .any(|c| c.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
                if !known_elsewhere {
                    return Err(format!("unknown config key `{key}`"));
                }
            }
        }
    }
    args.splice(pos + 1..pos + 1, extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values() {
        let c = parse_config("# comment\n\nlambda-alpha = 3\n--theta=0.5\nkernel = \"rbf\"\n").unwrap();
        assert_eq!(
            c,
            vec![
                ("lambda-alpha".into(), "3".into()),
                ("theta".into(), "0.5".into()),
                ("kernel".into(), "rbf".into())
            ]
        );
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn flags_follow_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "theta = 0.5\nstrict = true\nn1 = 7\n").unwrap();
        let args: Vec<OsString> = ["repsel", "--config", path.to_str().unwrap(), "select", "--theta", "0.7"]
            .iter()
            .map(OsString::from)
            .collect();
        let out = expand_args(args).unwrap();
        let out: Vec<String> = out.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(out, ["repsel", "select", "--theta", "0.5", "--strict", "--theta", "0.7"]);

        std::fs::write(&path, "bogus = 1\n").unwrap();
        let args: Vec<OsString> = ["repsel", "select", "--config", path.to_str().unwrap()]
            .iter()
            .map(OsString::from)
            .collect();
        assert!(expand_args(args).is_err());
    }
}
