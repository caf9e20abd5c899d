//! `key = value` defaults files layered under the command line.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgMatches, Command};

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", n + 1);
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        out.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(out)
}

/// Appends config entries as flags for every argument of the selected
/// subcommand (or a global one) that was not given on the command line.
/// Keys unknown to every subcommand are an error; keys that belong to
/// another subcommand are ignored.
pub fn apply(cmd: &Command, matches: &ArgMatches, path: &Path, argv: &mut Vec<OsString>) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse(&text)?;
    let Some((sub_name, sub_matches)) = matches.subcommand() else {
        return Ok(());
    };
    let sub = cmd.find_subcommand(sub_name).expect("parsed subcommand exists");
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let find = |c: &Command| c.get_arguments().find(|a| a.get_long() == Some(key.as_str())).cloned();
        let (arg, m) = match (find(sub), find(cmd)) {
            (Some(a), _) => (a, sub_matches),
            (None, Some(a)) => (a, matches),
            (None, None) => {
                if cmd.get_subcommands().any(|s| find(s).is_some()) {
                    continue;
                }
                bail!("unknown config key `{key}`");
            }
        };
        if m.value_source(arg.get_id().as_str()) == Some(clap::parser::ValueSource::CommandLine) {
            continue;
        }
        if arg.get_action().takes_values() {
            argv.push(format!("--{key}={value}").into());
        } else {
            match value.as_str() {
                "true" => argv.push(format!("--{key}").into()),
                "false" => {}
                _ => bail!("config key `{key}` expects true or false"),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let e = parse("# c\nlambda_a = 2 # x\n\n seed=3\n").unwrap();
        assert_eq!(e, vec![("lambda-a".into(), "2".into()), ("seed".into(), "3".into())]);
        assert!(parse("novalue\n").is_err());
    }
}
