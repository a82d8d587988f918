//! `--config FILE`: a TOML file with one table per subcommand whose keys
//! are flag names. Values become flags placed before the command-line
//! ones; a flag given on the command line wins over the file.
//!
//! ```toml
//! [simulate]
//! estimator = "gp"
//! retrain-every = 1
//! fractions = [0.8, 0.2]
//! ```

use std::collections::HashSet;
use std::ffi::OsString;

use crate::error::CliError;

fn flag_name(arg: &str) -> Option<&str> {
    let rest = arg.strip_prefix("--")?;
    Some(rest.split('=').next().unwrap_or(rest))
}

fn scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        _ => None,
    }
}

/// Removes `--config FILE` from `argv` and splices the file's flags for
/// the chosen subcommand in after the subcommand name.
pub fn expand(mut argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config=")) else {
        return Ok(argv);
    };
    let arg = argv.remove(pos).to_string_lossy().into_owned();
    let path = match arg.strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None if pos < argv.len() => argv.remove(pos).to_string_lossy().into_owned(),
        None => return Err(CliError::Usage("--config needs a file".into())),
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("cannot read config {path}: {e}")))?;
    let table: toml::Table = text.parse().map_err(|e| CliError::Data(format!("config {path}: {e}")))?;

    let Some(sub) = argv.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|i| i + 1) else {
        return Ok(argv);
    };
    let name = argv[sub].to_string_lossy().into_owned();
    if let Some((key, _)) = table.iter().find(|(_, v)| !v.is_table()) {
        return Err(CliError::Usage(format!("config {path}: key '{key}' must sit inside a [subcommand] table")));
    }
    let Some(section) = table.get(&name).and_then(|v| v.as_table()) else {
        return Ok(argv);
    };
    let given: HashSet<String> =
        argv[sub + 1..].iter().filter_map(|a| flag_name(&a.to_string_lossy()).map(str::to_string)).collect();

    let mut extra = Vec::new();
    for (key, value) in section {
        let flag = key.replace('_', "-");
        if given.contains(&flag) {
            continue;
        }
        let bad = || CliError::Usage(format!("config {path}: unsupported value for '{key}'"));
        match value {
            toml::Value::Boolean(true) => extra.push(format!("--{flag}")),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    extra.push(format!("--{flag}={}", scalar(item).ok_or_else(bad)?));
                }
            }
            other => extra.push(format!("--{flag}={}", scalar(other).ok_or_else(bad)?)),
        }
    }
    argv.splice(sub + 1..sub + 1, extra.into_iter().map(OsString::from));
    Ok(argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: Vec<OsString>) -> Vec<String> {
        v.into_iter().map(|s| s.into_string().unwrap()).collect()
    }

    #[test]
    fn config_flags_precede_and_yield_to_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[simulate]\nestimator = \"gp\"\nseed = 4\nfractions = [0.8, 0.2]\nverbose = true\n").unwrap();
        let argv: Vec<OsString> =
            ["anncur", "--config", path.to_str().unwrap(), "simulate", "--seed", "9"].iter().map(OsString::from).collect();
        let out = strings(expand(argv).unwrap());
        assert_eq!(
            out,
            ["anncur", "simulate", "--estimator=gp", "--fractions=0.8", "--fractions=0.2", "--verbose", "--seed", "9"]
        );
    }

    #[test]
    fn no_config_is_untouched_and_bad_files_fail() {
        let argv: Vec<OsString> = ["anncur", "order"].iter().map(OsString::from).collect();
        assert_eq!(expand(argv.clone()).unwrap(), argv);
        let missing: Vec<OsString> = ["anncur", "--config=/nonexistent.toml", "order"].iter().map(OsString::from).collect();
        assert!(matches!(expand(missing), Err(CliError::Data(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 1\n").unwrap();
        let top: Vec<OsString> = ["anncur", "--config", path.to_str().unwrap(), "order"].iter().map(OsString::from).collect();
        assert!(matches!(expand(top), Err(CliError::Usage(_))));
    }
}
