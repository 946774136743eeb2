//! `--config <file>` support. The file holds flat `key = value` lines whose
//! keys are long flag names; they are spliced in front of the command-line
//! flags so that anything given explicitly wins.

use std::ffi::OsString;
use std::path::Path;

use langflow::{Error, Result};

/// Flags named by a config file, as command-line arguments.
pub fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

fn parse(text: &str, origin: &Path) -> Result<Vec<OsString>> {
    let mut args = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            message: "expected key = value".into(),
        })?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: n + 1,
                message: "config files cannot include other config files".into(),
            });
        }
        match value.trim() {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            v => {
                args.push(format!("--{key}").into());
                args.push(v.into());
            }
        }
    }
    Ok(args)
}

/// Insert the arguments of any `--config` file right after the subcommand.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let pos = argv.iter().position(|a| a == "--config");
    let inline = argv
        .iter()
        .enumerate()
        .find_map(|(i, a)| a.to_str().and_then(|s| s.strip_prefix("--config=")).map(|p| (i, p.to_string())));
    let path = match (pos, inline) {
        (Some(i), _) => match argv.get(i + 1) {
            Some(p) => p.clone(),
            None => return Ok(argv),
        },
        (None, Some((_, p))) => p.into(),
        (None, None) => return Ok(argv),
    };
    if argv.len() < 2 {
        return Ok(argv);
    }
    let extra = config_args(Path::new(&path))?;
    let mut out = Vec::with_capacity(argv.len() + extra.len());
    out.extend(argv[..2].iter().cloned());
    out.extend(extra);
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}
