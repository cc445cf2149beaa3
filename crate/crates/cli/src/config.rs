//! `key = value` config files, spliced into the argument list as long flags.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Finds `--config <path>` or `--config=<path>` among the arguments.
pub fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Turns the file into `--key value` pairs. Blank lines and lines starting
/// with `#` are skipped; underscores in keys become dashes. A value of
/// `true` yields a bare flag and `false` drops the key.
pub fn read_config(path: &Path) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), n + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            bail!("{}:{}: invalid key", path.display(), n + 1);
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Inserts the config flags right after the subcommand so explicit flags,
/// which come later, take precedence.
pub fn splice(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let extra = read_config(&path)?;
    let at = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(args.len(), |i| i + 2);
    args.splice(at..at, extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_flags_go_after_subcommand() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nlambda = 4/3\nt_end=1e4\n\nmirror=false").unwrap();
        let p = f.path().to_str().unwrap();
        let args = splice(os(&["spiraldim", "dim", "--config", p, "--lambda", "1"])).unwrap();
        let want = os(&["spiraldim", "dim", "--lambda", "4/3", "--t-end", "1e4", "--config", p, "--lambda", "1"]);
        assert_eq!(args, want);
    }

    #[test]
    fn malformed_line_is_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "lambda 4").unwrap();
        let p = f.path().to_str().unwrap().to_string();
        assert!(splice(os(&["spiraldim", "dim", &format!("--config={p}")])).is_err());
    }
}
