//! Atomic file output in the CSV and JSON layouts used by every command.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<OutDir, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    /// Write through a temporary file and rename, so readers never see a partial file.
    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        fs::write(&tmp, contents).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
        self.write(name, &csv_text(header, rows))
    }
}

/// Floats with 17 significant digits.
pub fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:.16e}");
        }
        s.push('\n');
    }
    s
}

/// Two-column CSV with a header line.
pub fn read_trace(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("t,X_theta") => {}
        other => return Err(CliError::Config(format!("trace header must be 't,X_theta', found {other:?}"))),
    }
    let (mut ts, mut xs) = (Vec::new(), Vec::new());
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::Config(format!("trace line {}: cannot parse '{line}'", n + 2));
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        ts.push(a.trim().parse::<f64>().map_err(|_| bad())?);
        xs.push(b.trim().parse::<f64>().map_err(|_| bad())?);
    }
    Ok((ts, xs))
}
