//! Output helpers: the key-value summary file and small CSV tables.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

use crate::CliError;

/// Sorted key-value summary written as `key = value` lines. Timing entries
/// use the `time_` prefix so tools comparing outputs can skip them.
#[derive(Default)]
pub struct Summary {
    entries: BTreeMap<String, String>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn put_opt<T: Display>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.put(key, v);
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(k);
            text.push_str(" = ");
            text.push_str(v);
            text.push('\n');
        }
        std::fs::write(dir.join("summary.txt"), text)?;
        Ok(())
    }
}

/// Writes a failure summary naming the failing stage, then returns the error
/// so the caller can map it to an exit code.
pub fn fail(dir: &Path, stage: &str, err: CliError, extra: Summary) -> CliError {
    let mut summary = extra;
    summary.put("status", "error");
    summary.put("failure_stage", stage);
    summary.put("failure_message", &err.message);
    summary.put("exit_code", err.code);
    let _ = summary.write(dir);
    err
}

/// Writes rows of floats as CSV with the given header.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<(), CliError> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}
