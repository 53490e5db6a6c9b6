//! Output files. Every file carries the tool version and config hash: JSON
//! under a `meta` key, CSV as a leading `#` comment line.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Output {
    dir: PathBuf,
    meta: Value,
    header: String,
}

impl Output {
    pub fn new(dir: &Path, command: &str, config_hash: &str, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            meta: json!({
                "tool": "rydsim",
                "version": VERSION,
                "command": command,
                "config_sha256": config_hash,
                "seed": seed,
            }),
            header: format!("# rydsim {VERSION} {command} config_sha256={config_hash} seed={seed}"),
        })
    }

    /// Writes `{"meta": …, …body}`; `body` must be a JSON object.
    pub fn json(&self, name: &str, body: Value) -> Result<(), CliError> {
        let mut obj = serde_json::Map::new();
        obj.insert("meta".into(), self.meta.clone());
        match body {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("value".into(), other);
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(obj))?;
        fs::write(self.dir.join(name), text + "\n")?;
        Ok(())
    }

    /// Writes the provenance line, then whatever `body` emits.
    pub fn csv<F>(&self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
    {
        let file = fs::File::create(self.dir.join(name))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", self.header)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Compact float formatting that round-trips.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}
