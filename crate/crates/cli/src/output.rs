//! Serialisation helpers.
//!
//! Reals are written with 17 significant digits in scientific notation,
//! which round-trips every `f64` and does not depend on the locale.

use std::fmt::Write as _;
use std::path::Path;

use crate::{CliError, ExperimentConfig, VERSION};

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comment lines carrying the tool version and resolved config.
pub fn provenance(cfg: &ExperimentConfig) -> String {
    format!("# sparc {VERSION}\n# config {}\n", cfg.to_canonical_json())
}

/// Builds CSV text row by row.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(cfg: &ExperimentConfig, header: &str) -> Self {
        let mut text = provenance(cfg);
        text.push_str(header);
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn footer(&mut self, key: &str, value: &str) {
        let _ = writeln!(self.text, "# {key}={value}");
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// JSON document holding `version`, `config` and the fields of `body`, keys
/// sorted.
pub fn json_document(cfg: &ExperimentConfig, body: serde_json::Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("version".into(), VERSION.into());
    doc.insert("config".into(), cfg.provenance_value());
    if let serde_json::Value::Object(fields) = body {
        doc.extend(fields);
    }
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("json");
    text.push('\n');
    text
}

/// Writes `text` to `path`, or standard output when there is none.
pub fn emit(path: Option<&str>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(Path::new(p), text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
