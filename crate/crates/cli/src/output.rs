//! Output files. Every file starts with the metadata needed to reproduce it:
//! `# key: value` lines for CSV, a `metadata` object for JSON.

use std::fs;
use std::path::{Path, PathBuf};

use iqlearn::io::{fmt_num, Metadata};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub struct Outputs {
    dir: PathBuf,
    pub meta: Metadata,
    pub written: Vec<PathBuf>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

impl Outputs {
    pub fn new(command: &str, cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let echo = cfg.echo();
        let hash = Sha256::digest(echo.as_bytes());
        let hash: String = hash.iter().take(8).map(|b| format!("{b:02x}")).collect();
        let mut meta = Metadata::default();
        meta.push("tool", format!("iqlearn {}", env!("CARGO_PKG_VERSION")))
            .push("command", command)
            .push("config", echo)
            .push("config_hash", hash)
            .push("seed", cfg.seed().to_string());
        Ok(Outputs {
            dir,
            meta,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `{metadata, ...body}` with numbers rounded. The optional
    /// `exact` entry is appended unrounded so that it reloads bit for bit.
    pub fn write_json_with(&mut self, name: &str, body: Value, exact: Option<(&str, Value)>) -> Result<(), CliError> {
        let meta: Map<String, Value> = self
            .meta
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let mut doc = Map::new();
        doc.insert("metadata".into(), Value::Object(meta));
        match body {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let mut doc = match round_numbers(Value::Object(doc)) {
            Value::Object(m) => m,
            _ => unreachable!("rounding keeps objects"),
        };
        if let Some((key, value)) = exact {
            doc.insert(key.into(), value);
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json serializes");
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut buf = Vec::new();
        self.meta.write(&mut buf).map_err(|e| io_err(&path, e))?;
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header).map_err(|e| io_err(&path, e))?;
            for r in rows {
                w.write_record(r).map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
        }
        fs::write(&path, buf).map_err(|e| io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

/// Rounds every float to 9 significant digits so the printed text is stable.
pub fn round_numbers(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r: f64 = fmt_num(x).parse().expect("formatted number parses");
            serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_numbers).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_numbers(v))).collect()),
        other => other,
    }
}

pub fn num(x: f64) -> String {
    fmt_num(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_nine_digits() {
        let v = serde_json::json!({"a": 1.0 / 3.0, "b": [2.5, 7], "c": "x"});
        let r = round_numbers(v);
        assert_eq!(r.to_string(), r#"{"a":0.333333333,"b":[2.5,7],"c":"x"}"#);
    }
}
