use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::CliError;

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Rewrites every non-integer number with 17 significant digits.
pub fn fixed_precision(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let v = n.as_f64().expect("finite float");
            Number::from_str(&fmt_f64(v)).map(Value::Number).unwrap_or(Value::Number(n))
        }
        Value::Array(items) => Value::Array(items.into_iter().map(fixed_precision).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, fixed_precision(v))).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.into()))
}

/// Destination of the main artifact: a file or stdout.
pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>) -> Self {
        Self { path }
    }

    fn open(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.path {
            Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
            None => Box::new(io::stdout().lock()),
        })
    }

    /// Writes `{"config": ..., "result": ...}`.
    pub fn write_json(&self, config: &Value, result: Value) -> Result<(), CliError> {
        let doc = serde_json::json!({ "config": config, "result": result });
        write_json_to(self.open()?, &doc)
    }

    /// Writes a `# config: {...}` line, the header, then the rows.
    pub fn write_csv(&self, config: &Value, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut out = self.open()?;
        let echo = serde_json::to_string(&fixed_precision(config.clone())).map_err(|e| CliError::Io(e.into()))?;
        writeln!(out, "# config: {echo}").context("write failed")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header).context("write failed")?;
        for row in rows {
            w.write_record(row).context("write failed")?;
        }
        w.flush().context("write failed")?;
        Ok(())
    }
}

pub fn write_json_file(path: &Path, doc: &Value) -> Result<(), CliError> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_json_to(Box::new(file), doc)
}

pub fn write_json_to(mut out: Box<dyn Write>, doc: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&fixed_precision(doc.clone())).map_err(|e| CliError::Io(e.into()))?;
    writeln!(out, "{text}").context("write failed")?;
    Ok(())
}
