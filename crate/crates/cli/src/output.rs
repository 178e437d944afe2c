//! CSV and JSON emission: a provenance header first, numbers at 12 significant digits.

use anyhow::{Context, Result};
use serde_json::{Map, Value};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.11e}")
}

fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        x
    } else {
        sig(x).parse().unwrap_or(x)
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().map(round12).and_then(serde_json::Number::from_f64) {
                *n = x;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

pub struct Output {
    pub dir: PathBuf,
    pub header: String,
}

impl Output {
    pub fn new(dir: &Path, header: String) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), header })
    }

    pub fn csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(f, "# {}", self.header)?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(columns)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Writes `{"header": ..., <fields of body>}` with floats rounded to 12 digits.
    pub fn json(&self, name: &str, body: Value) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut obj = Map::new();
        obj.insert("header".into(), Value::String(self.header.clone()));
        match body {
            Value::Object(o) => obj.extend(o),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut v = Value::Object(obj);
        round_value(&mut v);
        std::fs::write(&path, serde_json::to_string_pretty(&v)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig(9.257087526445746), "9.25708752645e0");
        assert_eq!(sig(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(sig(0.0), "0");
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
    }
}
