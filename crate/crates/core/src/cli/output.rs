//! CSV and JSON artifacts with embedded provenance.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex SHA-256 of a serializable value's canonical JSON.
pub fn digest<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Header metadata written into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub subcommand: String,
    pub seed: u64,
    pub config_digest: String,
}

/// One CSV cell; floats are written with 17 significant digits.
pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    B(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

fn write_cell(out: &mut String, c: &Cell) {
    match c {
        Cell::F(v) if v.is_finite() => write!(out, "{v:.16e}"),
        Cell::F(v) if v.is_nan() => write!(out, "nan"),
        Cell::F(v) => write!(out, "{}", if *v > 0.0 { "inf" } else { "-inf" }),
        Cell::I(v) => write!(out, "{v}"),
        Cell::U(v) => write!(out, "{v}"),
        Cell::B(v) => write!(out, "{v}"),
    }
    .expect("writing to a String cannot fail");
}

/// Render a CSV table with `#` metadata lines above the header row.
pub fn render_csv(prov: &Provenance, header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = String::new();
    writeln!(out, "# schema_version={}", prov.schema_version).unwrap();
    writeln!(out, "# subcommand={}", prov.subcommand).unwrap();
    writeln!(out, "# seed={}", prov.seed).unwrap();
    writeln!(out, "# config_digest={}", prov.config_digest).unwrap();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_cell(&mut out, c);
        }
        out.push('\n');
    }
    out
}

/// Output directory that records every file it writes.
pub struct OutputDir {
    root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, prov: &Provenance, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        self.write(name, &render_csv(prov, header, rows))
    }

    /// JSON object with the provenance fields merged in at the top level.
    pub fn json<T: Serialize>(&mut self, name: &str, prov: &Provenance, body: &T) -> Result<()> {
        let mut value = serde_json::to_value(body)?;
        let meta = serde_json::to_value(prov)?;
        match (&mut value, meta) {
            (serde_json::Value::Object(map), serde_json::Value::Object(m)) => map.extend(m),
            _ => return Err(Error::Config("summary must serialize to a JSON object".into())),
        }
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let prov = Provenance { schema_version: 1, subcommand: "x".into(), seed: 7, config_digest: "ab".into() };
        let text = render_csv(&prov, &["a", "b"], &[vec![0.1.into(), 3usize.into()], vec![f64::INFINITY.into(), true.into()]]);
        assert_eq!(
            text,
            "# schema_version=1\n# subcommand=x\n# seed=7\n# config_digest=ab\na,b\n1.0000000000000001e-1,3\ninf,true\n"
        );
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest(&vec![1, 2]).unwrap(), digest(&vec![1, 2]).unwrap());
        assert_ne!(digest(&vec![1, 2]).unwrap(), digest(&vec![2, 1]).unwrap());
    }
}
