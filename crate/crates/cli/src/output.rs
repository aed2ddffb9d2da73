//! Output directory bookkeeping: CSV/JSON writers that record sizes and hashes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// One emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Full round-trip formatting: 17 significant digits, `.` decimal.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

/// A JSON number, or a string for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::from("nan")
    } else if x == f64::INFINITY {
        Value::from("+inf")
    } else if x == f64::NEG_INFINITY {
        Value::from("-inf")
    } else {
        Value::from(x)
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

pub const MANIFEST: &str = "manifest.json";

impl OutputDir {
    /// Create `root` and remove the files listed by a manifest left there by
    /// an earlier run.
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        let old = root.join(MANIFEST);
        if let Ok(text) = fs::read_to_string(&old) {
            if let Ok(v) = serde_json::from_str::<Value>(&text) {
                for f in v["files"].as_array().into_iter().flatten() {
                    if let Some(p) = f["path"].as_str() {
                        if !p.contains('/') && !p.contains('\\') && p != ".." {
                            let _ = fs::remove_file(root.join(p));
                        }
                    }
                }
            }
            fs::remove_file(&old)?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    fn write_bytes(&mut self, name: &str, data: &[u8]) -> anyhow::Result<()> {
        let path = self.root.join(name);
        fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))?;
        let entry = FileEntry {
            path: name.to_string(),
            bytes: data.len() as u64,
            sha256: sha256_hex(data),
        };
        match self.files.iter_mut().find(|f| f.path == name) {
            Some(f) => *f = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let data = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.write_bytes(name, &data)
    }

    /// Numeric rows formatted with [`fmt_num`].
    pub fn write_table<I>(&mut self, name: &str, header: &[&str], rows: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        self.write_csv(name, header, rows.into_iter().map(|r| r.into_iter().map(fmt_num).collect::<Vec<_>>()))
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> anyhow::Result<()> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        self.write_bytes(name, &data)
    }

    /// Write the manifest itself; it is not part of the file listing.
    pub fn write_manifest(&self, value: &Value) -> anyhow::Result<()> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))
    }
}
