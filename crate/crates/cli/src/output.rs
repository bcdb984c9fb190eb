//! Output directories: every file written through [`OutputDir`] is hashed
//! into `manifest.json`, so a run directory describes itself.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use condgauss::io::canonical_json;
use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;
use crate::error::CliError;

pub const TOOL: &str = "condgauss";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// No timestamps or host details, so reruns produce identical manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub files: Vec<FileEntry>,
}

pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute location of a relative output name, creating parents.
    pub fn path_for(&self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.root.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        Ok(p)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path_for(name)?;
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.record(name, bytes);
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_bytes(name, canonical_json(value)?.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write_bytes(name, &table.to_bytes()?)
    }

    /// Adds a file written by other means, e.g. a streamed sample spill.
    pub fn register(&mut self, name: &str) -> Result<(), CliError> {
        let p = self.root.join(name);
        let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        self.record(name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.insert(
            name.to_string(),
            FileEntry {
                path: name.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
    }

    /// Writes `manifest.json` listing every file in path order.
    pub fn finish(self, command: &str, seed: u64, config_hash: &str) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            config_hash: config_hash.into(),
            files: self.files.into_values().collect(),
        };
        let p = self.root.join("manifest.json");
        fs::write(&p, canonical_json(&manifest)?).map_err(|e| CliError::io(&p, e))?;
        Ok(manifest)
    }
}

/// A numeric CSV table. Values print in shortest round-trip form.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Numerical(format!("csv: {e}"));
        w.write_record(&self.header).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(fail)?;
        }
        w.into_inner().map_err(|e| CliError::Numerical(format!("csv: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_files_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_bytes("b/second.txt", b"xyz").unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0, 0.1]);
        out.write_csv("first.csv", &t).unwrap();
        let m = out.finish("test", 3, "abc").unwrap();
        let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(names, ["b/second.txt", "first.csv"]);
        assert_eq!(
            m.files[0].sha256,
            "3608bca1e44ea6c4d268eb6db02260269892c0b42b86bbf1e77a6fa16c3c9282"
        );
        let csv = fs::read_to_string(dir.path().join("first.csv")).unwrap();
        assert_eq!(csv, "a,b\n1,0.1\n");
        let back: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
