use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes artifacts into one directory and remembers what was written.
#[derive(Debug)]
pub struct ArtifactSink {
    dir: PathBuf,
    written: Vec<ArtifactRecord>,
}

impl ArtifactSink {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(ArtifactSink {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.written
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.retain(|r| r.file != name);
        self.written.push(ArtifactRecord {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Numeric table; every cell formatted with [`fmt_f64`].
    pub fn write_csv<I>(&mut self, name: &str, header: &[String], rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            if row.len() != header.len() {
                return Err(CliError::Serialize(format!(
                    "{name}: row has {} cells, header has {}",
                    row.len(),
                    header.len()
                )));
            }
            w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }
}

/// `prefix_1, …, prefix_n`
pub fn indexed_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}_{k}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25e12, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_rows_are_checked_and_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = ArtifactSink::create(dir.path()).unwrap();
        let header = vec!["a".to_string(), "b".to_string()];
        sink.write_csv("t.csv", &header, vec![vec![1.0, 2.0]]).unwrap();
        assert!(sink.write_csv("bad.csv", &header, vec![vec![1.0]]).is_err());
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
        assert_eq!(sink.records().len(), 1);
        assert_eq!(sink.records()[0].sha256, sha256_hex(text.as_bytes()));
    }
}
