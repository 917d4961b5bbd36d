//! Atomic CSV and JSON artifact writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// Formats a real with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Names of the files written so far.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn persist(&mut self, name: &str, fill: impl FnOnce(&mut NamedTempFile) -> Result<()>) -> Result<PathBuf> {
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        fill(&mut tmp)?;
        tmp.as_file().sync_all()?;
        let target = self.dir.join(name);
        tmp.persist(&target).map_err(|e| Error::Io(e.error))?;
        self.written.push(name.to_string());
        Ok(target)
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        self.persist(name, |tmp| {
            let mut w = csv::Writer::from_writer(tmp);
            w.write_record(header).map_err(csv_error)?;
            for row in rows {
                debug_assert_eq!(row.len(), header.len());
                w.write_record(&row).map_err(csv_error)?;
            }
            w.flush()?;
            Ok(())
        })
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        self.persist(name, |tmp| {
            serde_json::to_writer_pretty(&mut *tmp, value).map_err(|e| Error::Io(e.into()))?;
            tmp.write_all(b"\n")?;
            Ok(())
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for v in [0.0, -0.0, 1.0 / 3.0, 1.076e-4, f64::MAX, f64::MIN_POSITIVE, 5e-324, -123456.789] {
            let back: f64 = num(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
    }

    #[test]
    fn csv_is_written_and_replaced_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.csv("a.csv", &["x", "note"], vec![vec![num(1.5), "has, comma".into()]]).unwrap();
        out.csv("a.csv", &["x", "note"], vec![vec![num(2.5), "plain".into()]]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "x,note\n2.5000000000000000e0,plain\n");
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
