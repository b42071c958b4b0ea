use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::IoError;
use crate::model::EpochMetrics;

/// Per-epoch CSV: `# key=value` header lines, then `epoch,lr,loss,psnr`.
/// Rows are flushed as they are written so a killed run keeps its history.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path, header: &[(String, String)]) -> Result<Self, IoError> {
        let file = File::create(path).map_err(|e| IoError::from_std(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        let mut text = String::new();
        for (k, v) in header {
            text.push_str(&format!("# {k}={v}\n"));
        }
        text.push_str("epoch,lr,loss,psnr\n");
        w.write(&text)?;
        Ok(w)
    }

    fn write(&mut self, text: &str) -> Result<(), IoError> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| IoError::from_std(&self.path, e))
    }

    pub fn row(&mut self, m: &EpochMetrics) -> Result<(), IoError> {
        self.write(&format!("{},{:?},{:?},{:?}\n", m.epoch, m.lr, m.loss, m.psnr))
    }
}
