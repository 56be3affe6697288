//! CSV output: comma-separated, `.` decimal point, 17 significant digits
//! for reals, LF line endings, mandatory header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvFile {
    writer: BufWriter<File>,
    path: PathBuf,
}

impl CsvFile {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut writer = BufWriter::new(File::create(path)?);
        writer.write_all(header.as_bytes())?;
        writer.write_all(b"\n")?;
        Ok(CsvFile {
            writer,
            path: path.to_path_buf(),
        })
    }

    /// Writes one row; fields must already be formatted.
    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_all(fields.join(",").as_bytes())?;
        self.writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}
