//! CSV output.
//!
//! All series files share one shape: a header row, the time column first,
//! and values in 17-significant-digit scientific notation so an f64
//! round-trips bit-exactly. Row order follows the integration, so identical
//! configs produce byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Format one value with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a whole table at once. The series must be nonempty.
pub fn emit_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "refusing to write empty series to {}",
            path.display()
        )));
    }
    let mut writer = CsvWriter::create(path, header)?;
    for row in rows {
        writer.write_row(row)?;
    }
    writer.finish()
}

/// Streaming writer: rows are flushed as they arrive, so partial output
/// survives an aborted run.
pub struct CsvWriter {
    path: PathBuf,
    file: std::io::BufWriter<std::fs::File>,
    columns: usize,
    rows: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "{}", header.join(","))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            columns: header.len(),
            rows: 0,
        })
    }

    pub fn write_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns {
            return Err(Error::DimensionMismatch(format!(
                "{}: row has {} values, header has {} columns",
                self.path.display(),
                row.len(),
                self.columns
            )));
        }
        let mut line = String::with_capacity(row.len() * 24);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_value(*v));
        }
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows_written(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<()> {
        self.file.flush()?;
        Ok(())
    }
}
