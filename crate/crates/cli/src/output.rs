use std::io::Write;
use std::path::Path;

use crate::error::CliError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows of a CSV table, written in one go once complete.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: impl IntoIterator<Item = f64>) {
        let row = row.into_iter().map(num).collect();
        self.push(row);
    }

    fn write_to(&self, w: impl Write) -> std::io::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let unwrap = |e: csv::Error| {
            if e.is_io_error() {
                match e.into_kind() {
                    csv::ErrorKind::Io(e) => e,
                    _ => unreachable!(),
                }
            } else {
                std::io::Error::other(e)
            }
        };
        out.write_record(&self.header).map_err(unwrap)?;
        for r in &self.rows {
            out.write_record(r).map_err(unwrap)?;
        }
        out.flush()
    }

    /// Writes to `path` through a temporary file in the same directory, or
    /// to stdout when no path is given.
    pub fn save(&self, path: Option<&Path>) -> Result<(), CliError> {
        let Some(path) = path else {
            return match self.write_to(std::io::stdout().lock()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            };
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        self.write_to(tmp.as_file_mut())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(())
    }
}
