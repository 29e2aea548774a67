//! In-memory result tables and their CSV form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// A named CSV table; every row has one cell per header column.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File stem; the table is written to `<name>.csv`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Formats each argument with `Display` into a row.
#[macro_export]
macro_rules! row {
    ($($cell:expr),* $(,)?) => {
        vec![$($cell.to_string()),*]
    };
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(
            row.len(),
            self.header.len(),
            "row width in table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// RFC 4180 bytes: header row, CRLF-free `\n` line ends, quoting only where needed.
    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let csv_err = |source| CliError::Csv {
            path: self.file_name().into(),
            source,
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| CliError::io(self.file_name(), e.into_error()))
    }

    /// Reads a table written by [`Table::to_csv`].
    pub fn read(path: &Path) -> CliResult<Table> {
        let csv_err = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect());
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Table { name, header, rows })
    }
}

/// Writes `bytes` to `path` and syncs the file to disk before returning.
pub fn write_synced(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    f.sync_all().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_quotes_commas() {
        let mut t = Table::new("demo", &["packs", "value"]);
        t.push(row!["1,1", 0.625]);
        t.push(row!["2", f64::INFINITY]);
        let bytes = t.to_csv().unwrap();
        assert_eq!(
            String::from_utf8(bytes.clone()).unwrap(),
            "packs,value\n\"1,1\",0.625\n2,inf\n"
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.csv");
        write_synced(&path, &bytes).unwrap();
        assert_eq!(Table::read(&path).unwrap(), t);
    }
}
