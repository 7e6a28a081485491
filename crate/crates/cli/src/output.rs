//! RFC 4180 CSV emission to a file or stdout.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// A rectangular table of preformatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    fn write_to<W: Write>(&self, w: W, label: &str) -> Result<(), OutputError> {
        let csv_err = |source| OutputError::Csv {
            path: label.to_string(),
            source,
        };
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        wr.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            wr.write_record(row).map_err(csv_err)?;
        }
        wr.flush().map_err(|source| OutputError::Io {
            path: label.to_string(),
            source,
        })
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn write(&self, path: Option<&Path>) -> Result<(), OutputError> {
        match path {
            Some(p) => {
                let f = File::create(p).map_err(|source| OutputError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                self.write_to(io::BufWriter::new(f), &p.display().to_string())
            }
            None => self.write_to(io::stdout().lock(), "<stdout>"),
        }
    }
}

/// `<out>.<suffix>.csv` next to the main output.
pub fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(format!(".{suffix}.csv"));
    out.with_file_name(name)
}

/// Locale-free shortest round-trip formatting.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("/tmp/a/run.csv"), "diag"), PathBuf::from("/tmp/a/run.diag.csv"));
        assert_eq!(sidecar(Path::new("out"), "trace"), PathBuf::from("out.trace.csv"));
    }

    #[test]
    fn quoting_and_numbers() {
        let mut t = Table::new(vec!["a".into(), "b,c".into()]);
        t.rows.push(vec![num(0.1), num(1e-300)]);
        let mut buf = Vec::new();
        t.write_to(&mut buf, "mem").unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,\"b,c\"\r\n0.1,1e-300\r\n");
    }
}
