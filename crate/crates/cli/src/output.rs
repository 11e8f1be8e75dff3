//! Output directory handling and file formats.
//!
//! * tables: RFC 4180 CSV (CRLF, quoting only when needed), one per file,
//!   every column header carrying a unit in brackets;
//! * curves: two whitespace-separated columns after a `#` header line;
//! * matrices: a `rows cols` line, then dense rows.
//!
//! Numbers are written with 17 significant digits so they round-trip.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lossless_core::DMatrix;

use crate::error::CliError;

pub const LOCK_FILE: &str = ".lossless-approx.lock";

/// Round-trippable decimal text for a float.
pub fn num(v: f64) -> String {
    // Adding zero folds −0 into +0.
    let v = v + 0.0;
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// An output directory held under a lock file for the lifetime of the run.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    lock: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn acquire(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Locked(root.display().to_string()));
            }
            Err(e) => return Err(e.into()),
        }
        Ok(Self {
            root: root.to_path_buf(),
            lock,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.written.push(name.to_string());
        Ok(BufWriter::new(File::create(self.root.join(name))?))
    }

    pub fn write_table(&mut self, table: &Table) -> Result<(), CliError> {
        let file = self.create(&format!("{}.csv", table.name))?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(file);
        w.write_record(&table.headers)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_curve(&mut self, name: &str, labels: (&str, &str), xs: &[f64], ys: &[f64]) -> Result<(), CliError> {
        let mut f = self.create(&format!("{name}.dat"))?;
        writeln!(f, "# {} {}", labels.0, labels.1)?;
        for (x, y) in xs.iter().zip(ys) {
            writeln!(f, "{} {}", num(*x), num(*y))?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn write_matrix(&mut self, name: &str, m: &DMatrix<f64>) -> Result<(), CliError> {
        let mut f = self.create(&format!("{name}.mat"))?;
        f.write_all(matrix_text(m).as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let mut f = self.create(name)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

pub fn matrix_text(m: &DMatrix<f64>) -> String {
    let mut s = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| num(m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Parses [`matrix_text`] output.
pub fn parse_matrix(text: &str) -> Option<DMatrix<f64>> {
    let mut lines = text.lines();
    let mut dims = lines.next()?.split_whitespace().map(|t| t.parse::<usize>());
    let (r, c) = (dims.next()?.ok()?, dims.next()?.ok()?);
    let mut values = Vec::with_capacity(r * c);
    for line in lines.take(r) {
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().ok()?);
        }
    }
    (values.len() == r * c).then(|| DMatrix::from_row_slice(r, c, &values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_text_round_trips() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -1.0 / 3.0, 1e-300, std::f64::consts::PI, 2.5e17, -0.0]);
        let text = matrix_text(&m);
        assert!(text.starts_with("2 3\n"));
        assert_eq!(parse_matrix(&text).unwrap(), m);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, -4.9e-324, 123456789.123456789] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn lock_blocks_second_writer() {
        let dir = tempfile::tempdir().unwrap();
        let first = OutputDir::acquire(dir.path()).unwrap();
        assert!(matches!(OutputDir::acquire(dir.path()), Err(CliError::Locked(_))));
        drop(first);
        assert!(OutputDir::acquire(dir.path()).is_ok());
    }
}
