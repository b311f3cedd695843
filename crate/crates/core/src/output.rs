//! Number formatting, plot-ready column files and atomic output writes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// Significant digits used for every floating-point value written to disk.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` with 12 significant digits, `%g` style: fixed notation for
/// moderate magnitudes, scientific otherwise, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A header plus rows of cells, written either as CSV or as whitespace-separated
/// plot data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Whitespace-separated columns with one header line.
    pub fn write_plotdata<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# {}", self.columns.join(" "))?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.render().replace(char::is_whitespace, "_"))
                .collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("utf8")
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory and
/// a rename, so the final path never holds a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes `table` as plot data to `path` atomically.
pub fn emit_plotdata(table: &Table, path: &Path) -> io::Result<()> {
    let mut buf = Vec::new();
    table.write_plotdata(&mut buf)?;
    atomic_write(path, &buf)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-2.0), "-2");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(1.2345678901234e20), "1.23456789012e20");
        assert_eq!(fmt_num(123456.0), "123456");
        assert_eq!(fmt_num(0.000123), "0.000123");
        assert_eq!(fmt_num(0.0), "0");
    }

    #[test]
    fn plotdata_header_only_when_empty() {
        let t = Table::new(["t", "h"]);
        let mut buf = Vec::new();
        t.write_plotdata(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# t h\n");
    }

    #[test]
    fn plotdata_columns() {
        let mut t = Table::new(["t", "h"]);
        t.push(vec![0.0.into(), 2.0.into()]);
        t.push(vec![0.5.into(), 2.25.into()]);
        let mut buf = Vec::new();
        t.write_plotdata(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# t h\n0 2\n0.5 2.25\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.csv");
        atomic_write(&p, b"a\n").unwrap();
        atomic_write(&p, b"b\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
