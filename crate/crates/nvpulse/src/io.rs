//! Delimited-text artifacts.
//!
//! Every file starts with `# key = value` metadata lines, followed by one line
//! of comma-separated column names and then comma-separated records. Floats
//! are written in Rust's shortest round-trip form, so reading a file back
//! yields the exact values that were written.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nvpulse_core::pulse::PulseCoefficients;

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Ordered `# key = value` metadata block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    /// Tool version, configuration hash and seed, in that order.
    pub fn provenance(config_sha256: &str, seed: u64) -> Self {
        let mut h = Self::default();
        h.push("version", VERSION);
        h.push("config_sha256", config_sha256);
        h.push("seed", seed);
        h
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.push(key, format!("{value:?}"))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> CliResult<f64> {
        let raw = self
            .get(key)
            .ok_or_else(|| CliError::config(key, "missing from file header"))?;
        raw.parse()
            .map_err(|_| CliError::config(key, format!("not a number: {raw:?}")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

/// Header, column names and numeric records.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Header, columns: &[&str]) -> Self {
        Self {
            header,
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> CliResult<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::config(name, "column missing from table"))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.header.entries() {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut header = Header::default();
        let mut columns = None;
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    header.push(k.trim(), v.trim());
                }
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            match &columns {
                None => columns = Some(cells.iter().map(|c| (*c).to_owned()).collect::<Vec<_>>()),
                Some(cols) => {
                    if cells.len() != cols.len() {
                        return Err(CliError::parse(
                            format!("table line {}", n + 1),
                            format!("{} cells for {} columns", cells.len(), cols.len()),
                        ));
                    }
                    let row = cells
                        .iter()
                        .map(|c| c.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| CliError::parse(format!("table line {}", n + 1), e))?;
                    rows.push(row);
                }
            }
        }
        Ok(Self {
            header,
            columns: columns.ok_or_else(|| CliError::parse("table", "no column line"))?,
            rows,
        })
    }
}

/// Writes `contents` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let wrap = |source| CliError::Write {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(wrap)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(contents.as_bytes()).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })
}

pub fn write_table(dir: &Path, name: &str, table: &Table) -> CliResult<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, &table.render())?;
    Ok(path)
}

pub const PULSE_COLUMNS: [&str; 3] = ["harmonic", "ax_mhz", "ay_mhz"];

/// Coefficient table of a pulse; `header` should already carry provenance.
pub fn pulse_table(pulse: &PulseCoefficients, mut header: Header) -> Table {
    header
        .push_f64("duration_us", pulse.duration_us())
        .push_f64("carrier_mhz", pulse.carrier_mhz())
        .push("harmonics", pulse.harmonics())
        .push_f64("max_rabi_mhz", pulse.max_rabi());
    let mut t = Table::new(header, &PULSE_COLUMNS);
    for j in 0..pulse.harmonics() {
        t.push_row(vec![(j + 1) as f64, pulse.ax()[j], pulse.ay()[j]]);
    }
    t
}

/// Pulse coefficients and the metadata header they were written with.
pub fn read_pulse(path: &Path) -> CliResult<(PulseCoefficients, Header)> {
    let table = Table::parse(&read_text(path)?)?;
    let ax = table.column("ax_mhz")?;
    let ay = table.column("ay_mhz")?;
    let harmonic = table.column("harmonic")?;
    if harmonic.iter().enumerate().any(|(i, &h)| h != (i + 1) as f64) {
        return Err(CliError::config("harmonic", "rows must list harmonics 1, 2, ... in order"));
    }
    let pulse = PulseCoefficients::new(
        ax,
        ay,
        table.header.get_f64("duration_us")?,
        table.header.get_f64("carrier_mhz")?,
    )?;
    Ok((pulse, table.header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trips_exactly() {
        let mut h = Header::provenance("abc", 7);
        h.push_f64("x", 0.1 + 0.2);
        let mut t = Table::new(h, &["a", "b"]);
        t.push_row(vec![1.0 / 3.0, -2.5e-300]);
        t.push_row(vec![f64::MAX, 0.0]);
        let back = Table::parse(&t.render()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.header.get("seed"), Some("7"));
        assert_eq!(back.header.get_f64("x").unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matches!(Table::parse("a,b\n1,2\n3\n"), Err(CliError::Parse { .. })));
        assert!(Table::parse("# only = header\n").is_err());
    }

    #[test]
    fn pulse_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = PulseCoefficients::new(vec![0.1, -0.7], vec![1.0 / 7.0, 0.0], 1.85, 0.25).unwrap();
        let path = write_table(dir.path(), "pulse.csv", &pulse_table(&p, Header::provenance("h", 1))).unwrap();
        assert_eq!(read_pulse(&path).unwrap().0, p);
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("f.txt");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
