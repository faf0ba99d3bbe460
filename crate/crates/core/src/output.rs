//! Output plumbing shared by the pipeline and the CLI: float formatting,
//! CSV tables and run manifests.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// 17 significant digits, which round-trips every finite `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes a header row followed by `rows` to `path`.
pub fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV table with a header row. Cells are parsed as numbers on request.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub cells: Vec<Vec<String>>,
}

fn parse_cell(v: &str, row: usize, col: usize) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {}, column {}: {v:?}", row + 2, col + 1)))
}

impl Table {
    /// Index of column `name`, or of the column whose position `name` spells.
    pub fn column_index(&self, name: &str) -> Result<usize> {
        if let Some(i) = self.header.iter().position(|h| h == name) {
            return Ok(i);
        }
        match name.parse::<usize>() {
            Ok(i) if i < self.header.len() => Ok(i),
            _ => Err(Error::InvalidArgument(format!(
                "no column {name:?} (have: {})",
                self.header.join(", ")
            ))),
        }
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column_index(name)?;
        self.cells
            .iter()
            .enumerate()
            .map(|(r, row)| parse_cell(&row[c], r, c))
            .collect()
    }

    /// Every row as numbers; fails on the first non-numeric cell.
    pub fn numeric_rows(&self) -> Result<Vec<Vec<f64>>> {
        self.cells
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .map(|(c, v)| parse_cell(v, r, c))
                    .collect()
            })
            .collect()
    }
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut cells = Vec::new();
    for rec in r.records() {
        cells.push(rec?.iter().map(|v| v.trim().to_string()).collect());
    }
    Ok(Table { header, cells })
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Plain-text record written next to every command's outputs: the command,
/// its parameters in `key = value` form, the tool version, and SHA-256
/// digests of the input files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub params: Vec<(String, String)>,
    pub inputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn input(mut self, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let digest = sha256_file(path)?;
        self.inputs.push((path.display().to_string(), digest));
        Ok(self)
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "tool = polytope {}\ncommand = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command
        );
        s.push_str("[params]\n");
        for (k, v) in &self.params {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str("[inputs]\n");
        for (p, d) in &self.inputs {
            s.push_str(&format!("{p} = sha256:{d}\n"));
        }
        s
    }

    /// Parses the `[params]` section back into key/value pairs.
    pub fn parse_params(text: &str) -> Vec<(String, String)> {
        let mut in_params = false;
        let mut out = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.starts_with('[') {
                in_params = line == "[params]";
                continue;
            }
            if in_params {
                if let Some((k, v)) = line.split_once(" = ") {
                    out.push((k.to_string(), v.to_string()));
                }
            }
        }
        out
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        fs::write(dir.as_ref().join("manifest.txt"), self.render())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn table_reads_named_and_numbered_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "a,b\n1,2.5\n-3,4e-1\n").unwrap();
        let t = read_table(&p).unwrap();
        assert_eq!(t.column("b").unwrap(), vec![2.5, 0.4]);
        assert_eq!(t.column("0").unwrap(), vec![1.0, -3.0]);
        assert!(t.column("c").is_err());
        assert_eq!(t.numeric_rows().unwrap()[1], vec![-3.0, 0.4]);
        fs::write(&p, "a,b\nx,1\n").unwrap();
        let t = read_table(&p).unwrap();
        assert_eq!(t.column("b").unwrap(), vec![1.0]);
        assert!(matches!(t.column("a"), Err(Error::Parse(_))));
        assert!(t.numeric_rows().is_err());
    }

    #[test]
    fn manifest_params_round_trip() {
        let m = Manifest::new("sweep").param("seed", 7).param("alphas", "0:4:41");
        let parsed = Manifest::parse_params(&m.render());
        assert_eq!(parsed, m.params);
    }
}
