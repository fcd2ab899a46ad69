//! File helpers: point clouds as CSV, JSON documents, plain CSV tables.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Reads one point per row; a header row is skipped when its first field is not numeric.
pub fn read_points_csv(path: &Path) -> Result<Vec<Point>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut out: Vec<Point> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) => {
                if let Some(first) = out.first() {
                    if first.len() != p.len() {
                        return Err(Error::Config(format!(
                            "{}: row {} has {} columns",
                            path.display(),
                            i + 1,
                            p.len()
                        )));
                    }
                }
                out.push(p);
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Config(format!("{}: row {}: {e}", path.display(), i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: no points", path.display())));
    }
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// A CSV table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|v| v.to_string()).collect());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pts.csv");
        fs::write(&p, "x,y\n0.5, 1\n# note\n2,3\n").unwrap();
        assert_eq!(read_points_csv(&p).unwrap(), vec![vec![0.5, 1.0], vec![2.0, 3.0]]);
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_points_csv(&p).is_err());
        let mut t = Table::new(["a", "b"]);
        t.push([1.5, 2.0]);
        let q = dir.path().join("t.csv");
        t.write(&q).unwrap();
        assert_eq!(fs::read_to_string(&q).unwrap(), "a,b\n1.5,2\n");
    }
}
