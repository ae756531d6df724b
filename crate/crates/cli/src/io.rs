//! Matrix CSV and edge-list JSON files.

use std::fs;
use std::path::Path;

use attractor_core::{EdgeSet, Matrix, SymMatrix};
use attractor_sim::{sample_covariance, MeanPolicy};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Relative asymmetry tolerated in covariance-layout files.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// n×p observations, one row per sample
    Data,
    /// p×p symmetric matrix
    Covariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub labels: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a comma-delimited numeric table. A first row that does not parse as numbers is
/// taken as a header of column labels.
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(path, e))?;
    let mut labels: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(path, e))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => labels = Some(record.iter().map(str::to_string).collect()),
            Err(e) => return Err(CliError::input(path, format!("line {}: {e}", line + 1))),
        }
    }
    if rows.is_empty() {
        return Err(CliError::input(path, "no numeric rows"));
    }
    if let Some(l) = &labels {
        if l.len() != rows[0].len() {
            return Err(CliError::input(path, "header and rows have different widths"));
        }
    }
    Ok(Table { labels, rows })
}

pub fn read_symmetric(path: &Path) -> Result<(SymMatrix<f64>, Option<Vec<String>>), CliError> {
    let t = read_table(path)?;
    if t.rows.len() != t.rows[0].len() {
        return Err(CliError::input(
            path,
            format!("expected a square matrix, found {}×{}", t.rows.len(), t.rows[0].len()),
        ));
    }
    let m = SymMatrix::from_rows(&t.rows, SYMMETRY_TOL).map_err(|e| CliError::input(path, e))?;
    Ok((m, t.labels))
}

/// How a covariance matrix is obtained from an input file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub layout: Layout,
    pub known_zero_mean: bool,
    pub correlation: bool,
}

pub fn load_covariance(path: &Path, spec: CovarianceSpec) -> Result<(SymMatrix<f64>, Option<Vec<String>>), CliError> {
    let (s, labels) = match spec.layout {
        Layout::Covariance => read_symmetric(path)?,
        Layout::Data => {
            let t = read_table(path)?;
            let x = Matrix::from_rows(&t.rows).map_err(|e| CliError::input(path, e))?;
            let policy = if spec.known_zero_mean { MeanPolicy::KnownZero } else { MeanPolicy::Center };
            (sample_covariance(&x, policy).map_err(|e| CliError::input(path, e))?, t.labels)
        }
    };
    if !spec.correlation {
        return Ok((s, labels));
    }
    if let Some(j) = (0..s.dim()).find(|&j| !(s.get(j, j) > 0.0)) {
        return Err(CliError::Existence(format!("variable {} has nonpositive variance", name(labels.as_deref(), j))));
    }
    Ok((s.to_correlation(), labels))
}

pub fn name(labels: Option<&[String]>, j: usize) -> String {
    labels.and_then(|l| l.get(j)).cloned().unwrap_or_else(|| j.to_string())
}

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_rows<'a>(
    path: &Path,
    labels: Option<&[String]>,
    rows: impl IntoIterator<Item = &'a [f64]>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::input(path, e))?;
    if let Some(l) = labels {
        w.write_record(l).map_err(|e| CliError::input(path, e))?;
    }
    for row in rows {
        w.write_record(row.iter().map(|&x| format_real(x))).map_err(|e| CliError::input(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_symmetric(path: &Path, m: &SymMatrix<f64>, labels: Option<&[String]>) -> Result<(), CliError> {
    write_rows(path, labels, (0..m.dim()).map(|j| m.row(j)))
}

pub fn write_data(path: &Path, x: &Matrix<f64>, labels: Option<&[String]>) -> Result<(), CliError> {
    write_rows(path, labels, (0..x.rows()).map(|i| x.row(i)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub omega: f64,
    pub partial_correlation: f64,
}

/// Contents of `edges.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeList {
    pub p: usize,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl EdgeList {
    pub fn from_omega(omega: &SymMatrix<f64>, edges: &EdgeSet, labels: Option<&[String]>) -> Self {
        let edges = edges
            .iter()
            .map(|(i, j)| {
                let w = omega.get(i, j);
                let pc = -w / (omega.get(i, i) * omega.get(j, j)).sqrt();
                EdgeRecord { i, j, omega: w, partial_correlation: pc }
            })
            .collect();
        EdgeList { p: omega.dim(), edges, labels: labels.map(<[String]>::to_vec) }
    }

    pub fn edge_set(&self) -> EdgeSet {
        EdgeSet::from_pairs(self.p, self.edges.iter().map(|e| (e.i, e.j)))
    }
}

pub fn read_edges(path: &Path) -> Result<EdgeList, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let list: EdgeList = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
    if let Some(e) = list.edges.iter().find(|e| e.i >= list.p || e.j >= list.p || e.i == e.j) {
        return Err(CliError::input(path, format!("invalid edge ({}, {}) for p = {}", e.i, e.j, list.p)));
    }
    Ok(list)
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 2.0f64.sqrt(), 0.0, -0.0] {
            let s = format_real(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn header_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "a, b\n1, 0.5\n0.5, 1\n").unwrap();
        let t = read_table(&path).unwrap();
        assert_eq!(t.labels, Some(vec!["a".to_string(), "b".to_string()]));
        assert_eq!(t.rows, vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
    }

    #[test]
    fn bad_cells_and_shapes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "1,0.5\n0.5,x\n").unwrap();
        assert!(matches!(read_table(&path), Err(CliError::Input { .. })));
        fs::write(&path, "1,0.5\n0.5\n").unwrap();
        assert!(read_table(&path).is_err());
        fs::write(&path, "1,0.5\n0.4,1\n").unwrap();
        assert!(read_symmetric(&path).is_err());
        fs::write(&path, "1,0.5,0\n0.5,1,0\n").unwrap();
        assert!(read_symmetric(&path).is_err());
    }

    #[test]
    fn partial_correlations() {
        let mut omega = SymMatrix::from_diagonal(&[4.0, 1.0, 1.0]);
        omega.set(0, 1, -1.0);
        let list = EdgeList::from_omega(&omega, &EdgeSet::negative_support(&omega), None);
        assert_eq!(list.edges, vec![EdgeRecord { i: 0, j: 1, omega: -1.0, partial_correlation: 0.5 }]);
        assert_eq!(list.edge_set(), EdgeSet::from_pairs(3, [(0, 1)]));
    }
}
