//! Column-oriented analysis tables and design-matrix construction with
//! fixed-effect dummy expansion.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::EconError;

/// A CSV-backed table of string cells.
#[derive(Debug, Clone)]
pub struct DataTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl DataTable {
    pub fn read_csv(path: &Path) -> Result<DataTable, EconError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| EconError::Shape(format!("{}: {e}", path.display())))?;
        let headers =
            reader.headers().map_err(|e| EconError::Shape(e.to_string()))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| EconError::Shape(e.to_string()))?;
            rows.push(row.iter().map(str::to_string).collect());
        }
        Ok(DataTable { headers, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, EconError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EconError::UnknownColumn(name.to_string()))
    }

    pub fn string_column(&self, name: &str) -> Result<Vec<&str>, EconError> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>, EconError> {
        let idx = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[idx].trim().parse::<f64>().map_err(|_| EconError::NotNumeric {
                    column: name.to_string(),
                    value: r[idx].clone(),
                    row: i + 1,
                })
            })
            .collect()
    }
}

/// Which columns play which role when building a design matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoleSpec {
    pub response: String,
    /// Numeric predictors (the treatment dummy included).
    #[serde(default)]
    pub predictors: Vec<String>,
    /// Categorical columns expanded into dummies, one reference level
    /// dropped per column.
    #[serde(default)]
    pub fixed_effects: Vec<String>,
    pub cluster: String,
}

/// Response, design matrix with named columns, and cluster codes.
#[derive(Debug, Clone)]
pub struct ModelFrame {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub cluster: Vec<u32>,
    pub cluster_names: Vec<String>,
}

impl ModelFrame {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// A copy restricted to the given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> ModelFrame {
        let p = self.x.ncols();
        let x = DMatrix::from_fn(rows.len(), p, |i, j| self.x[(rows[i], j)]);
        ModelFrame {
            names: self.names.clone(),
            x,
            y: rows.iter().map(|&r| self.y[r]).collect(),
            cluster: rows.iter().map(|&r| self.cluster[r]).collect(),
            cluster_names: self.cluster_names.clone(),
        }
    }

    /// A copy without the named column (for restricted-model LR tests).
    pub fn without_column(&self, name: &str) -> Result<ModelFrame, EconError> {
        let drop = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| EconError::UnknownColumn(name.to_string()))?;
        let keep: Vec<usize> = (0..self.names.len()).filter(|&j| j != drop).collect();
        let x = DMatrix::from_fn(self.n(), keep.len(), |i, j| self.x[(i, keep[j])]);
        Ok(ModelFrame {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            x,
            y: self.y.clone(),
            cluster: self.cluster.clone(),
            cluster_names: self.cluster_names.clone(),
        })
    }
}

/// Build a frame: a leading constant column, the numeric predictors, then
/// dummy blocks for each fixed-effect column (first level dropped).
pub fn build_frame(table: &DataTable, spec: &RoleSpec) -> Result<ModelFrame, EconError> {
    let n = table.n_rows();
    let y = table.f64_column(&spec.response)?;

    let mut names = vec!["const".to_string()];
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for pred in &spec.predictors {
        names.push(pred.clone());
        columns.push(table.f64_column(pred)?);
    }
    for fe in &spec.fixed_effects {
        let raw = table.string_column(fe)?;
        let levels: BTreeSet<&str> = raw.iter().copied().collect();
        for level in levels.iter().skip(1) {
            names.push(format!("{fe}={level}"));
            columns.push(raw.iter().map(|v| f64::from(*v == *level)).collect());
        }
    }

    let cluster_raw = table.string_column(&spec.cluster)?;
    let cluster_names: Vec<String> = {
        let set: BTreeSet<&str> = cluster_raw.iter().copied().collect();
        set.into_iter().map(str::to_string).collect()
    };
    let code_of = |v: &str| cluster_names.binary_search_by(|c| c.as_str().cmp(v)).expect("level present") as u32;
    let cluster = cluster_raw.iter().map(|v| code_of(v)).collect();

    let p = names.len();
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    Ok(ModelFrame { names, x, y, cluster, cluster_names })
}
