//! File formats: headerless numeric CSV, model JSON, and `-` for stdio.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use variogram::{KrigeModel, VariogramMatrix};

use crate::CliError;

pub fn read_input(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Io(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))
    }
}

pub fn write_output(path: &str, content: &str) -> Result<(), CliError> {
    if path == "-" {
        let mut out = io::stdout().lock();
        out.write_all(content.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::Io(format!("stdout: {e}")))
    } else {
        fs::write(path, content).map_err(|e| CliError::Io(format!("{path}: {e}")))
    }
}

/// Rectangular numeric table; blank lines are skipped.
pub fn parse_csv(text: &str, what: &str) -> Result<DMatrix<f64>, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Parse(format!("{what}: line {}: bad number {f:?}", lineno + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Parse(format!(
                    "{what}: line {} has {} fields, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Parse(format!("{what}: no data")));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

pub fn parse_square(text: &str, what: &str) -> Result<DMatrix<f64>, CliError> {
    let m = parse_csv(text, what)?;
    if !m.is_square() {
        return Err(CliError::Parse(format!(
            "{what}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub mu: f64,
    pub sigma2: f64,
    /// Row-major.
    pub gamma: Vec<Vec<f64>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ModelFile {
    pub fn parse(text: &str, what: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("{what}: {e}")))
    }

    pub fn gamma_matrix(&self) -> Result<DMatrix<f64>, CliError> {
        let n = self.gamma.len();
        if n == 0 || self.gamma.iter().any(|r| r.len() != n) {
            return Err(CliError::Parse("model gamma must be a non-empty square array".into()));
        }
        Ok(DMatrix::from_row_iterator(n, n, self.gamma.iter().flatten().copied()))
    }

    pub fn to_model(&self) -> Result<KrigeModel, CliError> {
        let gamma = VariogramMatrix::new(self.gamma_matrix()?)?;
        Ok(KrigeModel::new(self.mu, self.sigma2, gamma)?)
    }
}
