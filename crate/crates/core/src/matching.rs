//! Maximum-weight pairing of exact eigenvectors with approximants.

use pathfinding::prelude::{kuhn_munkres, Matrix};

use crate::error::{Error, Result};

// Weights are fidelities in [0, 1]; fixed-point keeps the solver exact on integers.
const SCALE: f64 = 1e12;

/// Pairs every row with a distinct column maximizing the total weight.
/// Requires `rows ≤ cols`. Returns the column chosen for each row.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Result<Vec<usize>> {
    let rows = weights.len();
    if rows == 0 {
        return Ok(Vec::new());
    }
    let cols = weights[0].len();
    if weights.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidDims("ragged weight matrix".into()));
    }
    if rows > cols {
        return Err(Error::InvalidDims(format!("{rows} rows but only {cols} candidates")));
    }
    let data: Vec<i64> = weights.iter().flatten().map(|&w| (w * SCALE).round() as i64).collect();
    let m = Matrix::from_vec(rows, cols, data).map_err(|e| Error::InvalidDims(e.to_string()))?;
    Ok(kuhn_munkres(&m).1)
}

/// Rows whose individually best column is claimed by another row.
pub fn contested_rows(weights: &[Vec<f64>]) -> Vec<usize> {
    let best: Vec<usize> = weights
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .unwrap_or(0)
        })
        .collect();
    (0..best.len())
        .filter(|&i| best.iter().enumerate().any(|(j, &b)| j != i && b == best[i]))
        .collect()
}
