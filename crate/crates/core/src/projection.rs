//! Structural projection of a trajectory onto twelve coordinates.
//!
//! | coordinate | meaning |
//! |---|---|
//! | χ1 | maximum node depth |
//! | χ2 | mean node depth |
//! | χ3 | population standard deviation of node depth |
//! | χ4 | number of nodes N |
//! | χ5, χ6, χ7 | fraction of consecutive node pairs that deepen, backtrack or stay level, over M = max(1, N−1) |
//! | χ8 | occurrences of `No Solution` |
//! | χ9 | χ8 / N |
//! | χ10 | 1 if `Goal Reached` occurs, else 0 |
//! | χ11 | `*` plus `/` occurrences inside operation lists |
//! | χ12 | `+` plus `-` occurrences inside operation lists |

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{Trajectory, GOAL_MARKER, PRUNE_MARKER};

pub const DIM: usize = 12;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("trajectory has no nodes")]
    Empty,
    #[error("row {index}: {source}")]
    Row {
        index: usize,
        #[source]
        source: Box<ProjectionError>,
    },
    #[error("feature file: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature file: {0}")]
    Format(String),
}

/// A point of the structural space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralVector(pub [f64; DIM]);

impl StructuralVector {
    /// Coordinate `i`, 1-based (`chi(1)` is the maximum depth).
    pub fn chi(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn as_array(&self) -> &[f64; DIM] {
        &self.0
    }
}

/// Exact non-overlapping occurrences of `needle` in `hay`.
pub fn count_occurrences(hay: &str, needle: &str) -> usize {
    hay.matches(needle).count()
}

/// Operator symbols appearing inside `Operations:[...]` segments.
fn operator_counts(text: &str) -> (usize, usize) {
    const OPEN: &str = "Operations:[";
    let (mut mul, mut add) = (0, 0);
    let mut rest = text;
    while let Some(start) = rest.find(OPEN) {
        let seg = &rest[start + OPEN.len()..];
        let end = seg.find(']').unwrap_or(seg.len());
        for c in seg[..end].chars() {
            match c {
                '*' | '/' => mul += 1,
                '+' | '-' => add += 1,
                _ => {}
            }
        }
        rest = &seg[end..];
    }
    (mul, add)
}

/// Project from node depths (in emission order) and the raw trajectory text.
pub fn project_parts(depths: &[usize], text: &str) -> Result<StructuralVector, ProjectionError> {
    let n = depths.len();
    if n == 0 {
        return Err(ProjectionError::Empty);
    }
    let nf = n as f64;
    let d: Vec<f64> = depths.iter().map(|&x| x as f64).collect();
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = d.iter().sum::<f64>() / nf;
    let std = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf).sqrt();

    let m = n.saturating_sub(1).max(1) as f64;
    let (mut deeper, mut shallower, mut level) = (0usize, 0usize, 0usize);
    for w in depths.windows(2) {
        match w[1].cmp(&w[0]) {
            std::cmp::Ordering::Greater => deeper += 1,
            std::cmp::Ordering::Less => shallower += 1,
            std::cmp::Ordering::Equal => level += 1,
        }
    }

    let prunes = count_occurrences(text, PRUNE_MARKER) as f64;
    let solved = if count_occurrences(text, GOAL_MARKER) >= 1 { 1.0 } else { 0.0 };
    let (mul, add) = operator_counts(text);

    Ok(StructuralVector([
        max,
        mean,
        std,
        nf,
        deeper as f64 / m,
        shallower as f64 / m,
        level as f64 / m,
        prunes,
        prunes / nf,
        solved,
        mul as f64,
        add as f64,
    ]))
}

pub fn project(t: &Trajectory) -> Result<StructuralVector, ProjectionError> {
    let depths: Vec<usize> = t.nodes().iter().map(|n| n.depth).collect();
    project_parts(&depths, &t.text())
}

/// Euclidean distance between two structural vectors.
pub fn structural_distance(u: &StructuralVector, v: &StructuralVector) -> f64 {
    u.0.iter()
        .zip(&v.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Row `i` is `project(&ts[i])`.
pub fn project_corpus(ts: &[Trajectory]) -> Result<Array2<f64>, ProjectionError> {
    let rows: Vec<StructuralVector> = ts
        .par_iter()
        .enumerate()
        .map(|(index, t)| {
            project(t).map_err(|e| ProjectionError::Row {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(rows_to_matrix(&rows))
}

pub fn rows_to_matrix(rows: &[StructuralVector]) -> Array2<f64> {
    let mut m = Array2::zeros((rows.len(), DIM));
    for (i, r) in rows.iter().enumerate() {
        for j in 0..DIM {
            m[[i, j]] = r.0[j];
        }
    }
    m
}

pub fn header() -> Vec<String> {
    (1..=DIM).map(|i| format!("chi{i}")).collect()
}

/// Render with 17 significant digits.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_features(path: &Path, m: &Array2<f64>) -> Result<(), ProjectionError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header())?;
    for row in m.rows() {
        w.write_record(row.iter().map(|&x| format_value(x)))?;
    }
    w.flush().map_err(|e| ProjectionError::Csv(e.into()))?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Array2<f64>, ProjectionError> {
    let mut r = csv::Reader::from_path(path)?;
    let head: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if head != header() {
        return Err(ProjectionError::Format(format!(
            "expected header chi1..chi12, got {head:?}"
        )));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        for field in rec.iter() {
            let x: f64 = field.trim().parse().map_err(|_| {
                ProjectionError::Format(format!("row {}: bad number {field:?}", i + 1))
            })?;
            values.push(x);
        }
        n += 1;
    }
    Array2::from_shape_vec((n, DIM), values).map_err(|e| ProjectionError::Format(e.to_string()))
}
