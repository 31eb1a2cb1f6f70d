use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::TransportError;

/// Finite weighted point set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Array2<f64>,
    weights: Array1<f64>,
}

pub const WEIGHT_SUM_TOL: f64 = 1e-12;

impl EmpiricalMeasure {
    /// Uniform weights over the rows of `points`.
    pub fn uniform(points: Array2<f64>) -> Result<Self, TransportError> {
        let n = points.nrows();
        if n == 0 {
            return Err(TransportError::EmptyMeasure);
        }
        Ok(EmpiricalMeasure {
            points,
            weights: Array1::from_elem(n, 1.0 / n as f64),
        })
    }

    pub fn weighted(points: Array2<f64>, weights: Array1<f64>) -> Result<Self, TransportError> {
        if points.nrows() == 0 {
            return Err(TransportError::EmptyMeasure);
        }
        if weights.len() != points.nrows() {
            return Err(TransportError::Shape(format!(
                "{} weights for {} points",
                weights.len(),
                points.nrows()
            )));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(TransportError::Weights("weights must be finite and non-negative".into()));
        }
        let total = weights.sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(TransportError::Weights(format!("weights sum to {total}, not 1")));
        }
        Ok(EmpiricalMeasure { points, weights })
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// Per-coordinate pooled mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Map one point; zero-spread coordinates are centred only.
    pub fn apply(&self, points: &Array2<f64>) -> Array2<f64> {
        let mut out = points.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let scale = if self.std[j] > 0.0 { self.std[j] } else { 1.0 };
            col.mapv_inplace(|x| (x - self.mean[j]) / scale);
        }
        out
    }
}

/// Z-score every measure with statistics of the pooled points.
pub fn standardize(
    measures: &[EmpiricalMeasure],
) -> Result<(Vec<EmpiricalMeasure>, StandardizationStats), TransportError> {
    let Some(first) = measures.first() else {
        return Err(TransportError::EmptyMeasure);
    };
    let dim = first.dim();
    if measures.iter().any(|m| m.dim() != dim) {
        return Err(TransportError::Shape("measures differ in dimension".into()));
    }
    let total: usize = measures.iter().map(EmpiricalMeasure::len).sum();
    let nf = total as f64;
    let mut mean = vec![0.0; dim];
    for m in measures {
        for row in m.points.rows() {
            for (j, &x) in row.iter().enumerate() {
                mean[j] += x;
            }
        }
    }
    mean.iter_mut().for_each(|x| *x /= nf);
    let mut var = vec![0.0; dim];
    for m in measures {
        for row in m.points.rows() {
            for (j, &x) in row.iter().enumerate() {
                var[j] += (x - mean[j]) * (x - mean[j]);
            }
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / nf).sqrt()).collect();
    let stats = StandardizationStats { mean, std };
    let out = measures
        .iter()
        .map(|m| EmpiricalMeasure {
            points: stats.apply(&m.points),
            weights: m.weights.clone(),
        })
        .collect();
    Ok((out, stats))
}

/// Pairwise Euclidean costs and their max-normalized rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub raw: Array2<f64>,
    pub normalized: Array2<f64>,
}

/// Added to the maximum cost before normalizing.
pub const NORMALIZATION_EPS: f64 = 1e-9;

impl CostMatrix {
    pub fn euclidean(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<Self, TransportError> {
        if a.dim() != b.dim() {
            return Err(TransportError::Shape("measures differ in dimension".into()));
        }
        let (n, m) = (a.len(), b.len());
        let mut raw = Array2::zeros((n, m));
        for (i, u) in a.points.rows().into_iter().enumerate() {
            for (j, v) in b.points.rows().into_iter().enumerate() {
                raw[[i, j]] = u
                    .iter()
                    .zip(v.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
            }
        }
        Ok(Self::from_raw(raw))
    }

    pub fn from_raw(raw: Array2<f64>) -> Self {
        let max = raw.iter().copied().fold(0.0, f64::max);
        let scale = max + NORMALIZATION_EPS;
        let normalized = raw.mapv(|c| c / scale);
        CostMatrix { raw, normalized }
    }

    /// Factor mapping raw costs onto the normalized scale.
    pub fn scale(&self) -> f64 {
        self.raw.iter().copied().fold(0.0, f64::max) + NORMALIZATION_EPS
    }
}
