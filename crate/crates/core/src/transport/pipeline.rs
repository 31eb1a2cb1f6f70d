//! Subsampled W1 estimation between two corpora.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exact_plan, sinkhorn_plan, standardize, CostMatrix, EmpiricalMeasure, SinkhornOptions, TransportError};
use crate::projection;
use crate::rng;
use crate::trajectory::corpus::read_corpus;
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sinkhorn,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Config {
    pub n_sample: usize,
    pub pool: usize,
    pub repeats: usize,
    pub seed: u64,
    pub method: Method,
    pub sinkhorn: SinkhornOptions,
}

impl W1Config {
    pub fn new(n_sample: usize, pool: usize, repeats: usize, seed: u64) -> Self {
        W1Config {
            n_sample,
            pool,
            repeats,
            seed,
            method: Method::Sinkhorn,
            sinkhorn: SinkhornOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1Report {
    pub schema_version: u32,
    pub kind: String,
    pub pair: [String; 2],
    pub method: Method,
    pub lambda: f64,
    pub n_sample: usize,
    pub pool: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Both samples were drawn, disjointly, from one pool.
    pub disjoint_halves: bool,
    /// Transport cost per repeat on the normalized scale.
    pub values: Vec<f64>,
    /// ⟨P, M̃⟩ − λH(P) per repeat (equals `values` for the exact method).
    pub regularized_values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub normalized: bool,
    pub converged: bool,
    pub max_marginal_error: f64,
    pub warnings: Vec<String>,
}

/// A serializable coupling with the marginals it was solved against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub schema_version: u32,
    pub kind: String,
    pub method: Method,
    pub lambda: f64,
    pub tol: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    pub transport_cost: f64,
    pub marginal_error: f64,
}

impl PlanFile {
    /// Largest deviation of the coupling's marginals from `p` and `q`.
    pub fn recomputed_marginal_error(&self) -> f64 {
        let rows = self.coupling.iter().map(|r| r.iter().sum::<f64>());
        let r = rows.zip(&self.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let c = self
            .q
            .iter()
            .enumerate()
            .map(|(j, b)| (self.coupling.iter().map(|r| r[j]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max);
        r.max(c)
    }
}

fn select_rows(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    m.select(Axis(0), idx)
}

const POOL_STREAM: u64 = u64::MAX;

/// Indices of the candidate pool: a seeded shuffle prefix of the corpus.
fn pool_indices(len: usize, pool: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng::stream(seed, POOL_STREAM));
    idx.truncate(pool);
    idx
}

/// Sample `n` of `pool` without replacement (seeded Fisher–Yates).
fn sample(pool: &[usize], n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut p = pool.to_vec();
    p.shuffle(&mut rng::stream(seed, stream));
    p.truncate(n);
    p
}

struct Repeat {
    value: f64,
    regularized: f64,
    converged: bool,
    marginal_error: f64,
    plan: PlanFile,
}

fn solve_once(xa: Array2<f64>, xb: Array2<f64>, cfg: &W1Config) -> Result<Repeat, TransportError> {
    let a = EmpiricalMeasure::uniform(xa)?;
    let b = EmpiricalMeasure::uniform(xb)?;
    let (std, _) = standardize(&[a, b])?;
    let cost = CostMatrix::euclidean(&std[0], &std[1])?;
    let (p, q) = (std[0].weights().view(), std[1].weights().view());
    let opts = &cfg.sinkhorn;
    let (value, regularized, converged, marginal_error, coupling) = match cfg.method {
        Method::Sinkhorn => {
            let plan = sinkhorn_plan(&cost.normalized, p, q, opts)?;
            (
                plan.transport_cost,
                plan.regularized_objective,
                plan.converged,
                plan.marginal_error,
                plan.coupling,
            )
        }
        Method::Exact => {
            let (value, coupling) = exact_plan(&cost.normalized, p, q)?;
            let rows = coupling.sum_axis(Axis(1));
            let cols = coupling.sum_axis(Axis(0));
            let err = rows
                .iter()
                .zip(p.iter())
                .chain(cols.iter().zip(q.iter()))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            (value, value, true, err, coupling)
        }
    };
    let plan = PlanFile {
        schema_version: SCHEMA_VERSION,
        kind: "transport-plan".into(),
        method: cfg.method,
        lambda: opts.lambda,
        tol: opts.tol,
        p: p.to_vec(),
        q: q.to_vec(),
        coupling: coupling.rows().into_iter().map(|r| r.to_vec()).collect(),
        transport_cost: value,
        marginal_error,
    };
    Ok(Repeat {
        value,
        regularized,
        converged,
        marginal_error,
        plan,
    })
}

/// Estimate W1 between two projected corpora (rows are structural vectors).
///
/// With `same_source` the two samples of each repeat are disjoint halves of
/// one draw from `features_a`'s pool and `features_b` is ignored. Returns the
/// report and the plan of the last repeat.
pub fn w1_between_features(
    labels: [&str; 2],
    features_a: &Array2<f64>,
    features_b: &Array2<f64>,
    same_source: bool,
    cfg: &W1Config,
) -> Result<(W1Report, PlanFile), TransportError> {
    if cfg.repeats == 0 || cfg.n_sample == 0 {
        return Err(TransportError::Sampling("repeats and n_sample must be positive".into()));
    }
    if cfg.n_sample > cfg.pool {
        return Err(TransportError::Sampling(format!(
            "n_sample {} exceeds pool {}",
            cfg.n_sample, cfg.pool
        )));
    }
    let mut warnings = Vec::new();
    let clamp = |name: &str, len: usize, warnings: &mut Vec<String>| {
        if len < cfg.pool {
            warnings.push(format!("corpus {name} has {len} trajectories; pool clamped from {}", cfg.pool));
            len
        } else {
            cfg.pool
        }
    };
    let need = if same_source { 2 * cfg.n_sample } else { cfg.n_sample };
    let pool_a_len = clamp(labels[0], features_a.nrows(), &mut warnings);
    let pool_a = pool_indices(features_a.nrows(), pool_a_len, rng::derive_seed(cfg.seed, 0));
    let pool_b = if same_source {
        Vec::new()
    } else {
        let len = clamp(labels[1], features_b.nrows(), &mut warnings);
        pool_indices(features_b.nrows(), len, rng::derive_seed(cfg.seed, 1))
    };
    if pool_a.len() < need || (!same_source && pool_b.len() < cfg.n_sample) {
        return Err(TransportError::Sampling(format!(
            "pool too small: need {need} trajectories per draw"
        )));
    }

    let repeats: Vec<Repeat> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = rng::derive_seed(cfg.seed, 2 + r as u64);
            let (xa, xb) = if same_source {
                let draw = sample(&pool_a, need, seed, 0);
                let (h1, h2) = draw.split_at(cfg.n_sample);
                (select_rows(features_a, h1), select_rows(features_a, h2))
            } else {
                (
                    select_rows(features_a, &sample(&pool_a, cfg.n_sample, seed, 0)),
                    select_rows(features_b, &sample(&pool_b, cfg.n_sample, seed, 1)),
                )
            };
            solve_once(xa, xb, cfg)
        })
        .collect::<Result<_, _>>()?;

    let values: Vec<f64> = repeats.iter().map(|r| r.value).collect();
    let v = Array1::from(values.clone());
    let mean = v.mean().unwrap_or(0.0);
    let std = v.std(0.0);
    let report = W1Report {
        schema_version: SCHEMA_VERSION,
        kind: "w1-report".into(),
        pair: [labels[0].to_string(), labels[1].to_string()],
        method: cfg.method,
        lambda: cfg.sinkhorn.lambda,
        n_sample: cfg.n_sample,
        pool: cfg.pool,
        repeats: cfg.repeats,
        seed: cfg.seed,
        disjoint_halves: same_source,
        values,
        regularized_values: repeats.iter().map(|r| r.regularized).collect(),
        mean,
        std,
        normalized: true,
        converged: repeats.iter().all(|r| r.converged),
        max_marginal_error: repeats.iter().map(|r| r.marginal_error).fold(0.0, f64::max),
        warnings,
    };
    let plan = repeats.into_iter().last().expect("repeats > 0").plan;
    Ok((report, plan))
}

/// Read, project and compare two corpus files. Passing the same file twice
/// compares disjoint halves of one pool.
pub fn pipeline_w1(corpus_a: &Path, corpus_b: &Path, cfg: &W1Config) -> Result<(W1Report, PlanFile), TransportError> {
    let same = match (corpus_a.canonicalize(), corpus_b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    let fa = projection::project_corpus(&read_corpus(corpus_a)?)?;
    let fb = if same {
        Array2::zeros((0, projection::DIM))
    } else {
        projection::project_corpus(&read_corpus(corpus_b)?)?
    };
    let label = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    w1_between_features([&label(corpus_a), &label(corpus_b)], &fa, &fb, same, cfg)
}
