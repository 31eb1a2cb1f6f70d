//! Entropically regularized transport by alternating marginal scaling.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{CostMatrix, EmpiricalMeasure, TransportError};

/// Iteration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Dual potentials with log-sum-exp updates; never underflows.
    Log,
    /// Multiplicative scalings of the Gibbs kernel; falls back to `Log` when
    /// the kernel underflows or a scaling stops being finite.
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOptions {
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the largest marginal violation drops below this.
    pub tol: f64,
    pub domain: Domain,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            lambda: 0.1,
            max_iter: 10_000,
            tol: 1e-9,
            domain: Domain::Log,
        }
    }
}

/// Converged (or best-effort) entropic coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub coupling: Array2<f64>,
    /// ⟨P, C⟩ on the cost the plan was solved against.
    pub transport_cost: f64,
    /// ⟨P, C⟩ − λ·H(P) with H(P) = −Σ P log P.
    pub regularized_objective: f64,
    pub lambda: f64,
    pub iterations_used: usize,
    pub marginal_error: f64,
    pub converged: bool,
    /// Iteration space actually used.
    pub domain: Domain,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Array1<f64> {
        self.coupling.sum_axis(Axis(1))
    }

    pub fn col_sums(&self) -> Array1<f64> {
        self.coupling.sum_axis(Axis(0))
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn marginal_violation(coupling: &Array2<f64>, p: ArrayView1<f64>, q: ArrayView1<f64>) -> f64 {
    let rows = coupling.sum_axis(Axis(1));
    let cols = coupling.sum_axis(Axis(0));
    let r = rows.iter().zip(p.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let c = cols.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    r.max(c)
}

fn validate(cost: &Array2<f64>, p: ArrayView1<f64>, q: ArrayView1<f64>, opts: &SinkhornOptions) -> Result<(), TransportError> {
    if opts.lambda <= 0.0 || !opts.lambda.is_finite() {
        return Err(TransportError::Lambda(opts.lambda));
    }
    if cost.dim() != (p.len(), q.len()) {
        return Err(TransportError::Shape(format!(
            "cost {:?} against marginals ({}, {})",
            cost.dim(),
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() || q.is_empty() {
        return Err(TransportError::EmptyMeasure);
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(TransportError::NonFinite("cost matrix".into()));
    }
    Ok(())
}

fn finish(
    coupling: Array2<f64>,
    cost: &Array2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    opts: &SinkhornOptions,
    iterations_used: usize,
    domain: Domain,
) -> Result<TransportPlan, TransportError> {
    if coupling.iter().any(|x| !x.is_finite()) {
        return Err(TransportError::NonFinite("coupling".into()));
    }
    let transport_cost = (&coupling * cost).sum();
    let entropy: f64 = -coupling
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>();
    let marginal_error = marginal_violation(&coupling, p, q);
    Ok(TransportPlan {
        coupling,
        transport_cost,
        regularized_objective: transport_cost - opts.lambda * entropy,
        lambda: opts.lambda,
        iterations_used,
        marginal_error,
        converged: marginal_error < opts.tol,
        domain,
    })
}

fn solve_log(cost: &Array2<f64>, p: ArrayView1<f64>, q: ArrayView1<f64>, opts: &SinkhornOptions) -> Result<TransportPlan, TransportError> {
    let (n, m) = cost.dim();
    let lam = opts.lambda;
    let log_p: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let log_q: Vec<f64> = q.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let plan = |f: &[f64], g: &[f64]| {
        Array2::from_shape_fn((n, m), |(i, j)| ((f[i] + g[j] - cost[[i, j]]) / lam).exp())
    };
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        for i in 0..n {
            f[i] = if log_p[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                lam * log_p[i] - lam * log_sum_exp((0..m).map(|j| (g[j] - cost[[i, j]]) / lam))
            };
        }
        for j in 0..m {
            g[j] = if log_q[j] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                lam * log_q[j] - lam * log_sum_exp((0..n).map(|i| (f[i] - cost[[i, j]]) / lam))
            };
        }
        // columns are exact after the g-update; rows carry the violation
        let mut err: f64 = 0.0;
        for i in 0..n {
            if log_p[i] == f64::NEG_INFINITY {
                continue;
            }
            let row: f64 = (0..m).map(|j| ((f[i] + g[j] - cost[[i, j]]) / lam).exp()).sum();
            err = err.max((row - p[i]).abs());
        }
        if err < opts.tol {
            break;
        }
    }
    finish(plan(&f, &g), cost, p, q, opts, iterations, Domain::Log)
}

/// `None` when the kernel iteration underflows or loses finiteness.
fn solve_kernel(cost: &Array2<f64>, p: ArrayView1<f64>, q: ArrayView1<f64>, opts: &SinkhornOptions) -> Option<Result<TransportPlan, TransportError>> {
    let (n, m) = cost.dim();
    let kernel = cost.mapv(|c| (-c / opts.lambda).exp());
    if kernel.iter().any(|&k| k < f64::MIN_POSITIVE) {
        return None;
    }
    let mut u = Array1::<f64>::ones(n);
    let mut v = Array1::<f64>::ones(m);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let kv = kernel.dot(&v);
        u = Array1::from_shape_fn(n, |i| p[i] / kv[i]);
        let ktu = kernel.t().dot(&u);
        v = Array1::from_shape_fn(m, |j| q[j] / ktu[j]);
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return None;
        }
        let kv = kernel.dot(&v);
        let err = (0..n).map(|i| (u[i] * kv[i] - p[i]).abs()).fold(0.0, f64::max);
        if err < opts.tol {
            break;
        }
    }
    let coupling = Array2::from_shape_fn((n, m), |(i, j)| u[i] * kernel[[i, j]] * v[j]);
    Some(finish(coupling, cost, p, q, opts, iterations, Domain::Kernel))
}

/// Solve the entropic problem for an explicit cost matrix and marginals.
pub fn sinkhorn_plan(
    cost: &Array2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    opts: &SinkhornOptions,
) -> Result<TransportPlan, TransportError> {
    validate(cost, p, q, opts)?;
    match opts.domain {
        Domain::Log => solve_log(cost, p, q, opts),
        Domain::Kernel => solve_kernel(cost, p, q, opts).unwrap_or_else(|| solve_log(cost, p, q, opts)),
    }
}

/// Entropic transport between two (already standardized) measures on the
/// max-normalized Euclidean cost. `transport_cost` is the reported distance.
pub fn sinkhorn_w1(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    opts: &SinkhornOptions,
) -> Result<TransportPlan, TransportError> {
    let cost = CostMatrix::euclidean(a, b)?;
    sinkhorn_plan(&cost.normalized, a.weights().view(), b.weights().view(), opts)
}
