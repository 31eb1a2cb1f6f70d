//! Closed-form generalization bounds and the accuracy-ceiling calibration.
//!
//! The target risk is bracketed by
//!
//! ```text
//! max(C_width/√m − ε,  C_depth·p_deep − ε,  R_S − K_f·W1 − 2ε)
//!     ≤ R_T ≤  R_S + K_f·W1 + 2ε
//! ```
//!
//! where `p_deep` is the target mass of trajectories deeper than `α_circ·L`
//! and `C_depth = 1 − 1/|V|`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SCHEMA_VERSION;

/// GPT-2 vocabulary size.
pub const DEFAULT_VOCAB: usize = 50_257;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("vocabulary size must be at least 2, got {0}")]
    Vocab(usize),
    #[error("depth bound needs at least one χ1 sample")]
    EmptySamples,
    #[error("invalid bound input: {0}")]
    Invalid(String),
    #[error("invalid calibration points: {0}")]
    Points(String),
}

/// `γ = 1 − 1/|V|`.
pub fn gamma(vocab_size: usize) -> Result<f64, BoundsError> {
    if vocab_size < 2 {
        return Err(BoundsError::Vocab(vocab_size));
    }
    Ok(1.0 - 1.0 / vocab_size as f64)
}

/// `K_f·W1 + 2ε`.
pub fn transport_gap_bound(k_f: f64, w1: f64, epsilon: f64) -> f64 {
    k_f * w1 + 2.0 * epsilon
}

/// `C_width/√m − ε`.
pub fn width_bound(c_width: f64, m: u64, epsilon: f64) -> f64 {
    c_width / (m as f64).sqrt() - epsilon
}

fn default_one() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_vocab() -> usize {
    DEFAULT_VOCAB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub m: u64,
    #[serde(rename = "L")]
    pub l: u32,
    #[serde(default = "default_one")]
    pub alpha_circ: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(rename = "C_width", default = "default_one")]
    pub c_width: f64,
    #[serde(default = "default_vocab")]
    pub vocab_size: usize,
    #[serde(rename = "K_f")]
    pub k_f: f64,
    #[serde(rename = "W1")]
    pub w1: f64,
    pub source_risk: f64,
    #[serde(default)]
    pub target_chi1_samples: Vec<f64>,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<(), BoundsError> {
        let reals = [
            ("alpha_circ", self.alpha_circ),
            ("epsilon", self.epsilon),
            ("C_width", self.c_width),
            ("K_f", self.k_f),
            ("W1", self.w1),
            ("source_risk", self.source_risk),
        ];
        if let Some((name, v)) = reals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(BoundsError::Invalid(format!("{name} = {v} is not finite")));
        }
        if self.m == 0 || self.l == 0 {
            return Err(BoundsError::Invalid("m and L must be positive".into()));
        }
        if self.alpha_circ <= 0.0 || self.c_width <= 0.0 {
            return Err(BoundsError::Invalid("alpha_circ and C_width must be positive".into()));
        }
        if self.epsilon < 0.0 || self.k_f < 0.0 || self.w1 < 0.0 {
            return Err(BoundsError::Invalid("epsilon, K_f and W1 must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.source_risk) {
            return Err(BoundsError::Invalid(format!("source_risk {} outside [0, 1]", self.source_risk)));
        }
        if self.target_chi1_samples.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(BoundsError::Invalid("χ1 samples must be positive and finite".into()));
        }
        gamma(self.vocab_size).map(|_| ())
    }
}

/// `(C_depth·p_deep − ε, p_deep)` with `p_deep = #{χ1 > α_circ·L}/n`.
pub fn depth_bound(inputs: &BoundInputs) -> Result<(f64, f64), BoundsError> {
    let samples = &inputs.target_chi1_samples;
    if samples.is_empty() {
        return Err(BoundsError::EmptySamples);
    }
    let threshold = inputs.alpha_circ * inputs.l as f64;
    let deep = samples.iter().filter(|&&x| x > threshold).count();
    let p_deep = deep as f64 / samples.len() as f64;
    Ok((gamma(inputs.vocab_size)? * p_deep - inputs.epsilon, p_deep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActiveTerm {
    Width,
    Depth,
    Transport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub kind: String,
    pub lb_width: f64,
    pub lb_depth: f64,
    pub lb_transport: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Largest lower-bound term; ties resolve to the first of width, depth,
    /// transport.
    pub active_term: ActiveTerm,
    pub p_deep: f64,
    #[serde(rename = "C_depth")]
    pub c_depth: f64,
    /// False when some lower bound exceeds the upper bound, which no real
    /// target risk can satisfy.
    pub consistent: bool,
    pub diagnostics: Vec<String>,
}

pub fn unified_bound(inputs: &BoundInputs) -> Result<BoundReport, BoundsError> {
    inputs.validate()?;
    let lb_width = width_bound(inputs.c_width, inputs.m, inputs.epsilon);
    let (lb_depth, p_deep) = depth_bound(inputs)?;
    let gap = transport_gap_bound(inputs.k_f, inputs.w1, inputs.epsilon);
    let lb_transport = inputs.source_risk - gap;
    let upper_bound = inputs.source_risk + gap;

    let terms = [
        (ActiveTerm::Width, lb_width),
        (ActiveTerm::Depth, lb_depth),
        (ActiveTerm::Transport, lb_transport),
    ];
    let (active_term, lower_bound) = terms
        .iter()
        .copied()
        .fold(terms[0], |best, t| if t.1 > best.1 { t } else { best });

    let mut diagnostics = Vec::new();
    for (term, value) in terms {
        if value > upper_bound {
            diagnostics.push(format!(
                "{term:?} lower bound {value} exceeds the upper bound {upper_bound}; inputs are jointly inconsistent"
            ));
        }
    }
    Ok(BoundReport {
        schema_version: SCHEMA_VERSION,
        kind: "bound-report".into(),
        lb_width,
        lb_depth,
        lb_transport,
        lower_bound,
        upper_bound,
        active_term,
        p_deep,
        c_depth: gamma(inputs.vocab_size)?,
        consistent: diagnostics.is_empty(),
        diagnostics,
    })
}

/// `A_max − β·exp(−α·L)`.
pub fn ceiling(a_max: f64, beta: f64, alpha: f64, l: f64) -> f64 {
    a_max - beta * (-alpha * l).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeilingFit {
    pub schema_version: u32,
    pub kind: String,
    #[serde(rename = "A_max")]
    pub a_max: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Points strictly above the fitted curve.
    pub violations: usize,
    /// Σ(ceiling(L_i) − acc_i).
    pub objective: f64,
}

impl CeilingFit {
    pub fn eval(&self, l: f64) -> f64 {
        ceiling(self.a_max, self.beta, self.alpha, l)
    }
}

pub const ALPHA_RANGE: (f64, f64) = (0.01, 1.0);
pub const BETA_RANGE: (f64, f64) = (0.001, 0.5);
pub const ALPHA_STEP: f64 = 0.01;
pub const BETA_STEP: f64 = 0.001;

/// Smallest feasible `A_max` for `(β, α)` and the resulting objective.
fn envelope(points: &[(f64, f64)], beta: f64, alpha: f64) -> (f64, f64) {
    let lift = |l: f64| beta * (-alpha * l).exp();
    let a = points.iter().map(|&(l, acc)| acc + lift(l)).fold(f64::NEG_INFINITY, f64::max);
    let obj = points.iter().map(|&(l, acc)| a - lift(l) - acc).sum();
    (a, obj)
}

/// Tightest curve `A_max − β·exp(−α·L)` lying on or above every point.
///
/// A grid over α and β (with the smallest feasible `A_max` for each pair)
/// picks a start, then a compass search with step halving refines it inside
/// the same box. Ties keep the earlier grid point.
pub fn ceiling_fit(points: &[(f64, f64)]) -> Result<CeilingFit, BoundsError> {
    if points.len() < 3 {
        return Err(BoundsError::Points(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points
        .iter()
        .find(|(l, acc)| !l.is_finite() || !(0.0..=1.0).contains(acc))
    {
        return Err(BoundsError::Points(format!("bad point {p:?}")));
    }
    let n_alpha = ((ALPHA_RANGE.1 - ALPHA_RANGE.0) / ALPHA_STEP).round() as usize;
    let n_beta = ((BETA_RANGE.1 - BETA_RANGE.0) / BETA_STEP).round() as usize;
    let mut best = (f64::INFINITY, BETA_RANGE.0, ALPHA_RANGE.0);
    for i in 0..=n_alpha {
        let alpha = ALPHA_RANGE.0 + i as f64 * ALPHA_STEP;
        for j in 0..=n_beta {
            let beta = BETA_RANGE.0 + j as f64 * BETA_STEP;
            let (_, obj) = envelope(points, beta, alpha);
            if obj < best.0 {
                best = (obj, beta, alpha);
            }
        }
    }

    let (mut obj, mut beta, mut alpha) = best;
    let (mut db, mut da) = (BETA_STEP, ALPHA_STEP);
    while db > 1e-12 || da > 1e-12 {
        let mut moved = false;
        for (sb, sa) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let b = (beta + sb * db).clamp(BETA_RANGE.0, BETA_RANGE.1);
            let a = (alpha + sa * da).clamp(ALPHA_RANGE.0, ALPHA_RANGE.1);
            let (_, o) = envelope(points, b, a);
            if o < obj {
                (obj, beta, alpha) = (o, b, a);
                moved = true;
                break;
            }
        }
        if !moved {
            db /= 2.0;
            da /= 2.0;
        }
    }

    let (mut a_max, _) = envelope(points, beta, alpha);
    while points.iter().any(|&(l, acc)| acc > ceiling(a_max, beta, alpha, l)) {
        a_max = a_max.next_up();
    }
    let obj = points.iter().map(|&(l, acc)| ceiling(a_max, beta, alpha, l) - acc).sum();
    let violations = points
        .iter()
        .filter(|&&(l, acc)| acc > ceiling(a_max, beta, alpha, l))
        .count();
    Ok(CeilingFit {
        schema_version: SCHEMA_VERSION,
        kind: "ceiling-fit".into(),
        a_max,
        beta,
        alpha,
        violations,
        objective: obj,
    })
}
