//! Pre-softmax attention scores under absolute and rotary position
//! encodings, the shift perturbation ΔA, and the inert-node translation of a
//! trajectory.
//!
//! With absolute encodings the score between positions `i` and `j` is
//! `(x_i + p_i)ᵀ W_Qᵀ W_K (x_j + p_j)`; shifting both positions by `k`
//! changes it whenever `W_Qᵀ W_K ≠ 0`. With rotary encodings the score is
//! `x_iᵀ W_Qᵀ R^{j−i} W_K x_j` and depends on `j − i` only.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::trajectory::{NodeRecord, Trajectory, TrajectoryError};
use crate::SCHEMA_VERSION;

/// Threshold above which a shift counts as having changed the score.
pub const POSITIVE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel config: {0}")]
    Config(String),
    #[error("position {index} out of range (max_position {max})")]
    Index { index: usize, max: usize },
    #[error("vector of length {got} where head_dim is {expected}")]
    Dim { expected: usize, got: usize },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encoding {
    #[serde(rename = "APE_learned")]
    ApeLearned,
    #[serde(rename = "APE_sinusoidal")]
    ApeSinusoidal,
    #[serde(rename = "RoPE")]
    Rope,
}

impl Encoding {
    pub const ALL: [Encoding; 3] = [Encoding::ApeLearned, Encoding::ApeSinusoidal, Encoding::Rope];
}

impl std::str::FromStr for Encoding {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ape" | "ape_learned" | "ape-learned" => Ok(Encoding::ApeLearned),
            "ape-sin" | "ape_sinusoidal" | "ape-sinusoidal" => Ok(Encoding::ApeSinusoidal),
            "rope" => Ok(Encoding::Rope),
            _ => Err(KernelError::Config(format!("unknown encoding `{s}`"))),
        }
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Encoding::ApeLearned => "APE_learned",
            Encoding::ApeSinusoidal => "APE_sinusoidal",
            Encoding::Rope => "RoPE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub head_dim: usize,
    pub max_position: usize,
    pub encoding: Encoding,
    pub rope_base: f64,
    pub seed: u64,
}

impl KernelConfig {
    pub fn new(head_dim: usize, max_position: usize, encoding: Encoding, seed: u64) -> Self {
        KernelConfig {
            head_dim,
            max_position,
            encoding,
            rope_base: 10_000.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.head_dim == 0 || !self.head_dim.is_multiple_of(2) {
            return Err(KernelError::Config(format!(
                "head_dim must be even and positive, got {}",
                self.head_dim
            )));
        }
        if self.max_position == 0 {
            return Err(KernelError::Config("max_position must be positive".into()));
        }
        if self.rope_base <= 0.0 || !self.rope_base.is_finite() {
            return Err(KernelError::Config(format!("rope_base must be positive, got {}", self.rope_base)));
        }
        Ok(())
    }

    /// Rotary frequencies θ_s = base^(−2s/d).
    pub fn frequencies(&self) -> Vec<f64> {
        let d = self.head_dim as f64;
        (0..self.head_dim / 2)
            .map(|s| self.rope_base.powf(-2.0 * s as f64 / d))
            .collect()
    }
}

/// Projection matrices and the absolute position table.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelState {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    /// `max_position × d`; zeros for RoPE.
    pub positions: Array2<f64>,
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

fn sinusoidal_table(max_position: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((max_position, d), |(t, c)| {
        let freq = 10_000f64.powf(-((c - c % 2) as f64) / d as f64);
        let angle = t as f64 * freq;
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

impl KernelState {
    /// Gaussian projections with std 1/√d; learned positions are standard
    /// normal.
    pub fn new(cfg: &KernelConfig) -> Result<Self, KernelError> {
        cfg.validate()?;
        let d = cfg.head_dim;
        let mut r = rng::stream(cfg.seed, 0);
        let std = 1.0 / (d as f64).sqrt();
        let wq = gaussian_matrix(d, d, std, &mut r);
        let wk = gaussian_matrix(d, d, std, &mut r);
        let positions = match cfg.encoding {
            Encoding::ApeLearned => gaussian_matrix(cfg.max_position, d, 1.0, &mut r),
            Encoding::ApeSinusoidal => sinusoidal_table(cfg.max_position, d),
            Encoding::Rope => Array2::zeros((cfg.max_position, d)),
        };
        let state = KernelState { wq, wk, positions };
        if state.product().iter().all(|&x| x == 0.0) {
            return Err(KernelError::Config("W_Qᵀ W_K vanished under the initializer".into()));
        }
        Ok(state)
    }

    /// Nonzero projections with `W_Qᵀ W_K = 0`: the query weights live in the
    /// first half of the output rows and the key weights in the second.
    pub fn with_zero_product(cfg: &KernelConfig) -> Result<Self, KernelError> {
        let mut state = KernelState::new(cfg)?;
        let half = cfg.head_dim / 2;
        for r in 0..cfg.head_dim {
            if r < half {
                state.wk.row_mut(r).fill(0.0);
            } else {
                state.wq.row_mut(r).fill(0.0);
            }
        }
        Ok(state)
    }

    /// `W_Qᵀ W_K`.
    pub fn product(&self) -> Array2<f64> {
        self.wq.t().dot(&self.wk)
    }
}

fn check(cfg: &KernelConfig, v: ArrayView1<f64>, indices: &[usize]) -> Result<(), KernelError> {
    if v.len() != cfg.head_dim {
        return Err(KernelError::Dim {
            expected: cfg.head_dim,
            got: v.len(),
        });
    }
    for &index in indices {
        if index >= cfg.max_position {
            return Err(KernelError::Index {
                index,
                max: cfg.max_position,
            });
        }
    }
    Ok(())
}

/// Rotate consecutive coordinate pairs of `v` by `t·θ_s`.
pub fn rotate(v: ArrayView1<f64>, t: f64, freqs: &[f64]) -> Array1<f64> {
    let mut out = v.to_owned();
    for (s, &theta) in freqs.iter().enumerate() {
        let (sin, cos) = (t * theta).sin_cos();
        let (x, y) = (v[2 * s], v[2 * s + 1]);
        out[2 * s] = cos * x - sin * y;
        out[2 * s + 1] = sin * x + cos * y;
    }
    out
}

/// Block-diagonal rotation `R_Θ^t` as a dense matrix.
pub fn rotation_matrix(cfg: &KernelConfig, t: f64) -> Array2<f64> {
    let mut r = Array2::zeros((cfg.head_dim, cfg.head_dim));
    for (s, theta) in cfg.frequencies().into_iter().enumerate() {
        let (sin, cos) = (t * theta).sin_cos();
        r[[2 * s, 2 * s]] = cos;
        r[[2 * s, 2 * s + 1]] = -sin;
        r[[2 * s + 1, 2 * s]] = sin;
        r[[2 * s + 1, 2 * s + 1]] = cos;
    }
    r
}

/// Pre-softmax score between a query token `xa` at position `i` and a key
/// token `xb` at position `j`.
pub fn attention_score(
    state: &KernelState,
    cfg: &KernelConfig,
    xa: ArrayView1<f64>,
    xb: ArrayView1<f64>,
    i: usize,
    j: usize,
) -> Result<f64, KernelError> {
    check(cfg, xa, &[i, j])?;
    check(cfg, xb, &[])?;
    Ok(match cfg.encoding {
        Encoding::ApeLearned | Encoding::ApeSinusoidal => {
            let q = state.wq.dot(&(&xa + &state.positions.row(i)));
            let k = state.wk.dot(&(&xb + &state.positions.row(j)));
            q.dot(&k)
        }
        Encoding::Rope => {
            let freqs = cfg.frequencies();
            let q = rotate(state.wq.dot(&xa).view(), i as f64, &freqs);
            let k = rotate(state.wk.dot(&xb).view(), j as f64, &freqs);
            q.dot(&k)
        }
    })
}

/// The rotary score through the relative rotation:
/// `(W_Q x_a)ᵀ R^{j−i} (W_K x_b)`.
pub fn rope_score_relative(
    state: &KernelState,
    cfg: &KernelConfig,
    xa: ArrayView1<f64>,
    xb: ArrayView1<f64>,
    i: usize,
    j: usize,
) -> Result<f64, KernelError> {
    check(cfg, xa, &[i, j])?;
    check(cfg, xb, &[])?;
    let q = state.wq.dot(&xa);
    let k = rotate(state.wk.dot(&xb).view(), j as f64 - i as f64, &cfg.frequencies());
    Ok(q.dot(&k))
}

/// Two tokens at positions `a` and `b`, compared against the same tokens
/// shifted to `a + k` and `b + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftProbe {
    pub xa: Array1<f64>,
    pub xb: Array1<f64>,
    pub a: usize,
    pub b: usize,
    pub k: usize,
}

impl ShiftProbe {
    /// Standard normal tokens and positions uniform in `[0, span)`.
    pub fn random<R: Rng>(d: usize, span: usize, k: usize, rng: &mut R) -> Self {
        let mut vec = || Array1::from_shape_fn(d, |_| StandardNormal.sample(rng));
        let (xa, xb) = (vec(), vec());
        ShiftProbe {
            xa,
            xb,
            a: rng.random_range(0..span),
            b: rng.random_range(0..span),
            k,
        }
    }
}

/// Token projections reused across shifts.
struct Projected {
    q: Array1<f64>,
    k: Array1<f64>,
}

impl Projected {
    fn new(state: &KernelState, xa: ArrayView1<f64>, xb: ArrayView1<f64>) -> Self {
        Projected {
            q: state.wq.dot(&xa),
            k: state.wk.dot(&xb),
        }
    }

    fn score(&self, state: &KernelState, cfg: &KernelConfig, freqs: &[f64], i: usize, j: usize) -> f64 {
        match cfg.encoding {
            Encoding::ApeLearned | Encoding::ApeSinusoidal => {
                let q = &self.q + &state.wq.dot(&state.positions.row(i));
                let k = &self.k + &state.wk.dot(&state.positions.row(j));
                q.dot(&k)
            }
            Encoding::Rope => {
                rotate(self.q.view(), i as f64, freqs).dot(&rotate(self.k.view(), j as f64, freqs))
            }
        }
    }

    fn delta(&self, state: &KernelState, cfg: &KernelConfig, freqs: &[f64], a: usize, b: usize, k: usize) -> f64 {
        (self.score(state, cfg, freqs, a + k, b + k) - self.score(state, cfg, freqs, a, b)).abs()
    }
}

/// `|A_{a+k, b+k} − A_{a, b}|` for the configured encoding.
pub fn delta_a(state: &KernelState, cfg: &KernelConfig, probe: &ShiftProbe) -> Result<f64, KernelError> {
    check(cfg, probe.xa.view(), &[probe.a + probe.k, probe.b + probe.k])?;
    check(cfg, probe.xb.view(), &[])?;
    let p = Projected::new(state, probe.xa.view(), probe.xb.view());
    Ok(p.delta(state, cfg, &cfg.frequencies(), probe.a, probe.b, probe.k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub encoding: Encoding,
    pub k: usize,
    #[serde(rename = "mean_dA")]
    pub mean_da: f64,
    #[serde(rename = "max_dA")]
    pub max_da: f64,
    pub frac_positive: f64,
    /// max ΔA over a unit structural displacement.
    pub lipschitz_proxy: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub kind: String,
    pub head_dim: usize,
    pub max_position: usize,
    pub n_probes: usize,
    pub seed: u64,
    pub positive_threshold: f64,
    pub rows: Vec<SweepRow>,
}

/// ΔA statistics for each shift in `k_values` over `n_probes` seeded probes.
///
/// Probe `n` draws its tokens and base positions from its own stream, so the
/// same probes are reused for every `k`. Base positions are uniform below
/// `max_position − max(k_values)`; shifts that still overflow are skipped.
pub fn shift_sweep(
    state: &KernelState,
    cfg: &KernelConfig,
    n_probes: usize,
    k_values: &[usize],
    seed: u64,
) -> Result<SweepReport, KernelError> {
    cfg.validate()?;
    let max_k = k_values.iter().copied().max().unwrap_or(0);
    let span = cfg.max_position.saturating_sub(max_k).max(1);
    let freqs = cfg.frequencies();
    let deltas: Vec<Vec<Option<f64>>> = (0..n_probes)
        .into_par_iter()
        .map(|n| {
            let probe = ShiftProbe::random(cfg.head_dim, span.min(cfg.max_position), 0, &mut rng::stream(seed, n as u64));
            let p = Projected::new(state, probe.xa.view(), probe.xb.view());
            k_values
                .iter()
                .map(|&k| {
                    (probe.a.max(probe.b) + k < cfg.max_position)
                        .then(|| p.delta(state, cfg, &freqs, probe.a, probe.b, k))
                })
                .collect()
        })
        .collect();

    let rows = k_values
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let vals: Vec<f64> = deltas.iter().filter_map(|row| row[c]).collect();
            let n = vals.len();
            let max = vals.iter().copied().fold(0.0, f64::max);
            SweepRow {
                encoding: cfg.encoding,
                k,
                mean_da: if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { 0.0 },
                max_da: max,
                frac_positive: if n > 0 {
                    vals.iter().filter(|&&v| v > POSITIVE_THRESHOLD).count() as f64 / n as f64
                } else {
                    0.0
                },
                lipschitz_proxy: max,
                evaluated: n,
                skipped: n_probes - n,
            }
        })
        .collect();
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        kind: "kernel-sweep".into(),
        head_dim: cfg.head_dim,
        max_position: cfg.max_position,
        n_probes,
        seed,
        positive_threshold: POSITIVE_THRESHOLD,
        rows,
    })
}

/// Insert an inert node of exactly `k_tokens` tokens before node `position`
/// (`position == nodes.len()` appends). The inert node restates the id of
/// the node before it, so depths and tree structure are unchanged.
pub fn translate_trajectory(
    t: &Trajectory,
    k_tokens: usize,
    position: usize,
    t_max: usize,
) -> Result<Trajectory, KernelError> {
    let nodes = t.nodes();
    if position > nodes.len() {
        return Err(KernelError::Config(format!(
            "insertion position {position} past {} nodes",
            nodes.len()
        )));
    }
    let needed = t.token_len() + k_tokens;
    if needed > t_max {
        return Err(TrajectoryError::Budget { budget: t_max, needed }.into());
    }
    let id = if position == 0 { "1" } else { nodes[position - 1].id.as_str() };
    let mut out = nodes.to_vec();
    out.insert(position, NodeRecord::inert(id, k_tokens)?);
    Ok(Trajectory::from_nodes(t.instance().clone(), t.strategy(), out, t.truncated())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::project;
    use crate::trajectory::{generate_trajectory, GenerationConfig, Strategy};

    fn setup(encoding: Encoding, d: usize) -> (KernelConfig, KernelState) {
        let cfg = KernelConfig::new(d, 512, encoding, 5);
        let state = KernelState::new(&cfg).unwrap();
        (cfg, state)
    }

    fn probe(d: usize, seed: u64, k: usize) -> ShiftProbe {
        ShiftProbe::random(d, 200, k, &mut rng::stream(seed, 0))
    }

    #[test]
    fn rope_same_position_is_plain_bilinear() {
        let (cfg, state) = setup(Encoding::Rope, 16);
        let p = probe(16, 1, 0);
        let plain = p.xa.dot(&state.product().dot(&p.xb));
        let s = attention_score(&state, &cfg, p.xa.view(), p.xb.view(), 37, 37).unwrap();
        assert!((s - plain).abs() < 1e-12);
    }

    #[test]
    fn ape_with_zero_table_is_plain_bilinear() {
        let (cfg, mut state) = setup(Encoding::ApeLearned, 16);
        state.positions.fill(0.0);
        let p = probe(16, 2, 0);
        let plain = p.xa.dot(&state.product().dot(&p.xb));
        let s = attention_score(&state, &cfg, p.xa.view(), p.xb.view(), 3, 90).unwrap();
        assert!((s - plain).abs() < 1e-12);
    }

    #[test]
    fn rope_relative_route_agrees() {
        let (cfg, state) = setup(Encoding::Rope, 64);
        for seed in 0..50 {
            let p = probe(64, seed, 0);
            let a = attention_score(&state, &cfg, p.xa.view(), p.xb.view(), p.a, p.b).unwrap();
            let b = rope_score_relative(&state, &cfg, p.xa.view(), p.xb.view(), p.a, p.b).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn rotations_are_orthogonal_and_compose() {
        let cfg = KernelConfig::new(16, 512, Encoding::Rope, 0);
        let eye = Array2::<f64>::eye(16);
        for (i, j) in [(0.0, 5.0), (17.0, 3.0), (300.0, 301.0)] {
            let ri = rotation_matrix(&cfg, i);
            let rj = rotation_matrix(&cfg, j);
            assert!((ri.t().dot(&ri) - &eye).iter().all(|x| x.abs() < 1e-12));
            let rel = rotation_matrix(&cfg, j - i);
            assert!((ri.t().dot(&rj) - rel).iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn shift_response_by_encoding() {
        for d in [16, 64] {
            let (cfg, state) = setup(Encoding::Rope, d);
            let (acfg, astate) = setup(Encoding::ApeLearned, d);
            for seed in 0..100 {
                let p = probe(d, seed, 1 + seed as usize % 50);
                assert!(delta_a(&state, &cfg, &p).unwrap() < 1e-9);
                assert!(delta_a(&astate, &acfg, &p).unwrap() > 1e-6);
            }
        }
    }

    #[test]
    fn periodic_table_cancels() {
        let (cfg, mut state) = setup(Encoding::ApeLearned, 16);
        let k = 7;
        for t in k..cfg.max_position {
            let prev = state.positions.row(t - k).to_owned();
            state.positions.row_mut(t).assign(&prev);
        }
        let p = probe(16, 3, k);
        assert!(delta_a(&state, &cfg, &p).unwrap() < 1e-12);
    }

    #[test]
    fn zero_product_is_shift_blind() {
        let cfg = KernelConfig::new(16, 512, Encoding::ApeLearned, 5);
        let state = KernelState::with_zero_product(&cfg).unwrap();
        assert!(state.product().iter().all(|&x| x == 0.0));
        assert!(state.wq.iter().any(|&x| x != 0.0) && state.wk.iter().any(|&x| x != 0.0));
        for seed in 0..20 {
            assert_eq!(delta_a(&state, &cfg, &probe(16, seed, 9)).unwrap(), 0.0);
        }
    }

    #[test]
    fn out_of_range_and_bad_dims_are_rejected() {
        let (cfg, state) = setup(Encoding::Rope, 16);
        let p = probe(16, 0, 0);
        assert!(matches!(
            attention_score(&state, &cfg, p.xa.view(), p.xb.view(), 512, 0),
            Err(KernelError::Index { .. })
        ));
        let mut bad = probe(16, 0, 400);
        bad.a = 200;
        assert!(delta_a(&state, &cfg, &bad).is_err());
        assert!(KernelConfig::new(15, 10, Encoding::Rope, 0).validate().is_err());
    }

    #[test]
    fn sweep_rows() {
        let (cfg, state) = setup(Encoding::Rope, 16);
        let r = shift_sweep(&state, &cfg, 200, &[1, 16, 400], 3).unwrap();
        assert!(r.rows.iter().all(|row| row.max_da < 1e-9 && row.frac_positive == 0.0));
        assert_eq!(r.rows[2].evaluated + r.rows[2].skipped, 200);
        let (acfg, astate) = setup(Encoding::ApeSinusoidal, 16);
        let r = shift_sweep(&astate, &acfg, 200, &[1, 16], 3).unwrap();
        assert!(r.rows.iter().all(|row| row.frac_positive == 1.0));
        assert_eq!(r, shift_sweep(&astate, &acfg, 200, &[1, 16], 3).unwrap());
    }

    #[test]
    fn translation_adds_one_node() {
        let t = generate_trajectory(&GenerationConfig::new(Strategy::Dfs, 1, 4), 0).unwrap();
        let before = project(&t).unwrap();
        let u = translate_trajectory(&t, 12, 3, 2048).unwrap();
        assert_eq!(u.token_len(), t.token_len() + 12);
        let after = project(&u).unwrap();
        assert_eq!(after.chi(4), before.chi(4) + 1.0);
        assert_eq!(after.chi(1), before.chi(1));
        let end = translate_trajectory(&t, 9, t.nodes().len(), 2048).unwrap();
        assert_eq!(&end.tokens()[..t.token_len()], t.tokens());
        assert!(matches!(
            translate_trajectory(&t, 9, 0, t.token_len() + 8),
            Err(KernelError::Trajectory(TrajectoryError::Budget { .. }))
        ));
    }
}
