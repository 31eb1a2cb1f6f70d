//! End-to-end desk run: generate → project → W1 → Dyck depths → bounds.
//!
//! Every stage reads the files the previous stage wrote, so a run can be
//! resumed from any stage over an existing output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::{self, BoundInputs, DEFAULT_VOCAB};
use crate::dyck;
use crate::projection;
use crate::rng;
use crate::trajectory::corpus::{read_corpus, write_corpus};
use crate::trajectory::{generate_corpus, GenerationConfig, Strategy};
use crate::transport::{pipeline_w1, Method, SinkhornOptions, W1Config, W1Report};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Generate,
    Project,
    W1,
    Dyck,
    Bounds,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Generate, Stage::Project, Stage::W1, Stage::Dyck, Stage::Bounds];
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Generate => "generate",
            Stage::Project => "project",
            Stage::W1 => "w1",
            Stage::Dyck => "dyck",
            Stage::Bounds => "bounds",
        })
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("output directory {0} is not empty (pass --force to overwrite)")]
    NotEmpty(PathBuf),
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<Box<dyn std::error::Error + Send + Sync>>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::Stage { stage, source: e.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSizes {
    pub bfs: usize,
    pub dfs: usize,
    pub mixed: usize,
}

/// Bound inputs that do not come from the run itself. `W1` is the BFS→DFS
/// estimate and the χ1 samples are the DFS corpus depths. The defaults
/// describe a 12-layer, 768-wide model with source risk 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSettings {
    pub m: u64,
    #[serde(rename = "L")]
    pub l: u32,
    pub alpha_circ: f64,
    pub epsilon: f64,
    #[serde(rename = "C_width")]
    pub c_width: f64,
    pub vocab_size: usize,
    #[serde(rename = "K_f")]
    pub k_f: f64,
    pub source_risk: f64,
}

impl Default for BoundsSettings {
    fn default() -> Self {
        BoundsSettings {
            m: 768,
            l: 12,
            alpha_circ: 1.0,
            epsilon: 0.01,
            c_width: 1.0,
            vocab_size: DEFAULT_VOCAB,
            k_f: 1.0,
            source_risk: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_sizes: CorpusSizes,
    pub branching: usize,
    pub t_max: usize,
    pub n_sample: usize,
    pub pool: usize,
    pub lambda: f64,
    pub repeats: usize,
    /// Root seed; every stage seed is derived from it.
    pub seed: u64,
    pub bounds: BoundsSettings,
}

impl PipelineConfig {
    /// The desk-scale defaults: 3 × 2000 trajectories, 200-point samples.
    pub fn desk(seed: u64) -> Self {
        PipelineConfig {
            corpus_sizes: CorpusSizes {
                bfs: 2000,
                dfs: 2000,
                mixed: 2000,
            },
            branching: 4,
            t_max: 1024,
            n_sample: 200,
            pool: 2000,
            lambda: 0.1,
            repeats: 5,
            seed,
            bounds: BoundsSettings::default(),
        }
    }

    fn generation(&self, strategy: Strategy) -> GenerationConfig {
        let (size, index) = match strategy {
            Strategy::Bfs => (self.corpus_sizes.bfs, 0),
            Strategy::Dfs => (self.corpus_sizes.dfs, 1),
            Strategy::Mixed => (self.corpus_sizes.mixed, 2),
        };
        GenerationConfig {
            strategy,
            branching: self.branching,
            max_tokens: self.t_max,
            corpus_size: size,
            seed: rng::derive_seed(self.seed, index),
        }
    }

    fn w1(&self) -> W1Config {
        W1Config {
            n_sample: self.n_sample,
            pool: self.pool,
            repeats: self.repeats,
            seed: rng::derive_seed(self.seed, 3),
            method: Method::Sinkhorn,
            sinkhorn: SinkhornOptions {
                lambda: self.lambda,
                ..SinkhornOptions::default()
            },
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        for s in [Strategy::Bfs, Strategy::Dfs, Strategy::Mixed] {
            self.generation(s)
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        let w = self.w1();
        if w.n_sample == 0 || w.repeats == 0 || w.n_sample > w.pool {
            return Err(PipelineError::Config(format!(
                "need 0 < n_sample ≤ pool and repeats > 0 (n_sample {}, pool {}, repeats {})",
                w.n_sample, w.pool, w.repeats
            )));
        }
        if self.lambda <= 0.0 || !self.lambda.is_finite() {
            return Err(PipelineError::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        self.bound_inputs(0.0, vec![1.0])
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    fn bound_inputs(&self, w1: f64, samples: Vec<f64>) -> BoundInputs {
        let b = &self.bounds;
        BoundInputs {
            m: b.m,
            l: b.l,
            alpha_circ: b.alpha_circ,
            epsilon: b.epsilon,
            c_width: b.c_width,
            vocab_size: b.vocab_size,
            k_f: b.k_f,
            w1,
            source_risk: b.source_risk,
            target_chi1_samples: samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub kind: String,
    pub tool_version: String,
    pub config: PipelineConfig,
    pub stages: Vec<StageRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// File names written by each stage, relative to the output directory.
pub fn stage_outputs(stage: Stage) -> Vec<String> {
    let names = ["bfs", "dfs", "mixed"];
    match stage {
        Stage::Generate => names.iter().map(|n| format!("{n}.jsonl")).collect(),
        Stage::Project => names.iter().map(|n| format!("{n}.features.csv")).collect(),
        Stage::W1 => ["bfs_bfs", "bfs_mixed", "bfs_dfs"]
            .iter()
            .map(|p| format!("w1_{p}.json"))
            .collect(),
        Stage::Dyck => vec!["dfs.depths.csv".into()],
        Stage::Bounds => vec!["bounds.json".into()],
    }
}

fn stage_inputs(stage: Stage) -> Vec<String> {
    match stage {
        Stage::Generate => Vec::new(),
        Stage::Project | Stage::W1 => stage_outputs(Stage::Generate),
        Stage::Dyck => vec!["dfs.jsonl".into()],
        Stage::Bounds => vec!["w1_bfs_dfs.json".into(), "dfs.features.csv".into()],
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}

fn digests(dir: &Path, names: &[String]) -> std::io::Result<Vec<FileDigest>> {
    names
        .iter()
        .map(|n| {
            Ok(FileDigest {
                path: n.clone(),
                sha256: sha256_file(&dir.join(n))?,
            })
        })
        .collect()
}

fn run_stage(stage: Stage, cfg: &PipelineConfig, dir: &Path) -> Result<(), PipelineError> {
    match stage {
        Stage::Generate => {
            for (s, name) in [(Strategy::Bfs, "bfs"), (Strategy::Dfs, "dfs"), (Strategy::Mixed, "mixed")] {
                let corpus = generate_corpus(&cfg.generation(s)).at(stage)?;
                write_corpus(&dir.join(format!("{name}.jsonl")), &corpus).at(stage)?;
            }
        }
        Stage::Project => {
            for name in ["bfs", "dfs", "mixed"] {
                let corpus = read_corpus(&dir.join(format!("{name}.jsonl"))).at(stage)?;
                let m = projection::project_corpus(&corpus).at(stage)?;
                projection::write_features(&dir.join(format!("{name}.features.csv")), &m)
                    .at(stage)?;
            }
        }
        Stage::W1 => {
            let w1 = cfg.w1();
            let pairs = [("bfs", "bfs"), ("bfs", "mixed"), ("bfs", "dfs")];
            let reports: Vec<W1Report> = pairs
                .par_iter()
                .map(|(a, b)| {
                    pipeline_w1(&dir.join(format!("{a}.jsonl")), &dir.join(format!("{b}.jsonl")), &w1).map(|r| r.0)
                })
                .collect::<Result<_, _>>()
                .at(stage)?;
            for ((a, b), report) in pairs.iter().zip(&reports) {
                write_json(&dir.join(format!("w1_{a}_{b}.json")), report).at(stage)?;
            }
        }
        Stage::Dyck => {
            let corpus = read_corpus(&dir.join("dfs.jsonl")).at(stage)?;
            let rows = dyck::depth_report(&corpus).at(stage)?;
            dyck::write_depth_report(&dir.join("dfs.depths.csv"), &rows).at(stage)?;
        }
        Stage::Bounds => {
            let text = fs::read_to_string(dir.join("w1_bfs_dfs.json")).at(stage)?;
            let report: W1Report = serde_json::from_str(&text).at(stage)?;
            let features = projection::read_features(&dir.join("dfs.features.csv")).at(stage)?;
            let samples = features.column(0).to_vec();
            let inputs = cfg.bound_inputs(report.mean, samples);
            let out = bounds::unified_bound(&inputs).at(stage)?;
            write_json(&dir.join("bounds.json"), &out).at(stage)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Overwrite files in a non-empty output directory.
    pub force: bool,
    /// First stage to run; earlier stages' files must already exist.
    pub from: Stage,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            force: false,
            from: Stage::Generate,
        }
    }
}

/// Run the stages from `opts.from` onward, writing artifacts and
/// `manifest.json` into `dir`. A failing stage leaves earlier artifacts in
/// place.
pub fn run_pipeline(cfg: &PipelineConfig, dir: &Path, opts: RunOptions) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    if opts.from == Stage::Generate && !opts.force && dir.exists() {
        let mut entries = fs::read_dir(dir).at(opts.from)?;
        if entries.next().is_some() {
            return Err(PipelineError::NotEmpty(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).at(opts.from)?;

    let mut stages = Vec::new();
    for stage in Stage::ALL.into_iter().filter(|s| *s >= opts.from) {
        let start = Instant::now();
        run_stage(stage, cfg, dir)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        stages.push(StageRecord {
            stage,
            inputs: digests(dir, &stage_inputs(stage)).at(stage)?,
            outputs: digests(dir, &stage_outputs(stage)).at(stage)?,
            wall_clock_ms: elapsed,
        });
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        kind: "run-manifest".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        stages,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest).at(Stage::Bounds)?;
    Ok(manifest)
}
