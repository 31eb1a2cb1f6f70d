use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use trajshift::bounds::{ceiling_fit, unified_bound, BoundInputs};
use trajshift::dyck::{depth_report, write_depth_report};
use trajshift::kernel::{shift_sweep, Encoding, KernelConfig, KernelState};
use trajshift::pipeline::{run_pipeline, write_json, PipelineConfig, RunOptions, Stage};
use trajshift::projection::{project_corpus, read_features, write_features};
use trajshift::trajectory::corpus::{read_corpus, write_corpus};
use trajshift::trajectory::{generate_corpus, GenerationConfig, Strategy};
use trajshift::transport::{pipeline_w1, Method, SinkhornOptions, TransportError, W1Config};
use trajshift::validate::validate_files;

#[derive(Parser)]
#[command(name = "trajshift", version, about = "Structural shift analysis of search trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus of search trajectories.
    Gen {
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1024)]
        t_max: usize,
        #[arg(long, default_value_t = 4)]
        branching: usize,
    },
    /// Project a corpus onto the 12 structural features.
    Project {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate W1 between two corpora.
    W1(W1Args),
    /// Dyck nesting depth against χ1 for every trajectory.
    Dyck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// ΔA statistics of an attention kernel under position shifts.
    KernelSweep {
        #[arg(long)]
        encoding: Encoding,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        probes: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,4,16,64,256")]
        shifts: Vec<usize>,
        #[arg(long, default_value_t = 1024)]
        max_position: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the unified lower and upper bounds.
    Bounds {
        #[arg(long)]
        inputs: PathBuf,
        /// Feature CSV whose χ1 column replaces the inputs' samples.
        #[arg(long)]
        chi1: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the accuracy ceiling to (L, accuracy) points.
    Calibrate {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run generate → project → w1 → dyck → bounds into one directory.
    Pipeline(PipelineArgs),
    /// Check artifact files; exits 1 on any violation.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct W1Args {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Points per sample.
    #[arg(long = "n", default_value_t = 200)]
    n_sample: usize,
    #[arg(long, default_value_t = 2000)]
    pool: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Solve the unregularized problem exactly (small samples only).
    #[arg(long)]
    exact: bool,
    /// Write the coupling of the last repeat.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Required unless the config file sets it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    corpus_size: Option<usize>,
    #[arg(long)]
    n_sample: Option<usize>,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    force: bool,
    /// Resume from this stage over an existing directory.
    #[arg(long, default_value = "generate")]
    from: Stage,
}

enum Failure {
    Usage(anyhow::Error),
    Validation,
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen {
            strategy,
            n,
            seed,
            out,
            t_max,
            branching,
        } => {
            let cfg = GenerationConfig {
                strategy,
                branching,
                max_tokens: t_max,
                corpus_size: n,
                seed,
            };
            cfg.validate().map_err(usage)?;
            let corpus = generate_corpus(&cfg).map_err(usage)?;
            write_corpus(&out, &corpus).context("writing corpus")?;
            let truncated = corpus.iter().filter(|t| t.truncated()).count();
            eprintln!("wrote {} trajectories ({truncated} truncated) to {}", corpus.len(), out.display());
        }
        Command::Project { input, out } => {
            let corpus = read_corpus(&input).context("reading corpus")?;
            let m = project_corpus(&corpus).context("projecting")?;
            write_features(&out, &m).context("writing features")?;
        }
        Command::W1(args) => w1(args)?,
        Command::Dyck { input, report } => {
            let corpus = read_corpus(&input).context("reading corpus")?;
            let rows = depth_report(&corpus).context("projecting")?;
            write_depth_report(&report, &rows).context("writing report")?;
            let bad = rows.iter().filter(|r| !r.valid).count();
            eprintln!("{} trajectories, {bad} without a matching balanced prefix", rows.len());
        }
        Command::KernelSweep {
            encoding,
            dim,
            probes,
            shifts,
            max_position,
            seed,
            out,
        } => {
            let cfg = KernelConfig::new(dim, max_position, encoding, seed);
            let state = KernelState::new(&cfg).map_err(usage)?;
            let report = shift_sweep(&state, &cfg, probes, &shifts, seed).map_err(usage)?;
            write_json(&out, &report).context("writing sweep")?;
        }
        Command::Bounds { inputs, chi1, out } => {
            let mut bi: BoundInputs = read_json(&inputs)?;
            if let Some(path) = chi1 {
                let m = read_features(&path).context("reading features")?;
                bi.target_chi1_samples = m.column(0).to_vec();
            }
            let report = unified_bound(&bi).map_err(usage)?;
            if !report.consistent {
                for d in &report.diagnostics {
                    eprintln!("warning: {d}");
                }
            }
            write_json(&out, &report).context("writing report")?;
        }
        Command::Calibrate { points, out } => {
            let mut r = csv::Reader::from_path(&points).context("reading points")?;
            let mut pts = Vec::new();
            for rec in r.deserialize::<(f64, f64)>() {
                pts.push(rec.map_err(|e| usage(format!("{}: {e}", points.display())))?);
            }
            let fit = ceiling_fit(&pts).map_err(usage)?;
            write_json(&out, &fit).context("writing fit")?;
        }
        Command::Pipeline(args) => pipeline(args)?,
        Command::Validate { paths } => {
            let diags = validate_files(&paths);
            for d in &diags {
                println!("{d}");
            }
            if !diags.is_empty() {
                return Err(Failure::Validation);
            }
            println!("{} file(s) valid", paths.len());
        }
    }
    Ok(())
}

fn w1(args: W1Args) -> Result<(), Failure> {
    let cfg = W1Config {
        n_sample: args.n_sample,
        pool: args.pool,
        repeats: args.repeats,
        seed: args.seed,
        method: if args.exact { Method::Exact } else { Method::Sinkhorn },
        sinkhorn: SinkhornOptions {
            lambda: args.lambda,
            ..SinkhornOptions::default()
        },
    };
    let (report, plan) = pipeline_w1(&args.a, &args.b, &cfg).map_err(|e| match e {
        TransportError::Corpus(_) | TransportError::Projection(_) => Failure::Internal(e.into()),
        _ => usage(e),
    })?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_json(&args.out, &report).context("writing report")?;
    if let Some(path) = args.plan_out {
        write_json(&path, &plan).context("writing plan")?;
    }
    println!("W1 = {:.6} ± {:.6}", report.mean, report.std);
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => read_json::<PipelineConfig>(path)?,
        None => PipelineConfig::desk(args.seed.ok_or_else(|| usage("--seed is required without --config"))?),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.corpus_size {
        cfg.corpus_sizes.bfs = n;
        cfg.corpus_sizes.dfs = n;
        cfg.corpus_sizes.mixed = n;
    }
    cfg.n_sample = args.n_sample.unwrap_or(cfg.n_sample);
    cfg.pool = args.pool.unwrap_or(cfg.pool);
    cfg.lambda = args.lambda.unwrap_or(cfg.lambda);
    cfg.repeats = args.repeats.unwrap_or(cfg.repeats);
    let opts = RunOptions {
        force: args.force,
        from: args.from,
    };
    let manifest = run_pipeline(&cfg, &args.out, opts).map_err(|e| match e {
        trajshift::pipeline::PipelineError::Stage { .. } => Failure::Internal(e.into()),
        _ => usage(e),
    })?;
    for s in &manifest.stages {
        eprintln!("{:>9}  {:>9.1} ms", s.stage.to_string(), s.wall_clock_ms);
    }
    Ok(())
}
