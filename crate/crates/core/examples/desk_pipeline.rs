// Run the full pipeline at a reduced size into a temporary directory and
// validate every artifact it wrote.

use trajshift::pipeline::{run_pipeline, CorpusSizes, PipelineConfig, RunOptions};
use trajshift::validate::validate_files;

pub fn run_example() -> anyhow::Result<usize> {
    let dir = std::env::temp_dir().join(format!("trajshift-desk-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let mut cfg = PipelineConfig::desk(2024);
    cfg.corpus_sizes = CorpusSizes {
        bfs: 400,
        dfs: 400,
        mixed: 400,
    };
    (cfg.n_sample, cfg.pool) = (100, 400);
    let manifest = run_pipeline(&cfg, &dir, RunOptions::default())?;
    let mut files = Vec::new();
    for stage in &manifest.stages {
        for out in &stage.outputs {
            println!("{:<8} {:<22} {}", stage.stage.to_string(), out.path, &out.sha256[..16]);
            files.push(dir.join(&out.path));
        }
    }
    files.push(dir.join("manifest.json"));
    let diagnostics = validate_files(&files);
    for d in &diagnostics {
        println!("{d}");
    }
    std::fs::remove_dir_all(&dir)?;
    anyhow::ensure!(diagnostics.is_empty(), "{} violations", diagnostics.len());
    Ok(files.len())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
