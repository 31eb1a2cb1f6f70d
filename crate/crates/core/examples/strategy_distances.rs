// W1 between BFS, DFS and MIXED corpora on the normalized scale.

use trajshift::projection::project_corpus;
use trajshift::trajectory::{generate_corpus, GenerationConfig, Strategy};
use trajshift::transport::{w1_between_features, W1Config};

pub fn run_example() -> anyhow::Result<Vec<(String, f64)>> {
    let features = |strategy, seed| -> anyhow::Result<_> {
        Ok(project_corpus(&generate_corpus(&GenerationConfig::new(strategy, 2000, seed))?)?)
    };
    let bfs = features(Strategy::Bfs, 1)?;
    let dfs = features(Strategy::Dfs, 2)?;
    let mixed = features(Strategy::Mixed, 3)?;
    let cfg = W1Config::new(200, 2000, 5, 7);
    let mut out = Vec::new();
    for (name, other, same) in [("BFS,BFS", &bfs, true), ("BFS,MIXED", &mixed, false), ("BFS,DFS", &dfs, false)] {
        let (report, _) = w1_between_features(["bfs", name], &bfs, other, same, &cfg)?;
        println!("W({name}) = {:.4} ± {:.4}", report.mean, report.std);
        out.push((name.to_string(), report.mean));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
