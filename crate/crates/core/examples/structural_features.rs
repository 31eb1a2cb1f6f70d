// Project BFS and DFS corpora onto the 12 structural coordinates and
// compare their means.

use trajshift::projection::{project_corpus, DIM};
use trajshift::trajectory::{generate_corpus, GenerationConfig, Strategy};

pub fn run_example() -> anyhow::Result<[[f64; DIM]; 2]> {
    let mut means = [[0.0; DIM]; 2];
    for (row, (strategy, seed)) in [(Strategy::Bfs, 1), (Strategy::Dfs, 2)].into_iter().enumerate() {
        let m = project_corpus(&generate_corpus(&GenerationConfig::new(strategy, 500, seed))?)?;
        for (j, x) in m.mean_axis(ndarray::Axis(0)).expect("non-empty").iter().enumerate() {
            means[row][j] = *x;
        }
    }
    println!("{:>6} {:>10} {:>10}", "", "BFS", "DFS");
    for (j, (b, d)) in means[0].iter().zip(&means[1]).enumerate() {
        println!("{:>6} {b:>10.4} {d:>10.4}", format!("chi{}", j + 1));
    }
    Ok(means)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
