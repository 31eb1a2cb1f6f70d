// Generate BFS and DFS trajectories for one instance, print them, and
// round-trip a corpus through its JSON-lines form.

use trajshift::trajectory::{generate_corpus, score_output, GenerationConfig, Strategy, Trajectory};

pub fn run_example() -> anyhow::Result<Vec<Trajectory>> {
    let mut shown = Vec::new();
    for strategy in [Strategy::Bfs, Strategy::Dfs] {
        let mut cfg = GenerationConfig::new(strategy, 50, 11);
        cfg.max_tokens = 256;
        let corpus = generate_corpus(&cfg)?;
        let t = corpus[0].clone();
        println!("--- {strategy}: {} nodes, {} tokens", t.nodes().len(), t.token_len());
        println!("{}", t.text());

        for u in &corpus {
            assert_eq!(&Trajectory::from_json_line(&u.to_json_line())?, u);
        }
        let solved = corpus.iter().filter(|u| score_output(u, u.tokens()) == 1).count();
        println!("{solved}/{} trajectories reach the target", corpus.len());
        shown.push(t);
    }
    Ok(shown)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
