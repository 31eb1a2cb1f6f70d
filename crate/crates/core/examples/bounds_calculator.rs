// Evaluate the unified risk bounds for a DFS target and fit an accuracy
// ceiling to depth-indexed points.

use trajshift::bounds::{ceiling, ceiling_fit, unified_bound, BoundInputs, DEFAULT_VOCAB};
use trajshift::projection::project_corpus;
use trajshift::trajectory::{generate_corpus, GenerationConfig, Strategy};

pub fn run_example() -> anyhow::Result<f64> {
    let dfs = project_corpus(&generate_corpus(&GenerationConfig::new(Strategy::Dfs, 500, 5))?)?;
    for l in [2, 3, 4] {
        let inputs = BoundInputs {
            m: 768,
            l,
            alpha_circ: 1.0,
            epsilon: 0.01,
            c_width: 1.0,
            vocab_size: DEFAULT_VOCAB,
            k_f: 1.0,
            w1: 0.59,
            source_risk: 0.45,
            target_chi1_samples: dfs.column(0).to_vec(),
        };
        let r = unified_bound(&inputs)?;
        println!(
            "L={l}: p_deep {:.3}  lower {:.4} ({:?})  upper {:.4}  consistent {}",
            r.p_deep, r.lower_bound, r.active_term, r.upper_bound, r.consistent
        );
    }

    let points: Vec<(f64, f64)> = [2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 48.0]
        .iter()
        .map(|&l| (l, ceiling(0.538, 0.045, 0.15, l) - 0.002 * (l as i64 % 3) as f64))
        .collect();
    let fit = ceiling_fit(&points)?;
    println!(
        "ceiling fit: A_max {:.4}  β {:.4}  α {:.4}  violations {}  ceiling(12) {:.5}",
        fit.a_max,
        fit.beta,
        fit.alpha,
        fit.violations,
        fit.eval(12.0)
    );
    Ok(fit.eval(12.0))
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
