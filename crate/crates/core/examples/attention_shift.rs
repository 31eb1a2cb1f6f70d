// ΔA under a uniform position shift for learned APE, sinusoidal APE and
// RoPE, plus the inert-node translation of a trajectory.

use trajshift::kernel::{shift_sweep, translate_trajectory, Encoding, KernelConfig, KernelState};
use trajshift::projection::{project, structural_distance};
use trajshift::trajectory::{generate_trajectory, GenerationConfig, Strategy};

pub fn run_example() -> anyhow::Result<Vec<(Encoding, f64)>> {
    let mut out = Vec::new();
    for encoding in Encoding::ALL {
        let cfg = KernelConfig::new(64, 1024, encoding, 42);
        let state = KernelState::new(&cfg)?;
        let report = shift_sweep(&state, &cfg, 2000, &[1, 4, 16, 64, 256], 7)?;
        for row in &report.rows {
            println!(
                "{:<15} k={:<4} mean {:.3e}  max {:.3e}  positive {:.3}",
                encoding.to_string(),
                row.k,
                row.mean_da,
                row.max_da,
                row.frac_positive
            );
        }
        out.push((encoding, report.rows.iter().map(|r| r.max_da).fold(0.0, f64::max)));
    }

    let t = generate_trajectory(&GenerationConfig::new(Strategy::Dfs, 1, 3), 0)?;
    let shifted = translate_trajectory(&t, 16, t.nodes().len() / 2, t.token_len() + 16)?;
    let (u, v) = (project(&t)?, project(&shifted)?);
    println!(
        "translation by 16 tokens: χ4 {} → {}, displacement {:.4}",
        u.chi(4),
        v.chi(4),
        structural_distance(&u, &v)
    );
    Ok(out)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
