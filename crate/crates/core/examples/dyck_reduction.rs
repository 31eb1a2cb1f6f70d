// Map a DFS trajectory to search moves, erase evaluations, and read off
// the bracket nesting depth.

use trajshift::dyck::{check_balanced_prefix, nesting_depth, psi, to_transitions, BalanceCheck, ROOT_OFFSET};
use trajshift::projection::project;
use trajshift::trajectory::{generate_trajectory, GenerationConfig, Strategy};

pub fn run_example() -> anyhow::Result<usize> {
    let t = generate_trajectory(&GenerationConfig::new(Strategy::Dfs, 1, 42), 0)?;
    let ids: Vec<&str> = t.nodes().iter().map(|n| n.id.as_str()).collect();
    println!("node ids: {}", ids.join(" "));
    let moves = to_transitions(&t)?;
    println!("moves: {:?}", moves.0);
    let dyck = psi(&moves);
    assert_eq!(check_balanced_prefix(&dyck), BalanceCheck::Valid);
    let depth = nesting_depth(&dyck)?;
    println!(
        "{} brackets, nesting depth {depth}, χ1 = {}",
        dyck.brackets().len(),
        project(&t)?.chi(1)
    );
    assert_eq!((depth + ROOT_OFFSET) as f64, project(&t)?.chi(1));
    Ok(depth)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
