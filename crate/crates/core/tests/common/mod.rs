#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajshift::trajectory::{NodeRecord, OutcomeFlags, ProblemInstance, State, Strategy, Trajectory};

/// A grammar-valid trajectory over real Countdown states, built by
/// expanding random emitted nodes in random order, with occasional inert
/// nodes and outcome markers.
pub fn random_trajectory(seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let operands: Vec<u64> = (0..rng.random_range(2..=6)).map(|_| rng.random_range(1..=25)).collect();
    let instance = ProblemInstance::new(rng.random_range(10..=99), operands, seed).unwrap();
    let mut open: Vec<(String, State, u8)> = vec![("1".into(), instance.initial_state(), 0)];
    let mut nodes = vec![NodeRecord::search("1", &instance.initial_state(), flags(&mut rng, false))];
    let target_len = rng.random_range(1..40);
    while nodes.len() < target_len {
        if rng.random_bool(0.1) {
            let id = open.choose(&mut rng).unwrap().0.clone();
            nodes.push(NodeRecord::inert(&id, rng.random_range(12..30)).unwrap());
            continue;
        }
        let expandable: Vec<usize> = (0..open.len())
            .filter(|&i| open[i].2 < 9 && open[i].1.remaining.len() >= 2)
            .collect();
        let Some(&i) = expandable.choose(&mut rng) else { break };
        let child = open[i].1.successors().choose(&mut rng).unwrap().clone();
        open[i].2 += 1;
        let id = format!("{}{}", open[i].0, open[i].2);
        let last = nodes.len() + 1 == target_len;
        nodes.push(NodeRecord::search(&id, &child, flags(&mut rng, last)));
        open.push((id, child, 0));
    }
    let strategy = if rng.random_bool(0.5) { Strategy::Bfs } else { Strategy::Dfs };
    Trajectory::from_nodes(instance, strategy, nodes, false).unwrap()
}

fn flags(rng: &mut ChaCha8Rng, last: bool) -> OutcomeFlags {
    OutcomeFlags {
        prune: rng.random_bool(0.3),
        goal: last && rng.random_bool(0.5),
    }
}

fn q(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational features read off the raw text: depths from the node
/// lines, markers from whole lines, operators from the operation lists.
/// χ3 is returned squared (the population variance).
pub fn exact_features(text: &str) -> [BigRational; 12] {
    let mut depths = Vec::new();
    let (mut prunes, mut goal, mut mul, mut add) = (0usize, false, 0usize, 0usize);
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("Node ") {
            let id = &rest[..rest.find(':').unwrap()];
            depths.push(id.len());
        }
        if line == "No Solution" {
            prunes += 1;
        }
        if line == "Goal Reached" {
            goal = true;
        }
        if let Some(pos) = line.find("Operations:[") {
            let ops = &line[pos + "Operations:[".len()..line.rfind(']').unwrap()];
            mul += ops.chars().filter(|c| matches!(c, '*' | '/')).count();
            add += ops.chars().filter(|c| matches!(c, '+' | '-')).count();
        }
    }
    let n = depths.len();
    let mean = depths.iter().map(|&d| q(d)).sum::<BigRational>() / q(n);
    let var = depths
        .iter()
        .map(|&d| {
            let e = q(d) - &mean;
            &e * &e
        })
        .sum::<BigRational>()
        / q(n);
    let m = q(n.saturating_sub(1).max(1));
    let moves = |f: fn(usize, usize) -> bool| q(depths.windows(2).filter(|w| f(w[0], w[1])).count()) / &m;
    [
        q(*depths.iter().max().unwrap()),
        mean,
        var,
        q(n),
        moves(|a, b| b > a),
        moves(|a, b| b < a),
        moves(|a, b| b == a),
        q(prunes),
        q(prunes) / q(n),
        q(goal as usize),
        q(mul),
        q(add),
    ]
}

/// `|x − exact| ≤ tol` evaluated in exact arithmetic.
pub fn close(x: f64, exact: &BigRational, tol: f64) -> bool {
    let d = BigRational::from_float(x).unwrap() - exact;
    let t = BigRational::from_float(tol).unwrap();
    d <= t && -d <= t
}

/// Every exact feature matches `chi` to `tol` (χ3 compared through its square).
pub fn matches_exact(chi: &[f64; 12], exact: &[BigRational; 12], tol: f64) -> Result<(), String> {
    for i in 0..12 {
        let x = if i == 2 { chi[2] * chi[2] } else { chi[i] };
        if !close(x, &exact[i], tol) {
            return Err(format!("χ{} = {} disagrees with the exact value {}", i + 1, chi[i], exact[i]));
        }
    }
    Ok(())
}
