use std::collections::HashMap;

use proptest::prelude::*;
use trajshift::trajectory::{
    generate_corpus, generate_trajectory, parse_trajectory, GenerationConfig, NodeRecord, Strategy, Trajectory,
};

fn search_nodes(t: &Trajectory) -> Vec<&NodeRecord> {
    t.nodes().iter().filter(|n| !n.is_inert()).collect()
}

fn child_count(t: &Trajectory, n: &NodeRecord, k: usize) -> usize {
    let inst = t.instance();
    let state = trajshift::trajectory::State::initial(inst.target, &inst.operands);
    // replay the node's steps from the root
    let mut s = state;
    for step in n.text.split("Operations:[").nth(1).unwrap().trim_end_matches(']').split(", ") {
        if step.is_empty() {
            continue;
        }
        s = s
            .successors()
            .into_iter()
            .find(|c| c.steps.last().map(|x| x.to_string()).as_deref() == Some(step))
            .expect("step is a legal successor");
    }
    if s.is_goal() || s.remaining.len() < 2 {
        0
    } else {
        s.capped_successors(inst.seed, &n.id, k).len()
    }
}

/// Replays a DFS trajectory against an explicit path stack: every node must
/// be the next unvisited child of the node on top of the stack after
/// popping, and a node is popped only once all its children were visited.
fn dfs_replay(t: &Trajectory, k: usize) -> Result<(), String> {
    let nodes = search_nodes(t);
    let mut stack: Vec<(&NodeRecord, usize)> = Vec::new();
    for n in &nodes {
        loop {
            match stack.last() {
                None if n.id == "1" => break,
                None => return Err(format!("{} has no open ancestor", n.id)),
                Some((top, _)) if n.id.len() == top.id.len() + 1 && n.id.starts_with(top.id.as_str()) => break,
                Some((top, visited)) => {
                    if *visited != child_count(t, top, k) {
                        return Err(format!("left {} after {visited} children", top.id));
                    }
                    stack.pop();
                }
            }
        }
        if let Some((_, visited)) = stack.last_mut() {
            *visited += 1;
            let digit = (n.id.as_bytes()[n.id.len() - 1] - b'0') as usize;
            if digit != *visited {
                return Err(format!("{} visited out of order", n.id));
            }
        }
        stack.push((n, 0));
    }
    Ok(())
}

/// BFS emits nodes by depth, and within a depth in the order their parents
/// were emitted, children in digit order.
fn bfs_replay(t: &Trajectory) -> Result<(), String> {
    let nodes = search_nodes(t);
    let position: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let key = |n: &NodeRecord| {
        let parent = &n.id[..n.id.len() - 1];
        (n.id.len(), position.get(parent).copied().unwrap_or(0), n.id.clone())
    };
    for w in nodes.windows(2) {
        if key(w[0]) >= key(w[1]) {
            return Err(format!("{} before {}", w[0].id, w[1].id));
        }
    }
    Ok(())
}

#[test]
fn dfs_follows_stack_discipline() {
    let cfg = GenerationConfig::new(Strategy::Dfs, 300, 17);
    for (i, t) in generate_corpus(&cfg).unwrap().iter().enumerate() {
        dfs_replay(t, cfg.branching).unwrap_or_else(|e| panic!("trajectory {i}: {e}"));
    }
}

#[test]
fn bfs_follows_level_order() {
    let cfg = GenerationConfig::new(Strategy::Bfs, 300, 18);
    for (i, t) in generate_corpus(&cfg).unwrap().iter().enumerate() {
        bfs_replay(t).unwrap_or_else(|e| panic!("trajectory {i}: {e}"));
    }
}

#[test]
fn dfs_moves_are_child_backtrack_or_sibling() {
    let corpus = generate_corpus(&GenerationConfig::new(Strategy::Dfs, 300, 19)).unwrap();
    for t in &corpus {
        for w in search_nodes(t).windows(2) {
            let (a, b) = (&w[0].id, &w[1].id);
            let child = b.len() == a.len() + 1 && b.starts_with(a.as_str());
            let parent = &b[..b.len() - 1];
            let backtrack_or_sibling = b.len() <= a.len() && a.starts_with(parent);
            assert!(child || backtrack_or_sibling, "{a} → {b}");
        }
    }
}

#[test]
fn dfs_seed_42_backtracks_after_a_prune() {
    let t = generate_trajectory(&GenerationConfig::new(Strategy::Dfs, 1, 42), 0).unwrap();
    let n = t.nodes();
    let found = (1..n.len()).any(|i| n[i - 1].outcome.prune && n[i].depth < n[i - 1].depth);
    assert!(found, "no depth decrease after a prune");
}

#[test]
fn corpora_are_deterministic_and_schedule_independent() {
    let cfg = GenerationConfig::new(Strategy::Mixed, 200, 23);
    let a: Vec<String> = generate_corpus(&cfg).unwrap().iter().map(Trajectory::to_json_line).collect();
    let b: Vec<String> = generate_corpus(&cfg).unwrap().iter().map(Trajectory::to_json_line).collect();
    assert_eq!(a, b);
    for (i, line) in a.iter().enumerate().step_by(17) {
        assert_eq!(&generate_trajectory(&cfg, i as u64).unwrap().to_json_line(), line);
    }
}

#[test]
fn mixed_is_a_fair_coin() {
    let corpus = generate_corpus(&GenerationConfig::new(Strategy::Mixed, 1000, 29)).unwrap();
    let bfs = corpus.iter().filter(|t| t.strategy() == Strategy::Bfs).count();
    assert!((450..=550).contains(&bfs), "{bfs} BFS of 1000");
    assert!(corpus.iter().all(|t| t.strategy() != Strategy::Mixed));
}

#[test]
fn every_generated_text_parses_back() {
    let corpus = generate_corpus(&GenerationConfig::new(Strategy::Mixed, 200, 31)).unwrap();
    for t in &corpus {
        let p = parse_trajectory(t.tokens()).unwrap();
        assert_eq!((p.target, &p.operands), (t.instance().target, &t.instance().operands));
        assert_eq!(p.nodes, t.nodes());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn budget_and_round_trip(seed in any::<u64>(), t_max in 64usize..1500, k in 1usize..=6, dfs in any::<bool>()) {
        let strategy = if dfs { Strategy::Dfs } else { Strategy::Bfs };
        let cfg = GenerationConfig { strategy, branching: k, max_tokens: t_max, corpus_size: 8, seed };
        let corpus = match generate_corpus(&cfg) {
            Ok(c) => c,
            Err(trajshift::trajectory::TrajectoryError::Capacity { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        for t in &corpus {
            prop_assert!(t.token_len() <= t_max);
            prop_assert_eq!(&Trajectory::from_json_line(&t.to_json_line()).unwrap(), t);
            let goal = t.nodes().iter().any(|n| n.outcome.goal);
            prop_assert!(!(goal && t.truncated()));
            prop_assert!(t.nodes().iter().all(|n| n.id.bytes().all(|b| (b'1'..=b'0' + k as u8).contains(&b))));
        }
    }
}
