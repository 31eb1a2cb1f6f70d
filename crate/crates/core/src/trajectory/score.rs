//! Zero-one scoring of candidate outputs against a reference instance.

use std::collections::HashMap;

use super::countdown::State;
use super::parse::{parse_trajectory, NodeLine};
use super::Trajectory;

fn sorted(v: &[u64]) -> Vec<u64> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Whether `child` is `parent` plus exactly one legal step.
fn is_legal_child(parent: &State, child: &State) -> bool {
    let Some((step, prefix)) = child.steps.split_last() else {
        return false;
    };
    if prefix != parent.steps.as_slice() || !step.is_valid() {
        return false;
    }
    let mut pool = parent.remaining.clone();
    for operand in [step.lhs, step.rhs] {
        match pool.iter().position(|&x| x == operand) {
            Some(p) => {
                pool.swap_remove(p);
            }
            None => return false,
        }
    }
    pool.push(step.result);
    sorted(&pool) == sorted(&child.remaining)
}

/// 1 iff `candidate` parses, states the reference instance, every arithmetic
/// step is legal, and some node marked `Goal Reached` holds exactly the
/// target. Anything else scores 0.
pub fn score_output(reference: &Trajectory, candidate: &[String]) -> u8 {
    let Ok(trace) = parse_trajectory(candidate) else {
        return 0;
    };
    let inst = reference.instance();
    if trace.target != inst.target || sorted(&trace.operands) != sorted(&inst.operands) {
        return 0;
    }
    let mut states: HashMap<&str, &State> = HashMap::new();
    let mut reached = false;
    for (node, line) in trace.nodes.iter().zip(&trace.lines) {
        let NodeLine::Search { id, state } = line else {
            continue;
        };
        if state.target != inst.target {
            return 0;
        }
        let legal = match super::parent_id(id) {
            None => state.steps.is_empty() && sorted(&state.remaining) == sorted(&inst.operands),
            Some(p) => states.get(p).is_some_and(|parent| is_legal_child(parent, state)),
        };
        if !legal {
            return 0;
        }
        if node.outcome.goal {
            if !state.is_goal() {
                return 0;
            }
            reached = true;
        }
        states.insert(id.as_str(), state);
    }
    u8::from(reached)
}
