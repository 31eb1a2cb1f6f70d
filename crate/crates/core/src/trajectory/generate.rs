//! BFS / DFS / mixed corpus generation.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::countdown::{InstanceSampler, State};
use super::{
    token_count, NodeRecord, OutcomeFlags, ProblemInstance, Strategy, Trajectory, TrajectoryError,
    MAX_BRANCHING, MIN_TOKEN_BUDGET,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub strategy: Strategy,
    /// Maximum children expanded per node.
    pub branching: usize,
    /// Token budget per trajectory.
    pub max_tokens: usize,
    pub corpus_size: usize,
    pub seed: u64,
}

impl GenerationConfig {
    pub fn new(strategy: Strategy, corpus_size: usize, seed: u64) -> Self {
        GenerationConfig {
            strategy,
            branching: 4,
            max_tokens: 1024,
            corpus_size,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.branching == 0 || self.branching > MAX_BRANCHING {
            return Err(TrajectoryError::Config(format!(
                "branching must lie in 1..={MAX_BRANCHING}, got {}",
                self.branching
            )));
        }
        if self.max_tokens < MIN_TOKEN_BUDGET {
            return Err(TrajectoryError::Config(format!(
                "token budget must be at least {MIN_TOKEN_BUDGET}, got {}",
                self.max_tokens
            )));
        }
        if self.corpus_size == 0 {
            return Err(TrajectoryError::Config("corpus size must be positive".into()));
        }
        Ok(())
    }
}

/// Generate a full corpus. Trajectory `i` depends only on `(seed, i)`, so the
/// parallel result is identical to a serial one.
pub fn generate_corpus(cfg: &GenerationConfig) -> Result<Vec<Trajectory>, TrajectoryError> {
    cfg.validate()?;
    (0..cfg.corpus_size)
        .into_par_iter()
        .map(|i| generate_trajectory(cfg, i as u64))
        .collect()
}

/// Generate trajectory number `index` of the corpus described by `cfg`.
pub fn generate_trajectory(cfg: &GenerationConfig, index: u64) -> Result<Trajectory, TrajectoryError> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, index);
    let strategy = match cfg.strategy {
        Strategy::Mixed => {
            if rng.random_bool(0.5) {
                Strategy::Bfs
            } else {
                Strategy::Dfs
            }
        }
        s => s,
    };
    let (target, operands) = InstanceSampler::default().sample(&mut rng);
    let instance = ProblemInstance::new(target, operands, rng.random())?;
    let (nodes, truncated) = search(&instance, strategy, cfg.branching, cfg.max_tokens)?;
    Trajectory::from_nodes(instance, strategy, nodes, truncated)
}

/// Frontier discipline: FIFO for BFS, LIFO for DFS.
enum Frontier {
    Queue(VecDeque<(String, State)>),
    Stack(Vec<(String, State)>),
}

impl Frontier {
    fn pop(&mut self) -> Option<(String, State)> {
        match self {
            Frontier::Queue(q) => q.pop_front(),
            Frontier::Stack(s) => s.pop(),
        }
    }

    fn push_children(&mut self, children: Vec<(String, State)>) {
        match self {
            Frontier::Queue(q) => q.extend(children),
            // first child ends on top
            Frontier::Stack(s) => s.extend(children.into_iter().rev()),
        }
    }
}

fn search(
    instance: &ProblemInstance,
    strategy: Strategy,
    branching: usize,
    budget: usize,
) -> Result<(Vec<NodeRecord>, bool), TrajectoryError> {
    let mut used = token_count(&instance.prompt_line()) + 1;
    let mut frontier = match strategy {
        Strategy::Bfs => Frontier::Queue(VecDeque::new()),
        Strategy::Dfs => Frontier::Stack(Vec::new()),
        Strategy::Mixed => unreachable!("mixed strategy is resolved per trajectory"),
    };
    frontier.push_children(vec![("1".to_string(), instance.initial_state())]);

    let mut nodes = Vec::new();
    let mut truncated = false;
    while let Some((id, state)) = frontier.pop() {
        let goal = state.is_goal();
        let children = if goal || state.remaining.len() < 2 {
            Vec::new()
        } else {
            state.capped_successors(instance.seed, &id, branching)
        };
        let outcome = OutcomeFlags {
            prune: !goal && children.is_empty(),
            goal,
        };
        let record = NodeRecord::search(&id, &state, outcome);
        let cost = token_count(&record.block());
        if used + cost > budget {
            if nodes.is_empty() {
                return Err(TrajectoryError::Capacity {
                    budget,
                    needed: used + cost,
                });
            }
            truncated = true;
            break;
        }
        used += cost;
        nodes.push(record);
        if goal {
            break;
        }
        frontier.push_children(
            children
                .into_iter()
                .enumerate()
                .map(|(c, s)| (format!("{id}{}", c + 1), s))
                .collect(),
        );
    }
    Ok((nodes, truncated))
}
