//! Countdown search trajectories: generation, serialization, parsing and
//! scoring.
//!
//! A trajectory is rendered one line at a time:
//!
//! ```text
//! Current State: 24:[3, 5, 8, 2], Operations:[]
//! Node 1: Current State: 24:[3, 5, 8, 2], Operations:[]
//! Node 11: Current State: 24:[8, 8, 2], Operations:[5+3=8]
//! ...
//! Node 1121: Current State: 24:[24], Operations:[5+3=8, 8*2=16, 16+8=24]
//! Goal Reached
//! ```
//!
//! The first line is the initial problem state; every later line is either a
//! node line or an outcome marker (`No Solution`, `Goal Reached`) attached to
//! the node line above it. Node identifiers are digit strings over `1..=k`:
//! the root is `1` and a child appends one digit to its parent.

mod countdown;
mod generate;
mod parse;
mod score;
mod tokenize;

pub mod corpus;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use countdown::{InstanceSampler, Operator, State, Step};
pub use generate::{generate_corpus, generate_trajectory, GenerationConfig};
pub use parse::{parse_node_line, parse_trajectory, NodeLine, ParsedTrace};
pub use score::score_output;
pub use tokenize::{token_count, tokenize};

pub const PRUNE_MARKER: &str = "No Solution";
pub const GOAL_MARKER: &str = "Goal Reached";
/// Smallest admissible token budget.
pub const MIN_TOKEN_BUDGET: usize = 64;
/// Largest branching factor expressible with single-digit identifiers.
pub const MAX_BRANCHING: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("grammar error at node {node}: {message}")]
    Grammar { node: usize, message: String },
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("token budget of {budget} cannot hold the root node ({needed} tokens needed)")]
    Capacity { budget: usize, needed: usize },
    #[error("token budget exceeded: {needed} tokens > {budget}")]
    Budget { budget: usize, needed: usize },
    #[error("serialized trajectory is inconsistent: {0}")]
    Inconsistent(String),
}

/// The Countdown problem a trajectory solves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub target: u64,
    pub operands: Vec<u64>,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn new(target: u64, operands: Vec<u64>, seed: u64) -> Result<Self, TrajectoryError> {
        if target < 1 {
            return Err(TrajectoryError::Config("target must be at least 1".into()));
        }
        if operands.is_empty() || operands.contains(&0) {
            return Err(TrajectoryError::Config(
                "operands must be a non-empty list of positive integers".into(),
            ));
        }
        Ok(ProblemInstance {
            target,
            operands,
            seed,
        })
    }

    pub fn initial_state(&self) -> State {
        State::initial(self.target, &self.operands)
    }

    /// The initial-state line every trajectory starts with.
    pub fn prompt_line(&self) -> String {
        format!(
            "Current State: {}:[{}], Operations:[]",
            self.target,
            self.initial_state().render_numbers()
        )
    }
}

/// Search strategy label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "BFS")]
    Bfs,
    #[serde(rename = "DFS")]
    Dfs,
    #[serde(rename = "MIXED")]
    Mixed,
}

impl std::str::FromStr for Strategy {
    type Err = TrajectoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bfs" => Ok(Strategy::Bfs),
            "dfs" => Ok(Strategy::Dfs),
            "mixed" => Ok(Strategy::Mixed),
            other => Err(TrajectoryError::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Bfs => "BFS",
            Strategy::Dfs => "DFS",
            Strategy::Mixed => "MIXED",
        })
    }
}

/// Outcome markers attached to a node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeFlags {
    pub prune: bool,
    pub goal: bool,
}

/// One emitted node: identifier, depth, rendered line and outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub depth: usize,
    pub text: String,
    pub outcome: OutcomeFlags,
}

impl NodeRecord {
    /// A search node rendering `state`.
    pub fn search(id: &str, state: &State, outcome: OutcomeFlags) -> Self {
        NodeRecord {
            id: id.to_string(),
            depth: id.len(),
            text: format!(
                "Node {id}: Current State: {}:[{}], Operations:[{}]",
                state.target,
                state.render_numbers(),
                state.render_steps()
            ),
            outcome,
        }
    }

    /// A structurally inert node restating `id`, padded to exactly
    /// `k_tokens` tokens including its line break.
    pub fn inert(id: &str, k_tokens: usize) -> Result<Self, TrajectoryError> {
        let base = format!("Node {id}: x=x");
        let needed = token_count(&base) + 1;
        if k_tokens < needed {
            return Err(TrajectoryError::Config(format!(
                "inert node needs at least {needed} tokens, got {k_tokens}"
            )));
        }
        let text = base + &" x".repeat(k_tokens - needed);
        Ok(NodeRecord {
            id: id.to_string(),
            depth: id.len(),
            text,
            outcome: OutcomeFlags::default(),
        })
    }

    pub fn is_inert(&self) -> bool {
        self.text
            .strip_prefix("Node ")
            .and_then(|rest| rest.strip_prefix(self.id.as_str()))
            .is_some_and(|rest| rest.starts_with(": x=x"))
    }

    /// Rendered block: the node line followed by its outcome markers.
    pub fn block(&self) -> String {
        let mut s = String::with_capacity(self.text.len() + 32);
        s.push_str(&self.text);
        s.push('\n');
        if self.outcome.prune {
            s.push_str(PRUNE_MARKER);
            s.push('\n');
        }
        if self.outcome.goal {
            s.push_str(GOAL_MARKER);
            s.push('\n');
        }
        s
    }
}

/// Identifier of `id`'s parent, or `None` for a depth-one identifier.
pub fn parent_id(id: &str) -> Option<&str> {
    (id.len() > 1).then(|| &id[..id.len() - 1])
}

/// Check the node sequence against the trajectory grammar.
///
/// Identifiers are non-empty strings over `1..=9` whose length is the node
/// depth. The first search node is the root `1`; every later search node is
/// new and its parent has already been emitted. Inert nodes restate the
/// identifier of an emitted search node (or the root identifier before any
/// search node) and carry no outcome.
pub fn check_grammar(nodes: &[NodeRecord]) -> Result<(), TrajectoryError> {
    let mut seen: HashSet<&str> = HashSet::new();
    for (i, node) in nodes.iter().enumerate() {
        let err = |message: String| TrajectoryError::Grammar { node: i, message };
        if node.id.is_empty() || !node.id.bytes().all(|b| (b'1'..=b'9').contains(&b)) {
            return Err(err(format!("identifier {:?} is not a digit string over 1..9", node.id)));
        }
        if node.depth != node.id.len() {
            return Err(err(format!(
                "depth {} does not match identifier {:?}",
                node.depth, node.id
            )));
        }
        if node.is_inert() {
            if node.outcome != OutcomeFlags::default() {
                return Err(err("inert node carries an outcome marker".into()));
            }
            let ok = seen.contains(node.id.as_str()) || (seen.is_empty() && node.id == "1");
            if !ok {
                return Err(err(format!("inert node restates unknown node {:?}", node.id)));
            }
            continue;
        }
        if seen.is_empty() {
            if node.id != "1" {
                return Err(err(format!("first node must be the root \"1\", got {:?}", node.id)));
            }
        } else {
            if seen.contains(node.id.as_str()) {
                return Err(err(format!("identifier {:?} emitted twice", node.id)));
            }
            match parent_id(&node.id) {
                Some(p) if seen.contains(p) => {}
                Some(p) => {
                    return Err(err(format!(
                        "identifier {:?} expands parent {p:?} before it was emitted",
                        node.id
                    )))
                }
                None => return Err(err(format!("second depth-one node {:?}", node.id))),
            }
        }
        seen.insert(node.id.as_str());
    }
    Ok(())
}

/// Render the full text of a trajectory.
pub fn render_text(instance: &ProblemInstance, nodes: &[NodeRecord]) -> String {
    let mut text = instance.prompt_line();
    text.push('\n');
    for n in nodes {
        text.push_str(&n.block());
    }
    text
}

/// A grammar-checked search trajectory.
///
/// Immutable after construction; the token sequence is always the
/// tokenization of the rendered instance and nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory")]
pub struct Trajectory {
    instance: ProblemInstance,
    strategy: Strategy,
    nodes: Vec<NodeRecord>,
    tokens: Vec<String>,
    truncated: bool,
}

#[derive(Deserialize)]
struct RawTrajectory {
    instance: ProblemInstance,
    strategy: Strategy,
    nodes: Vec<NodeRecord>,
    tokens: Vec<String>,
    #[serde(default)]
    truncated: bool,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = TrajectoryError;

    fn try_from(raw: RawTrajectory) -> Result<Self, Self::Error> {
        let parsed = parse_trajectory(&raw.tokens)?;
        if parsed.target != raw.instance.target || parsed.operands != raw.instance.operands {
            return Err(TrajectoryError::Inconsistent(
                "prompt line does not match the instance".into(),
            ));
        }
        if parsed.nodes != raw.nodes {
            return Err(TrajectoryError::Inconsistent(
                "node list does not match the token sequence".into(),
            ));
        }
        if raw.tokens != tokenize(&render_text(&raw.instance, &raw.nodes)) {
            return Err(TrajectoryError::Inconsistent(
                "token sequence is not the canonical rendering".into(),
            ));
        }
        Ok(Trajectory {
            instance: raw.instance,
            strategy: raw.strategy,
            nodes: raw.nodes,
            tokens: raw.tokens,
            truncated: raw.truncated,
        })
    }
}

impl Trajectory {
    /// Build from parts, checking the grammar and that every node line
    /// parses back to the same record.
    pub fn from_nodes(
        instance: ProblemInstance,
        strategy: Strategy,
        nodes: Vec<NodeRecord>,
        truncated: bool,
    ) -> Result<Self, TrajectoryError> {
        check_grammar(&nodes)?;
        let tokens = tokenize(&render_text(&instance, &nodes));
        Trajectory::try_from(RawTrajectory {
            instance,
            strategy,
            nodes,
            tokens,
            truncated,
        })
    }

    /// Parse a token sequence, attaching the metadata the text does not
    /// carry (instance seed, strategy label, truncation flag).
    pub fn parse(
        tokens: &[String],
        seed: u64,
        strategy: Strategy,
        truncated: bool,
    ) -> Result<Self, TrajectoryError> {
        let parsed = parse_trajectory(tokens)?;
        let instance = ProblemInstance::new(parsed.target, parsed.operands, seed)?;
        let tokens = tokenize(&render_text(&instance, &parsed.nodes));
        Ok(Trajectory {
            instance,
            strategy,
            nodes: parsed.nodes,
            tokens,
            truncated,
        })
    }

    pub fn instance(&self) -> &ProblemInstance {
        &self.instance
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn token_len(&self) -> usize {
        self.tokens.len()
    }

    /// Full text (the concatenated tokens).
    pub fn text(&self) -> String {
        self.tokens.concat()
    }

    /// Token index at which each node's line starts.
    pub fn node_token_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.nodes.len());
        let mut pos = token_count(&self.instance.prompt_line()) + 1;
        for n in &self.nodes {
            offsets.push(pos);
            pos += token_count(&n.block());
        }
        offsets
    }

    /// One JSON line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectory serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Self, TrajectoryError> {
        serde_json::from_str(line).map_err(|e| TrajectoryError::Parse {
            offset: e.column().saturating_sub(1),
            message: e.to_string(),
        })
    }
}
