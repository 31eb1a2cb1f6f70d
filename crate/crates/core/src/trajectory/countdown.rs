//! Countdown arithmetic: states, operations and child expansion.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng;

/// Arithmetic operator allowed in a Countdown step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    Add,
    Sub,
    Mul,
    Div,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Add, Operator::Sub, Operator::Mul, Operator::Div];

    pub fn symbol(self) -> char {
        match self {
            Operator::Add => '+',
            Operator::Sub => '-',
            Operator::Mul => '*',
            Operator::Div => '/',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Operator::Add),
            '-' => Some(Operator::Sub),
            '*' => Some(Operator::Mul),
            '/' => Some(Operator::Div),
            _ => None,
        }
    }

    /// Apply under Countdown rules: `-` must stay non-negative and `/` must
    /// divide exactly.
    pub fn apply(self, lhs: u64, rhs: u64) -> Option<u64> {
        match self {
            Operator::Add => lhs.checked_add(rhs),
            Operator::Sub => lhs.checked_sub(rhs),
            Operator::Mul => lhs.checked_mul(rhs),
            Operator::Div => (rhs != 0 && lhs.is_multiple_of(rhs)).then(|| lhs / rhs),
        }
    }
}

/// One arithmetic step `lhs <op> rhs = result`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step {
    pub lhs: u64,
    pub op: Operator,
    pub rhs: u64,
    pub result: u64,
}

impl Step {
    /// Whether `result` is what `op` actually yields.
    pub fn is_valid(&self) -> bool {
        self.op.apply(self.lhs, self.rhs) == Some(self.result)
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}={}", self.lhs, self.op.symbol(), self.rhs, self.result)
    }
}

/// Search state: remaining numbers and the steps taken so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub target: u64,
    pub remaining: Vec<u64>,
    pub steps: Vec<Step>,
}

impl State {
    pub fn initial(target: u64, operands: &[u64]) -> Self {
        State {
            target,
            remaining: operands.to_vec(),
            steps: Vec::new(),
        }
    }

    /// All numbers combined into exactly the target.
    pub fn is_goal(&self) -> bool {
        self.remaining.len() == 1 && self.remaining[0] == self.target
    }

    /// Every distinct legal successor, in a canonical order.
    ///
    /// Pairs are taken larger-operand-first so `-` stays non-negative;
    /// `+` and `*` are generated once per unordered pair.
    pub fn successors(&self) -> Vec<State> {
        let n = self.remaining.len();
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (self.remaining[i], self.remaining[j]);
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                for op in Operator::ALL {
                    let Some(result) = op.apply(hi, lo) else {
                        continue;
                    };
                    let step = Step {
                        lhs: hi,
                        op,
                        rhs: lo,
                        result,
                    };
                    if seen.contains(&step) {
                        continue;
                    }
                    seen.push(step);
                    let mut remaining: Vec<u64> = self
                        .remaining
                        .iter()
                        .enumerate()
                        .filter(|&(p, _)| p != i && p != j)
                        .map(|(_, &v)| v)
                        .collect();
                    remaining.push(result);
                    let mut steps = self.steps.clone();
                    steps.push(step);
                    out.push(State {
                        target: self.target,
                        remaining,
                        steps,
                    });
                }
            }
        }
        out
    }

    /// Distance between the sum of the remaining numbers and the target.
    pub fn heuristic(&self) -> u64 {
        self.remaining.iter().sum::<u64>().abs_diff(self.target)
    }

    /// Successors ranked by [`State::heuristic`] and capped at `branching`;
    /// ties are broken by the node-local stream.
    pub fn capped_successors(&self, instance_seed: u64, node_id: &str, branching: usize) -> Vec<State> {
        let mut children = self.successors();
        let mut rng = ChaCha8Rng::seed_from_u64(rng::labelled_seed(instance_seed, node_id.as_bytes()));
        children.shuffle(&mut rng);
        children.sort_by_key(State::heuristic);
        children.truncate(branching);
        children
    }

    /// Exhaustive check that some sequence of legal steps reaches the goal.
    pub fn solvable(&self) -> bool {
        if self.is_goal() {
            return true;
        }
        self.remaining.len() > 1 && self.successors().iter().any(State::solvable)
    }

    pub(crate) fn render_numbers(&self) -> String {
        join(self.remaining.iter())
    }

    pub(crate) fn render_steps(&self) -> String {
        join(self.steps.iter())
    }
}

fn join<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Sampling ranges for fresh instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceSampler {
    pub target_range: (u64, u64),
    pub operand_range: (u64, u64),
    pub operand_count: usize,
}

impl Default for InstanceSampler {
    fn default() -> Self {
        InstanceSampler {
            target_range: (10, 99),
            operand_range: (1, 25),
            operand_count: 4,
        }
    }
}

impl InstanceSampler {
    /// Draw (target, operands), resampling until the instance is solvable.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (u64, Vec<u64>) {
        loop {
            let target = rng.random_range(self.target_range.0..=self.target_range.1);
            let operands: Vec<u64> = (0..self.operand_count)
                .map(|_| rng.random_range(self.operand_range.0..=self.operand_range.1))
                .collect();
            if State::initial(target, &operands).solvable() {
                return (target, operands);
            }
        }
    }
}
