//! Reduction of search-tree walks to Dyck-k bracket strings.
//!
//! Consecutive node identifiers are differenced into moves: one `Down(c)` for
//! every appended digit `c`, one `Up(c)` for every removed trailing digit `c`
//! (innermost first), and an `Eval` after every terminal node. `psi` maps
//! `Down(c)` to an opening bracket of type `c`, `Up(c)` to the matching
//! closing bracket and erases `Eval`.
//!
//! The root (identifier `1`) is never entered by a move, so the nesting depth
//! of the image is the maximum node depth minus one.

use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::projection::{self, ProjectionError};
use crate::trajectory::{parent_id, Trajectory};

/// Offset between the maximum node depth and the Dyck nesting depth.
pub const ROOT_OFFSET: usize = 1;

#[derive(Debug, Error, PartialEq)]
pub enum DyckError {
    #[error("transition {index}: {message}")]
    Grammar { index: usize, message: String },
    #[error("unbalanced at bracket {position}: {reason}")]
    Invalid { position: usize, reason: Violation },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Violation {
    Underflow,
    TypeMismatch,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Violation::Underflow => "close without an open bracket",
            Violation::TypeMismatch => "close does not match the innermost open bracket",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchSymbol {
    Down(u8),
    Up(u8),
    Eval,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchTransitionString(pub Vec<SearchSymbol>);

impl SearchTransitionString {
    pub fn concat(&self, other: &Self) -> Self {
        SearchTransitionString(self.0.iter().chain(&other.0).copied().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bracket {
    Open(u8),
    Close(u8),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DyckString {
    brackets: Vec<Bracket>,
    max_nesting: usize,
}

impl DyckString {
    pub fn new(brackets: Vec<Bracket>) -> Self {
        let mut height: usize = 0;
        let mut max_nesting = 0;
        for b in &brackets {
            match b {
                Bracket::Open(_) => {
                    height += 1;
                    max_nesting = max_nesting.max(height);
                }
                Bracket::Close(_) => height = height.saturating_sub(1),
            }
        }
        DyckString {
            brackets,
            max_nesting,
        }
    }

    pub fn brackets(&self) -> &[Bracket] {
        &self.brackets
    }

    /// Highest open-bracket count attained during the scan.
    pub fn max_nesting(&self) -> usize {
        self.max_nesting
    }

    pub fn concat(&self, other: &Self) -> Self {
        DyckString::new(self.brackets.iter().chain(&other.brackets).copied().collect())
    }
}

fn digit(id: &str, i: usize) -> u8 {
    id.as_bytes()[i] - b'0'
}

/// Difference a walk of `(identifier, terminal)` pairs into moves.
pub fn transitions_from_walk<'a>(
    walk: impl IntoIterator<Item = (&'a str, bool)>,
) -> Result<SearchTransitionString, DyckError> {
    let mut out = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut current: Option<&str> = None;
    for (index, (id, terminal)) in walk.into_iter().enumerate() {
        let err = |message: String| DyckError::Grammar { index, message };
        if id.is_empty() || !id.bytes().all(|b| (b'1'..=b'9').contains(&b)) {
            return Err(err(format!("bad identifier {id:?}")));
        }
        match current {
            None => {
                if id != "1" {
                    return Err(err(format!("walk must start at the root, got {id:?}")));
                }
            }
            Some(prev) => {
                match parent_id(id) {
                    Some(p) if seen.contains(p) => {}
                    _ => return Err(err(format!("{id:?} is entered before its parent"))),
                }
                let lcp = prev.bytes().zip(id.bytes()).take_while(|(a, b)| a == b).count();
                for i in (lcp..prev.len()).rev() {
                    out.push(SearchSymbol::Up(digit(prev, i)));
                }
                for i in lcp..id.len() {
                    out.push(SearchSymbol::Down(digit(id, i)));
                }
            }
        }
        if terminal {
            out.push(SearchSymbol::Eval);
        }
        seen.insert(id);
        current = Some(id);
    }
    Ok(SearchTransitionString(out))
}

/// Moves of a trajectory's search nodes; inert nodes contribute nothing.
pub fn to_transitions(t: &Trajectory) -> Result<SearchTransitionString, DyckError> {
    transitions_from_walk(
        t.nodes()
            .iter()
            .filter(|n| !n.is_inert())
            .map(|n| (n.id.as_str(), n.outcome.prune || n.outcome.goal)),
    )
}

/// The bracket homomorphism.
pub fn psi(s: &SearchTransitionString) -> DyckString {
    DyckString::new(
        s.0.iter()
            .filter_map(|sym| match *sym {
                SearchSymbol::Down(c) => Some(Bracket::Open(c)),
                SearchSymbol::Up(c) => Some(Bracket::Close(c)),
                SearchSymbol::Eval => None,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceCheck {
    Valid,
    Invalid { position: usize, reason: Violation },
}

impl BalanceCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self, BalanceCheck::Valid)
    }
}

/// Single stack pass; reports the first violating bracket.
pub fn check_balanced_prefix(d: &DyckString) -> BalanceCheck {
    let mut stack = Vec::new();
    for (position, b) in d.brackets.iter().enumerate() {
        match *b {
            Bracket::Open(c) => stack.push(c),
            Bracket::Close(c) => match stack.pop() {
                None => {
                    return BalanceCheck::Invalid {
                        position,
                        reason: Violation::Underflow,
                    }
                }
                Some(top) if top != c => {
                    return BalanceCheck::Invalid {
                        position,
                        reason: Violation::TypeMismatch,
                    }
                }
                Some(_) => {}
            },
        }
    }
    BalanceCheck::Valid
}

pub fn nesting_depth(d: &DyckString) -> Result<usize, DyckError> {
    match check_balanced_prefix(d) {
        BalanceCheck::Valid => Ok(d.max_nesting),
        BalanceCheck::Invalid { position, reason } => Err(DyckError::Invalid { position, reason }),
    }
}

/// Per-trajectory row of the depth report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthRow {
    pub index: usize,
    pub chi1: f64,
    pub nesting_depth: Option<usize>,
    pub valid: bool,
}

pub fn depth_report(corpus: &[Trajectory]) -> Result<Vec<DepthRow>, ProjectionError> {
    corpus
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let chi1 = projection::project(t)?.chi(1);
            let depth = to_transitions(t).ok().and_then(|s| nesting_depth(&psi(&s)).ok());
            Ok(DepthRow {
                index,
                chi1,
                nesting_depth: depth,
                valid: depth.is_some_and(|d| (d + ROOT_OFFSET) as f64 == chi1),
            })
        })
        .collect()
}

pub fn write_depth_report(path: &Path, rows: &[DepthRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "chi1", "nesting_depth", "valid"])?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            projection::format_value(r.chi1),
            r.nesting_depth.map(|d| d.to_string()).unwrap_or_default(),
            r.valid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
