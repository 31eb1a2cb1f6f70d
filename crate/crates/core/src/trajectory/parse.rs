//! Parser for the line-oriented trajectory text.

use super::countdown::{Operator, State, Step};
use super::{check_grammar, NodeRecord, OutcomeFlags, TrajectoryError, GOAL_MARKER, PRUNE_MARKER};

/// Content of a parsed node line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeLine {
    Search { id: String, state: State },
    Inert { id: String },
}

impl NodeLine {
    pub fn id(&self) -> &str {
        match self {
            NodeLine::Search { id, .. } | NodeLine::Inert { id } => id,
        }
    }
}

/// A parsed trajectory text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTrace {
    pub target: u64,
    pub operands: Vec<u64>,
    pub nodes: Vec<NodeRecord>,
    /// Parsed content of each entry of `nodes`.
    pub lines: Vec<NodeLine>,
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Cursor { s, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, (usize, String)> {
        Err((self.pos, msg.into()))
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), (usize, String)> {
        if self.eat(lit) {
            Ok(())
        } else {
            self.fail(format!("expected {lit:?}"))
        }
    }

    fn number(&mut self) -> Result<u64, (usize, String)> {
        let len = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 {
            return self.fail("expected a number");
        }
        let v = self.rest()[..len]
            .parse()
            .map_err(|_| (self.pos, "number out of range".to_string()))?;
        self.pos += len;
        Ok(v)
    }

    fn ident(&mut self) -> Result<String, (usize, String)> {
        let len = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 {
            return self.fail("expected a node identifier");
        }
        let id = self.rest()[..len].to_string();
        self.pos += len;
        Ok(id)
    }

    fn numbers(&mut self) -> Result<Vec<u64>, (usize, String)> {
        let mut out = Vec::new();
        if self.rest().starts_with(']') {
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            if !self.eat(", ") {
                return Ok(out);
            }
        }
    }

    fn step(&mut self) -> Result<Step, (usize, String)> {
        let lhs = self.number()?;
        let op = match self.rest().chars().next().and_then(Operator::from_symbol) {
            Some(op) => op,
            None => return self.fail("expected an operator"),
        };
        self.pos += 1;
        let rhs = self.number()?;
        self.expect("=")?;
        let result = self.number()?;
        Ok(Step {
            lhs,
            op,
            rhs,
            result,
        })
    }

    fn steps(&mut self) -> Result<Vec<Step>, (usize, String)> {
        let mut out = Vec::new();
        if self.rest().starts_with(']') {
            return Ok(out);
        }
        loop {
            out.push(self.step()?);
            if !self.eat(", ") {
                return Ok(out);
            }
        }
    }

    fn end(&self) -> Result<(), (usize, String)> {
        if self.rest().is_empty() {
            Ok(())
        } else {
            self.fail("unexpected trailing characters")
        }
    }
}

/// `Current State: T:[a, b], Operations:[]` → (T, [a, b]).
fn parse_prompt(line: &str) -> Result<(u64, Vec<u64>), (usize, String)> {
    let mut c = Cursor::new(line);
    c.expect("Current State: ")?;
    let target = c.number()?;
    c.expect(":[")?;
    let operands = c.numbers()?;
    c.expect("], Operations:[]")?;
    c.end()?;
    Ok((target, operands))
}

/// Parse one node line; on failure returns the byte offset within the line.
pub fn parse_node_line(line: &str) -> Result<NodeLine, (usize, String)> {
    let mut c = Cursor::new(line);
    c.expect("Node ")?;
    let id = c.ident()?;
    c.expect(":")?;
    if c.eat(" x=x") {
        while c.eat(" x") {}
        c.end()?;
        return Ok(NodeLine::Inert { id });
    }
    c.expect(" Current State: ")?;
    let target = c.number()?;
    c.expect(":[")?;
    let remaining = c.numbers()?;
    c.expect("], Operations:[")?;
    let steps = c.steps()?;
    c.expect("]")?;
    c.end()?;
    Ok(NodeLine::Search {
        id,
        state: State {
            target,
            remaining,
            steps,
        },
    })
}

/// Parse a token sequence into the instance values and node records.
///
/// Errors carry the byte offset into the concatenated text; grammar
/// violations of the identifier sequence are reported separately.
pub fn parse_trajectory(tokens: &[String]) -> Result<ParsedTrace, TrajectoryError> {
    let text = tokens.concat();
    if text.is_empty() {
        return Err(TrajectoryError::Parse {
            offset: 0,
            message: "empty input".into(),
        });
    }
    let mut lines = Vec::new();
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            lines.push((start, &text[start..i]));
            start = i + 1;
        }
    }
    if start < text.len() {
        lines.push((start, &text[start..]));
    }
    let perr = |offset: usize, message: String| TrajectoryError::Parse { offset, message };

    let (off0, first) = lines[0];
    let (target, operands) = parse_prompt(first).map_err(|(o, m)| perr(off0 + o, m))?;

    let mut nodes: Vec<NodeRecord> = Vec::new();
    let mut parsed: Vec<NodeLine> = Vec::new();
    for &(off, line) in &lines[1..] {
        if line == PRUNE_MARKER || line == GOAL_MARKER {
            let Some(last) = nodes.last_mut() else {
                return Err(perr(off, format!("{line:?} before any node")));
            };
            let flag = if line == PRUNE_MARKER {
                &mut last.outcome.prune
            } else {
                &mut last.outcome.goal
            };
            if *flag {
                return Err(perr(off, format!("duplicate {line:?} marker")));
            }
            *flag = true;
            continue;
        }
        let node = parse_node_line(line).map_err(|(o, m)| perr(off + o, m))?;
        nodes.push(NodeRecord {
            id: node.id().to_string(),
            depth: node.id().len(),
            text: line.to_string(),
            outcome: OutcomeFlags::default(),
        });
        parsed.push(node);
    }
    check_grammar(&nodes)?;
    Ok(ParsedTrace {
        target,
        operands,
        nodes,
        lines: parsed,
    })
}
