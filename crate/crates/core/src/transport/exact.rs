//! Exact discrete optimal transport by successive shortest paths.
//!
//! The transport polytope is solved as a min-cost flow on the bipartite
//! network `source → supply i → demand j → sink` with uncapacitated middle
//! arcs. Each round runs Dijkstra on reduced costs (Johnson potentials keep
//! them non-negative) and pushes the bottleneck along the cheapest path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayView1};

use super::{CostMatrix, EmpiricalMeasure, TransportError};

/// Largest `n·m` the oracle accepts.
pub const EXACT_SIZE_CAP: usize = 10_000;

/// Residual capacities below this are treated as exhausted.
const CAP_EPS: f64 = 1e-15;

struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
}

struct Network {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Network {
            arcs: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    /// Adds the arc and its reverse; returns the forward arc index.
    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.adj[from].push(id);
        self.arcs.push(Arc {
            to: from,
            cap: 0.0,
            cost: -cost,
        });
        self.adj[to].push(id + 1);
        id
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Optimal coupling and value for an explicit cost matrix.
pub fn exact_plan(
    cost: &Array2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
) -> Result<(f64, Array2<f64>), TransportError> {
    let (n, m) = cost.dim();
    if n == 0 || m == 0 {
        return Err(TransportError::EmptyMeasure);
    }
    if (p.len(), q.len()) != (n, m) {
        return Err(TransportError::Shape(format!(
            "cost {:?} against marginals ({}, {})",
            cost.dim(),
            p.len(),
            q.len()
        )));
    }
    if n * m > EXACT_SIZE_CAP {
        return Err(TransportError::TooLarge {
            size: n * m,
            cap: EXACT_SIZE_CAP,
        });
    }
    if cost.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(TransportError::NonFinite("exact oracle needs finite non-negative costs".into()));
    }

    let source = n + m;
    let sink = n + m + 1;
    let nodes = n + m + 2;
    let mut net = Network::new(nodes);
    for (i, &w) in p.iter().enumerate() {
        net.add(source, i, w, 0.0);
    }
    for (j, &w) in q.iter().enumerate() {
        net.add(n + j, sink, w, 0.0);
    }
    let mut middle = vec![0usize; n * m];
    for i in 0..n {
        for j in 0..m {
            middle[i * m + j] = net.add(i, n + j, f64::INFINITY, cost[[i, j]]);
        }
    }

    let demand = p.sum().min(q.sum());
    let mut sent = 0.0;
    let mut potential = vec![0.0; nodes];
    let mut dist = vec![f64::INFINITY; nodes];
    let mut via = vec![usize::MAX; nodes];
    while demand - sent > CAP_EPS {
        dist.fill(f64::INFINITY);
        via.fill(usize::MAX);
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &a in &net.adj[u] {
                let arc = &net.arcs[a];
                if arc.cap <= CAP_EPS {
                    continue;
                }
                let reduced = (arc.cost + potential[u] - potential[arc.to]).max(0.0);
                let nd = d + reduced;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    via[arc.to] = a;
                    heap.push(Entry(nd, arc.to));
                }
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        for v in 0..nodes {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
        let mut push = demand - sent;
        let mut v = sink;
        while v != source {
            let a = via[v];
            push = push.min(net.arcs[a].cap);
            v = net.arcs[a ^ 1].to;
        }
        let mut v = sink;
        while v != source {
            let a = via[v];
            net.arcs[a].cap -= push;
            net.arcs[a ^ 1].cap += push;
            v = net.arcs[a ^ 1].to;
        }
        sent += push;
    }

    let mut plan = Array2::zeros((n, m));
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..m {
            // flow on a forward arc is the capacity of its reverse
            let flow = net.arcs[middle[i * m + j] + 1].cap;
            plan[[i, j]] = flow;
            value += flow * cost[[i, j]];
        }
    }
    Ok((value, plan))
}

/// Exact W1 between two measures under the raw Euclidean cost.
pub fn exact_w1(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<(f64, Array2<f64>), TransportError> {
    if a.len() * b.len() > EXACT_SIZE_CAP {
        return Err(TransportError::TooLarge {
            size: a.len() * b.len(),
            cap: EXACT_SIZE_CAP,
        });
    }
    let cost = CostMatrix::euclidean(a, b)?;
    exact_plan(&cost.raw, a.weights().view(), b.weights().view())
}
