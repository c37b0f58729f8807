//! Min-cost flow by successive shortest augmenting paths with node potentials.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    cap: i64,
    cost: f64,
}

#[derive(Debug, Clone)]
pub struct MinCostFlow {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    potential: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MinCostFlow {
    pub fn new(n: usize) -> Self {
        MinCostFlow { arcs: Vec::new(), adj: vec![Vec::new(); n], potential: vec![0.0; n] }
    }

    /// Adds an arc with nonnegative cost; returns its id.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        debug_assert!(cost >= 0.0);
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc { to: from, cap: 0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow currently carried by arc `id`.
    pub fn flow(&self, id: usize) -> i64 {
        self.arcs[id + 1].cap
    }

    /// Sends up to `limit` units from `s` to `t`; returns (flow, cost).
    pub fn run(&mut self, s: usize, t: usize, limit: i64) -> (i64, f64) {
        let n = self.adj.len();
        let mut flow = 0i64;
        let mut cost = 0.0;
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        while flow < limit {
            dist.iter_mut().for_each(|d| *d = f64::INFINITY);
            prev.iter_mut().for_each(|p| *p = usize::MAX);
            dist[s] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(State { dist: 0.0, node: s });
            while let Some(State { dist: d, node: u }) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &id in &self.adj[u] {
                    let a = self.arcs[id];
                    if a.cap <= 0 {
                        continue;
                    }
                    let rc = (a.cost + self.potential[u] - self.potential[a.to]).max(0.0);
                    let nd = d + rc;
                    if nd < dist[a.to] {
                        dist[a.to] = nd;
                        prev[a.to] = id;
                        heap.push(State { dist: nd, node: a.to });
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    self.potential[v] += dist[v];
                }
            }
            let mut push = limit - flow;
            let mut v = t;
            while v != s {
                let id = prev[v];
                push = push.min(self.arcs[id].cap);
                v = self.arcs[id ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let id = prev[v];
                self.arcs[id].cap -= push;
                self.arcs[id ^ 1].cap += push;
                cost += push as f64 * self.arcs[id].cost;
                v = self.arcs[id ^ 1].to;
            }
            flow += push;
        }
        (flow, cost)
    }
}

impl MinCostFlow {
    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Shortest-path distances in the residual graph from a virtual source
    /// joined to every node at zero cost. For an optimal flow these are
    /// valid dual potentials: `cost(u→v) + d[u] − d[v] ≥ 0` on residual arcs.
    pub fn residual_potentials(&self) -> Vec<f64> {
        let n = self.adj.len();
        let mut d = vec![0.0; n];
        let mut in_queue = vec![true; n];
        let mut queue: std::collections::VecDeque<usize> = (0..n).collect();
        let mut relax_budget = n.saturating_mul(self.arcs.len()).max(1);
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            for &id in &self.adj[u] {
                let a = self.arcs[id];
                if a.cap > 0 && d[u] + a.cost < d[a.to] - 1e-12 {
                    d[a.to] = d[u] + a.cost;
                    if !in_queue[a.to] {
                        in_queue[a.to] = true;
                        queue.push_back(a.to);
                    }
                }
            }
            relax_budget -= 1;
            if relax_budget == 0 {
                break;
            }
        }
        d
    }
}
