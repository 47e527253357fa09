//! Transportation problem with integer supplies as a min-cost flow, solved
//! by successive shortest paths with Johnson potentials.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: f64,
}

struct FlowGraph {
    adj: Vec<Vec<Edge>>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> (usize, usize) {
        let fwd = self.adj[from].len();
        let bwd = self.adj[to].len() + usize::from(from == to);
        self.adj[from].push(Edge {
            to,
            rev: bwd,
            cap,
            cost,
        });
        self.adj[to].push(Edge {
            to: from,
            rev: fwd,
            cap: 0,
            cost: -cost,
        });
        (from, fwd)
    }
}

#[derive(PartialEq)]
struct State(f64, usize);

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Minimum-cost integer flow from supplies to demands over a complete
/// bipartite graph. `cost` is row-major `supply.len() x demand.len()`;
/// total supply must equal total demand. Returns the flow matrix.
pub fn solve_transportation(supply: &[i64], demand: &[i64], cost: &[f64]) -> Vec<i64> {
    let (m, n) = (supply.len(), demand.len());
    debug_assert_eq!(cost.len(), m * n);
    debug_assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>());
    let s = m + n;
    let t = s + 1;
    let mut g = FlowGraph::new(m + n + 2);
    let mut arcs = Vec::with_capacity(m * n);
    for (i, &a) in supply.iter().enumerate() {
        g.add_edge(s, i, a, 0.0);
    }
    for (j, &b) in demand.iter().enumerate() {
        g.add_edge(m + j, t, b, 0.0);
    }
    let total: i64 = supply.iter().sum();
    for i in 0..m {
        for j in 0..n {
            arcs.push(g.add_edge(i, m + j, total, cost[i * n + j]));
        }
    }

    let nodes = m + n + 2;
    let mut dual = vec![0.0f64; nodes];
    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); nodes];
    let mut visited = vec![false; nodes];
    let mut flow = 0i64;
    while flow < total {
        dist.fill(f64::INFINITY);
        visited.fill(false);
        dist[s] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(State(0.0, s));
        while let Some(State(d, v)) = heap.pop() {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            if v == t {
                break;
            }
            for (k, e) in g.adj[v].iter().enumerate() {
                if e.cap == 0 || visited[e.to] {
                    continue;
                }
                // reduced costs are non-negative up to rounding
                let reduced = (e.cost - dual[e.to] + dual[v]).max(0.0);
                let nd = d + reduced;
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    prev[e.to] = (v, k);
                    heap.push(State(nd, e.to));
                }
            }
        }
        if !visited[t] {
            break;
        }
        for v in 0..nodes {
            if visited[v] {
                dual[v] -= dist[t] - dist[v];
            }
        }
        let mut push = total - flow;
        let mut v = t;
        while v != s {
            let (u, k) = prev[v];
            push = push.min(g.adj[u][k].cap);
            v = u;
        }
        let mut v = t;
        while v != s {
            let (u, k) = prev[v];
            let rev = g.adj[u][k].rev;
            g.adj[u][k].cap -= push;
            g.adj[v][rev].cap += push;
            v = u;
        }
        flow += push;
    }

    arcs.iter()
        .map(|&(u, k)| {
            let e = &g.adj[u][k];
            g.adj[e.to][e.rev].cap
        })
        .collect()
}
