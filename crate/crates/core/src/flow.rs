//! Integral flows with lower bounds.
//!
//! A small Dinic max-flow plus the textbook reduction from a circulation with
//! arc lower bounds to a single max-flow. Capacities are integral, so the
//! returned flow is integral whenever a feasible one exists.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
}

#[derive(Debug, Clone)]
struct MaxFlow {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    cursor: Vec<usize>,
}

impl MaxFlow {
    fn new(n: usize) -> Self {
        MaxFlow { arcs: Vec::new(), adj: vec![Vec::new(); n], level: vec![0; n], cursor: vec![0; n] }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap });
        self.adj[from].push(id);
        self.arcs.push(Arc { to: from, cap: 0 });
        self.adj[to].push(id + 1);
        id
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.adj[u] {
                let Arc { to, cap } = self.arcs[a];
                if cap > 0 && self.level[to] < 0 {
                    self.level[to] = self.level[u] + 1;
                    q.push_back(to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: i64) -> i64 {
        if u == t {
            return pushed;
        }
        while self.cursor[u] < self.adj[u].len() {
            let a = self.adj[u][self.cursor[u]];
            let Arc { to, cap } = self.arcs[a];
            if cap > 0 && self.level[to] == self.level[u] + 1 {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > 0 {
                    self.arcs[a].cap -= got;
                    self.arcs[a ^ 1].cap += got;
                    return got;
                }
            }
            self.cursor[u] += 1;
        }
        0
    }

    fn run(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        while self.bfs(s, t) {
            self.cursor.fill(0);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
        total
    }

    fn flow_on(&self, arc: usize) -> i64 {
        self.arcs[arc ^ 1].cap
    }
}

/// Arc of a circulation: `lower <= flow <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundedArc {
    pub from: usize,
    pub to: usize,
    pub lower: i64,
    pub upper: i64,
}

/// Finds an integral circulation on `nodes` nodes honoring every arc's
/// bounds, or `None` if none exists. Flows are returned in arc order.
pub fn feasible_circulation(nodes: usize, arcs: &[BoundedArc]) -> Option<Vec<i64>> {
    if arcs.iter().any(|a| a.lower > a.upper) {
        return None;
    }
    let source = nodes;
    let sink = nodes + 1;
    let mut mf = MaxFlow::new(nodes + 2);
    let mut excess = vec![0i64; nodes];
    let ids: Vec<usize> = arcs
        .iter()
        .map(|a| {
            excess[a.to] += a.lower;
            excess[a.from] -= a.lower;
            mf.add(a.from, a.to, a.upper - a.lower)
        })
        .collect();
    let mut required = 0;
    for (v, &e) in excess.iter().enumerate() {
        if e > 0 {
            mf.add(source, v, e);
            required += e;
        } else if e < 0 {
            mf.add(v, sink, -e);
        }
    }
    if mf.run(source, sink) != required {
        return None;
    }
    Some(arcs.iter().zip(&ids).map(|(a, &id)| a.lower + mf.flow_on(id)).collect())
}
