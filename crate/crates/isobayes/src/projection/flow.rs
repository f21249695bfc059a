//! Maximum-weight closure on the grid order DAG via min-cut (Dinic).
//!
//! A closure here is an upper set: if a vertex is selected, every vertex above
//! it in the partial order is selected too. Order edges carry effectively
//! infinite capacity; per-vertex gains become source/sink capacities. The
//! minimal optimal closure is recovered as the source side of the min cut.

const INF: f64 = 1e30;

#[derive(Clone)]
struct Edge {
    to: usize,
    cap: f64,
    flow: f64,
}

/// A reusable max-closure solver for a fixed DAG; only gains change per call.
pub struct ClosureSolver {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    /// edge index of s->v, paired with v->t at +2
    term: Vec<usize>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl ClosureSolver {
    /// `n` vertices; `order_edges` lists (u, v) meaning u selected forces v.
    pub fn new(n: usize, order_edges: &[(usize, usize)]) -> Self {
        let mut solver = ClosureSolver {
            n,
            edges: Vec::new(),
            adj: vec![Vec::new(); n + 2],
            term: Vec::with_capacity(n),
            level: vec![0; n + 2],
            iter: vec![0; n + 2],
        };
        let s = n;
        let t = n + 1;
        for v in 0..n {
            let e = solver.add_edge(s, v, 0.0);
            solver.term.push(e);
            solver.add_edge(v, t, 0.0);
        }
        for &(u, v) in order_edges {
            solver.add_edge(u, v, INF);
        }
        solver
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> usize {
        let idx = self.edges.len();
        self.edges.push(Edge { to, cap, flow: 0.0 });
        self.adj[from].push(idx);
        self.edges.push(Edge { to: from, cap: 0.0, flow: 0.0 });
        self.adj[to].push(idx + 1);
        idx
    }

    /// Returns (closure weight, selected vertices) maximizing the summed gains
    /// over upper sets. The empty set (weight 0) is always admissible, so the
    /// returned weight is nonnegative. Ties resolve to the minimal closure.
    pub fn max_closure(&mut self, gains: &[f64]) -> (f64, Vec<bool>) {
        debug_assert_eq!(gains.len(), self.n);
        let mut positive = 0.0;
        let mut scale: f64 = 0.0;
        for v in 0..self.n {
            let e = self.term[v];
            let g = gains[v];
            scale = scale.max(g.abs());
            if g > 0.0 {
                positive += g;
                self.edges[e].cap = g;
                self.edges[e + 2].cap = 0.0;
            } else {
                self.edges[e].cap = 0.0;
                self.edges[e + 2].cap = -g;
            }
        }
        for e in &mut self.edges {
            e.flow = 0.0;
        }
        let eps = 1e-12 * scale.max(1.0);
        let maxflow = self.dinic(eps);
        let mut selected = vec![false; self.n + 2];
        self.reachable(eps, &mut selected);
        let weight = positive - maxflow;
        (weight, selected[..self.n].to_vec())
    }

    fn dinic(&mut self, eps: f64) -> f64 {
        let s = self.n;
        let t = self.n + 1;
        let mut total = 0.0;
        loop {
            if !self.bfs(s, t, eps) {
                return total;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.dfs(s, t, INF, eps);
                if pushed <= eps {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn bfs(&mut self, s: usize, t: usize, eps: f64) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &ei in &self.adj[u] {
                let e = &self.edges[ei];
                if e.cap - e.flow > eps && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, limit: f64, eps: f64) -> f64 {
        if u == t {
            return limit;
        }
        while self.iter[u] < self.adj[u].len() {
            let ei = self.adj[u][self.iter[u]];
            let (to, residual) = {
                let e = &self.edges[ei];
                (e.to, e.cap - e.flow)
            };
            if residual > eps && self.level[to] == self.level[u] + 1 {
                let pushed = self.dfs(to, t, limit.min(residual), eps);
                if pushed > eps {
                    self.edges[ei].flow += pushed;
                    self.edges[ei ^ 1].flow -= pushed;
                    return pushed;
                }
            }
            self.iter[u] += 1;
        }
        0.0
    }

    fn reachable(&self, eps: f64, mark: &mut [bool]) {
        let s = self.n;
        let mut stack = vec![s];
        mark[s] = true;
        while let Some(u) = stack.pop() {
            for &ei in &self.adj[u] {
                let e = &self.edges[ei];
                if e.cap - e.flow > eps && !mark[e.to] {
                    mark[e.to] = true;
                    stack.push(e.to);
                }
            }
        }
    }
}
