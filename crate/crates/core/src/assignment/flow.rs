//! Coverage repair by augmenting paths.
//!
//! Network: source → reviewer (capacity = load limit) → paper, or → the
//! paper's author-reviewer gate (capacity = author limit) → paper, then
//! paper → sink (capacity = reviewers required). A maximum flow that
//! saturates every paper edge is a feasible assignment.

use std::collections::VecDeque;

use super::{Problem, State};

/// Residual edge; edge `id ^ 1` is its reverse, whose residual capacity is
/// the flow on `id`.
struct Edge {
    to: usize,
    cap: usize,
}

struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Graph { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add(&mut self, from: usize, to: usize, cap: usize) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap });
        self.edges.push(Edge { to: from, cap: 0 });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    fn push(&mut self, id: usize, amount: usize) {
        self.edges[id].cap -= amount;
        self.edges[id ^ 1].cap += amount;
    }

    fn flow(&self, id: usize) -> usize {
        self.edges[id ^ 1].cap
    }

    fn augment(&mut self, s: usize, t: usize) -> bool {
        let mut parent = vec![usize::MAX; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &id in &self.adj[u] {
                let v = self.edges[id].to;
                if !seen[v] && self.edges[id].cap > 0 {
                    seen[v] = true;
                    parent[v] = id;
                    if v == t {
                        let mut x = t;
                        while x != s {
                            let e = parent[x];
                            self.push(e, 1);
                            x = self.edges[e ^ 1].to;
                        }
                        return true;
                    }
                    queue.push_back(v);
                }
            }
        }
        false
    }
}

/// Extends `st` to a maximum-coverage assignment, keeping as many existing
/// pairs as the augmenting paths allow.
pub(super) fn repair(pb: &Problem, st: &mut State) {
    let need = pb.cons.min_reviewers;
    if st.by_paper.iter().all(|rs| rs.len() >= need) {
        return;
    }
    let (s, reviewer0, paper0) = (0, 1, 1 + pb.n_reviewers);
    let gate0 = paper0 + pb.n_papers;
    let t = gate0 + pb.n_papers;
    let mut g = Graph::new(t + 1);
    let source_edges: Vec<usize> = (0..pb.n_reviewers).map(|r| g.add(s, reviewer0 + r, pb.cons.max_load)).collect();
    let sink_edges: Vec<usize> = (0..pb.n_papers).map(|p| g.add(paper0 + p, t, need)).collect();
    let gate_edges: Vec<usize> =
        (0..pb.n_papers).map(|p| g.add(gate0 + p, paper0 + p, pb.cons.max_author_reviewers)).collect();
    let pair_edges: Vec<(usize, usize, usize)> = pb
        .candidates
        .iter()
        .map(|&(p, r, _)| {
            let target = if pb.author[r] { gate0 + p } else { paper0 + p };
            (p, r, g.add(reviewer0 + r, target, 1))
        })
        .collect();

    for &(p, r, id) in &pair_edges {
        if st.by_paper[p].contains(&r) {
            g.push(source_edges[r], 1);
            g.push(id, 1);
            if pb.author[r] {
                g.push(gate_edges[p], 1);
            }
            g.push(sink_edges[p], 1);
        }
    }
    while g.augment(s, t) {}

    *st = State::new(pb);
    for &(p, r, id) in &pair_edges {
        if g.flow(id) == 1 {
            st.add(pb, p, r);
        }
    }
}
