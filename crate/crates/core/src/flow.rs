//! Exact max-flow (Edmonds–Karp) and the bipartite transport problems built
//! on it: the largest sub-coupling of two weight vectors supported on a
//! given edge set.

use std::collections::VecDeque;

use crate::rational::Scalar;

/// Residual network. Edges are stored in pairs `(e, e ^ 1)`.
#[derive(Debug, Clone)]
pub struct FlowNetwork<S> {
    adj: Vec<Vec<usize>>,
    head: Vec<usize>,
    residual: Vec<S>,
    capacity: Vec<S>,
    value: S,
}

impl<S: Scalar> FlowNetwork<S> {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            head: Vec::new(),
            residual: Vec::new(),
            capacity: Vec::new(),
            value: S::zero(),
        }
    }

    /// Adds `u -> v` with capacity `cap`; returns the edge id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: S) -> usize {
        let e = self.head.len();
        self.head.push(v);
        self.residual.push(cap.clone());
        self.capacity.push(cap);
        self.adj[u].push(e);
        self.head.push(u);
        self.residual.push(S::zero());
        self.capacity.push(S::zero());
        self.adj[v].push(e + 1);
        e
    }

    /// Augments along shortest residual paths until none is left and returns
    /// the total flow value. Safe to call again after adding edges: the
    /// current flow is kept and only extended.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> S {
        let n = self.adj.len();
        let mut pred: Vec<Option<usize>> = vec![None; n];
        loop {
            pred.iter_mut().for_each(|p| *p = None);
            let mut queue = VecDeque::from([source]);
            let mut reached = false;
            'bfs: while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.head[e];
                    if v != source && pred[v].is_none() && self.residual[e].is_positive() {
                        pred[v] = Some(e);
                        if v == sink {
                            reached = true;
                            break 'bfs;
                        }
                        queue.push_back(v);
                    }
                }
            }
            if !reached {
                return self.value.clone();
            }
            let mut bottleneck: Option<S> = None;
            let mut v = sink;
            while let Some(e) = pred[v] {
                let r = self.residual[e].clone();
                bottleneck = Some(match bottleneck {
                    Some(b) => b.min_of(r),
                    None => r,
                });
                v = self.head[e ^ 1];
            }
            let b = bottleneck.expect("augmenting path has at least one edge");
            let mut v = sink;
            while let Some(e) = pred[v] {
                self.residual[e] = self.residual[e].clone() - b.clone();
                self.residual[e ^ 1] = self.residual[e ^ 1].clone() + b.clone();
                v = self.head[e ^ 1];
            }
            self.value = self.value.clone() + b;
        }
    }

    /// Flow currently carried by edge `e` (an id returned by `add_edge`).
    pub fn flow(&self, e: usize) -> S {
        self.capacity[e].clone() - self.residual[e].clone()
    }
}

/// Max-flow between two weight vectors over a growing set of allowed pairs.
/// Node layout: source, left points, right points, sink.
#[derive(Debug, Clone)]
pub struct BipartiteTransport<S> {
    net: FlowNetwork<S>,
    n_left: usize,
    n_right: usize,
    edges: Vec<((usize, usize), usize)>,
    left: Vec<S>,
    right: Vec<S>,
}

impl<S: Scalar> BipartiteTransport<S> {
    pub fn new(left: &[S], right: &[S]) -> Self {
        let (n_left, n_right) = (left.len(), right.len());
        let mut net = FlowNetwork::new(n_left + n_right + 2);
        for (i, w) in left.iter().enumerate() {
            net.add_edge(0, 1 + i, w.clone());
        }
        for (j, w) in right.iter().enumerate() {
            net.add_edge(1 + n_left + j, n_left + n_right + 1, w.clone());
        }
        BipartiteTransport { net, n_left, n_right, edges: Vec::new(), left: left.to_vec(), right: right.to_vec() }
    }

    pub fn allow(&mut self, i: usize, j: usize) {
        let cap = self.left[i].clone().min_of(self.right[j].clone());
        let e = self.net.add_edge(1 + i, 1 + self.n_left + j, cap);
        self.edges.push(((i, j), e));
    }

    /// Maximum transported mass over the pairs allowed so far.
    pub fn max_mass(&mut self) -> S {
        let sink = self.n_left + self.n_right + 1;
        self.net.max_flow(0, sink)
    }

    /// The optimal sub-coupling as a dense `n_left x n_right` matrix.
    pub fn plan(&mut self) -> Vec<Vec<S>> {
        self.max_mass();
        let mut plan = vec![vec![S::zero(); self.n_right]; self.n_left];
        for &((i, j), e) in &self.edges {
            plan[i][j] = plan[i][j].clone() + self.net.flow(e);
        }
        plan
    }
}

/// Largest total mass of a sub-coupling of `left` and `right` supported on
/// `pairs`.
pub fn max_sub_coupling_mass<S: Scalar>(left: &[S], right: &[S], pairs: &[(usize, usize)]) -> S {
    let mut t = BipartiteTransport::new(left, right);
    for &(i, j) in pairs {
        t.allow(i, j);
    }
    t.max_mass()
}

/// Optimal sub-coupling on `pairs` and its mass.
pub fn max_sub_coupling<S: Scalar>(left: &[S], right: &[S], pairs: &[(usize, usize)]) -> (S, Vec<Vec<S>>) {
    let mut t = BipartiteTransport::new(left, right);
    for &(i, j) in pairs {
        t.allow(i, j);
    }
    let plan = t.plan();
    (t.max_mass(), plan)
}
