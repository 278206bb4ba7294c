//! Weighted influence digraphs and their consensus Laplacians.
//!
//! An edge `(i, j, a_ij)` means agent `j` influences agent `i` at rate
//! `a_ij`. Influence therefore flows `j -> i`, and every reachability
//! question in this module ("does `j` influence `i`?") follows that
//! direction. The Laplacian uses the in-degree convention:
//! `L_ii = sum_j a_ij`, `L_ij = -a_ij`, so `ds/dt = -L s` is the consensus
//! ODE.

mod parse;
mod scc;

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, GraphError, Result};

pub use parse::{parse_graph, GraphDocument};
pub use scc::{
    classify_blocks, decompose, frobenius_form, isolated_by_row_sums,
    predicts_unconditional_consensus, strongly_connected_components, BlockDecomposition,
    BlockKind, Condensation, FrobeniusForm,
};

/// Largest node count for which dense matrices are built.
pub const DENSE_LIMIT: usize = 4096;

/// `a_ij = weight`: `source` (j) influences `target` (i).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub target: usize,
    pub source: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n: usize,
    /// Sorted by `(target, source)`.
    edges: Vec<Edge>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityKind {
    /// Every ordered pair influences each other.
    Strong,
    /// For every pair at least one influences the other.
    Weak,
    Disconnected,
}

impl WeightedDigraph {
    /// Builds a validated graph from `(i, j, a_ij)` triples. Zero weights are dropped.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> std::result::Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::new();
        for (i, j, w) in edges {
            validate_edge(n, i, j, w)?;
            if !seen.insert((i, j)) {
                return Err(GraphError::DuplicateEdge { i, j });
            }
            if w > 0.0 {
                kept.push(Edge { target: i, source: j, weight: w });
            }
        }
        Ok(Self::from_sorted(n, kept))
    }

    fn from_sorted(n: usize, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.target, e.source));
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            incoming[e.target].push(k);
            outgoing[e.source].push(k);
        }
        Self { n, edges, incoming, outgoing }
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> std::result::Result<Self, GraphError> {
        Self::new(n, std::iter::empty())
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `a_ij`, zero when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.incoming[i]
            .iter()
            .map(|&k| &self.edges[k])
            .find(|e| e.source == j)
            .map_or(0.0, |e| e.weight)
    }

    /// Nodes influencing `i`, with their rates.
    pub fn influencers(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.incoming[i].iter().map(move |&k| (self.edges[k].source, self.edges[k].weight))
    }

    /// Nodes influenced by `j`, with their rates.
    pub fn influenced(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.outgoing[j].iter().map(move |&k| (self.edges[k].target, self.edges[k].weight))
    }

    /// `sigma_i = sum_j a_ij`, the total influence received by `i`.
    pub fn in_weight(&self, i: usize) -> f64 {
        self.influencers(i).map(|(_, w)| w).sum()
    }

    /// Total influence exerted by `j`.
    pub fn out_weight(&self, j: usize) -> f64 {
        self.influenced(j).map(|(_, w)| w).sum()
    }

    pub fn max_in_weight(&self) -> f64 {
        (0..self.n).map(|i| self.in_weight(i)).fold(0.0, f64::max)
    }

    /// Sum of all rates, the total event rate of the jump process.
    pub fn total_rate(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Same graph with nodes renamed by `perm[old] = new`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Dimension { expected: self.n, actual: perm.len() });
        }
        let mut check = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut check[p], true) {
                return Err(Error::InvalidInput("relabeling is not a permutation".into()));
            }
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { target: perm[e.target], source: perm[e.source], weight: e.weight })
            .collect();
        Ok(Self::from_sorted(self.n, edges))
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|e| {
            let back = self.weight(e.source, e.target);
            (e.weight - back).abs() <= 1e-12 * e.weight.max(back)
        })
    }

    /// In-weight equals out-weight at every node (relative tolerance 1e-12).
    pub fn is_balanced(&self) -> bool {
        (0..self.n).all(|i| {
            let a = self.in_weight(i);
            let b = self.out_weight(i);
            (a - b).abs() <= 1e-12 * a.max(b).max(1.0)
        })
    }

    /// Pairwise influence test: `Strong` when every pair influences each
    /// other, `Weak` when every pair has influence in at least one direction.
    ///
    /// A fan-in graph (two sources feeding one sink) is `Disconnected` here
    /// even though its undirected shape is connected; see
    /// [`WeightedDigraph::undirected_shape_connected`].
    pub fn connectivity_kind(&self) -> ConnectivityKind {
        let cond = strongly_connected_components(self);
        let d = cond.n_blocks();
        if d == 1 {
            return ConnectivityKind::Strong;
        }
        let reach = cond.block_reachability();
        let total = (0..d).all(|a| (a + 1..d).all(|b| reach[a][b] || reach[b][a]));
        if total {
            ConnectivityKind::Weak
        } else {
            ConnectivityKind::Disconnected
        }
    }

    /// Connectivity of the graph with edge directions ignored.
    pub fn undirected_shape_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            let nbrs = self.influencers(u).chain(self.influenced(u));
            for (v, _) in nbrs {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Nodes influenced (directly or not) by `start`, including `start`.
    pub fn influence_closure(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for (v, _) in self.influenced(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

fn validate_edge(n: usize, i: usize, j: usize, w: f64) -> std::result::Result<(), GraphError> {
    for index in [i, j] {
        if index >= n {
            return Err(GraphError::IndexOutOfRange { index, n });
        }
    }
    if i == j {
        return Err(GraphError::SelfLoop(i));
    }
    if !w.is_finite() {
        return Err(GraphError::NonFiniteWeight { i, j });
    }
    if w < 0.0 {
        return Err(GraphError::NegativeWeight { i, j, weight: w });
    }
    Ok(())
}

/// Dense consensus Laplacian: `L_ii = sigma_i`, `L_ij = -a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn from_graph(g: &WeightedDigraph) -> Result<Self> {
        let n = g.n_nodes();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
        }
        let mut m = DMatrix::zeros(n, n);
        for e in g.edges() {
            m[(e.target, e.source)] = -e.weight;
        }
        for i in 0..n {
            m[(i, i)] = g.in_weight(i);
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        let scale = self.norm_inf().max(1.0);
        (0..n).all(|i| (0..i).all(|j| (self.0[(i, j)] - self.0[(j, i)]).abs() <= 1e-12 * scale))
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_diagonal(&self) -> f64 {
        self.0.diagonal().iter().copied().fold(0.0, f64::max)
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let row = self.0.row(i);
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.0.row_iter().map(|r| r.sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fan_in() -> WeightedDigraph {
        WeightedDigraph::new(3, [(2, 0, 1.0), (2, 1, 1.0)]).unwrap()
    }

    fn cycle3() -> WeightedDigraph {
        // 0 -> 1 -> 2 -> 0 in influence direction
        WeightedDigraph::new(3, [(1, 0, 1.0), (2, 1, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn rejects_bad_edges() {
        assert_eq!(WeightedDigraph::new(2, [(0, 0, 1.0)]), Err(GraphError::SelfLoop(0)));
        assert!(matches!(
            WeightedDigraph::new(2, [(0, 1, -1.0)]),
            Err(GraphError::NegativeWeight { .. })
        ));
        assert!(matches!(
            WeightedDigraph::new(2, [(0, 1, 1.0), (0, 1, 2.0)]),
            Err(GraphError::DuplicateEdge { i: 0, j: 1 })
        ));
        assert!(matches!(
            WeightedDigraph::new(2, [(0, 2, 1.0)]),
            Err(GraphError::IndexOutOfRange { index: 2, n: 2 })
        ));
        assert_eq!(WeightedDigraph::new(0, []), Err(GraphError::Empty));
    }

    #[test]
    fn zero_weights_are_dropped() {
        let g = WeightedDigraph::new(3, [(0, 1, 0.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.weight(1, 0), 2.0);
        assert_eq!(g.weight(0, 1), 0.0);
    }

    #[test]
    fn two_node_laplacian() {
        let g = WeightedDigraph::new(2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let l = LaplacianMatrix::from_graph(&g).unwrap();
        assert_eq!(l.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn fan_in_laplacian() {
        let l = LaplacianMatrix::from_graph(&fan_in()).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, -1.0, 2.0]);
        assert_eq!(l.matrix(), &expected);
        assert!(l.row_sums().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn empty_graph_gives_zero_matrix() {
        let l = LaplacianMatrix::from_graph(&WeightedDigraph::empty(4).unwrap()).unwrap();
        assert!(l.matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn symmetry_balance_connectivity() {
        let c = cycle3();
        assert!(!c.is_symmetric());
        assert!(c.is_balanced());
        assert_eq!(c.connectivity_kind(), ConnectivityKind::Strong);

        let sym = WeightedDigraph::new(3, [(0, 1, 1.5), (1, 0, 1.5), (1, 2, 0.5), (2, 1, 0.5)]).unwrap();
        assert!(sym.is_symmetric());
        assert!(sym.is_balanced());

        let f = fan_in();
        assert!(!f.is_balanced());
        assert_eq!(f.connectivity_kind(), ConnectivityKind::Disconnected);
        assert!(f.undirected_shape_connected());

        // a chain 0 -> 1 -> 2 is weakly connected under the pairwise test
        let chain = WeightedDigraph::new(3, [(1, 0, 1.0), (2, 1, 1.0)]).unwrap();
        assert_eq!(chain.connectivity_kind(), ConnectivityKind::Weak);

        let split = WeightedDigraph::new(4, [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]).unwrap();
        assert_eq!(split.connectivity_kind(), ConnectivityKind::Disconnected);
        assert!(!split.undirected_shape_connected());
    }

    #[test]
    fn relabel_moves_edges() {
        let g = fan_in().relabel(&[2, 0, 1]).unwrap();
        assert_eq!(g.weight(1, 2), 1.0);
        assert_eq!(g.weight(1, 0), 1.0);
        assert!(fan_in().relabel(&[0, 0, 1]).is_err());
    }
}
