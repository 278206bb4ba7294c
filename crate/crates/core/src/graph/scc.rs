//! Strongly connected components, their condensation order, and the
//! isolated/absorbing classification that decides whether consensus is
//! unconditional.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LaplacianMatrix, WeightedDigraph};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Receives no influence from outside the block.
    Isolated,
    /// Not isolated, and exerts no influence outside the block.
    Absorbing,
    Neither,
}

/// SCCs in a topological order of the influence DAG (influencers first).
///
/// Among incomparable blocks, the one holding the smallest node index comes
/// first, so the order is a pure function of the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condensation {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    /// `(a, b)`: some node of block `a` influences some node of block `b`.
    edges: Vec<(usize, usize)>,
}

impl Condensation {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, node: usize) -> usize {
        self.block_of[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// New position -> original node, concatenating blocks in order.
    pub fn permutation(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// `reach[a][b]`: block `a` influences block `b`, directly or not.
    pub fn block_reachability(&self) -> Vec<Vec<bool>> {
        let d = self.n_blocks();
        let mut succ = vec![Vec::new(); d];
        for &(a, b) in &self.edges {
            succ[a].push(b);
        }
        let mut reach = vec![vec![false; d]; d];
        // topological order means successors have larger indices
        for a in (0..d).rev() {
            reach[a][a] = true;
            for &b in &succ[a] {
                for c in b..d {
                    if reach[b][c] {
                        reach[a][c] = true;
                    }
                }
            }
        }
        reach
    }
}

/// Iterative Tarjan over the influence direction, followed by a
/// smallest-index-first topological sort of the condensation.
pub fn strongly_connected_components(g: &WeightedDigraph) -> Condensation {
    let n = g.n_nodes();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0;
    let mut comp_of = vec![UNSEEN; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));

        while let Some(frame) = call.last_mut() {
            let u = frame.0;
            if let Some(&k) = g.outgoing[u].get(frame.1) {
                frame.1 += 1;
                let w = g.edges[k].target;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[u] = low[u].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[u]);
            }
            if low[u] == index[u] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp_of[w] = comps.len();
                    comp.push(w);
                    if w == u {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }

    let d = comps.len();
    let mut raw_edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .map(|e| (comp_of[e.source], comp_of[e.target]))
        .filter(|(a, b)| a != b)
        .collect();
    raw_edges.sort_unstable();
    raw_edges.dedup();

    // Kahn's algorithm keyed on each block's smallest node
    let mut indegree = vec![0usize; d];
    let mut succ = vec![Vec::new(); d];
    for &(a, b) in &raw_edges {
        indegree[b] += 1;
        succ[a].push(b);
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..d)
        .filter(|&c| indegree[c] == 0)
        .map(|c| Reverse((comps[c][0], c)))
        .collect();
    let mut order = Vec::with_capacity(d);
    while let Some(Reverse((_, c))) = heap.pop() {
        order.push(c);
        for &b in &succ[c] {
            indegree[b] -= 1;
            if indegree[b] == 0 {
                heap.push(Reverse((comps[b][0], b)));
            }
        }
    }
    debug_assert_eq!(order.len(), d, "condensation must be acyclic");

    let mut rank = vec![0; d];
    for (pos, &c) in order.iter().enumerate() {
        rank[c] = pos;
    }
    let blocks: Vec<Vec<usize>> = order.iter().map(|&c| comps[c].clone()).collect();
    let block_of = comp_of.iter().map(|&c| rank[c]).collect();
    let mut edges: Vec<(usize, usize)> = raw_edges.iter().map(|&(a, b)| (rank[a], rank[b])).collect();
    edges.sort_unstable();

    Condensation { blocks, block_of, edges }
}

/// SCCs with their isolated/absorbing labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDecomposition {
    condensation: Condensation,
    labels: Vec<BlockKind>,
}

impl BlockDecomposition {
    pub fn condensation(&self) -> &Condensation {
        &self.condensation
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        self.condensation.blocks()
    }

    pub fn labels(&self) -> &[BlockKind] {
        &self.labels
    }

    pub fn permutation(&self) -> Vec<usize> {
        self.condensation.permutation()
    }

    pub fn n_isolated(&self) -> usize {
        self.labels.iter().filter(|&&k| k == BlockKind::Isolated).count()
    }

    pub fn isolated_blocks(&self) -> impl Iterator<Item = &[usize]> {
        self.blocks()
            .iter()
            .zip(&self.labels)
            .filter(|(_, &k)| k == BlockKind::Isolated)
            .map(|(b, _)| b.as_slice())
    }
}

/// Labels each block from the presence of cross-block edges.
pub fn classify_blocks(g: &WeightedDigraph, condensation: Condensation) -> BlockDecomposition {
    let d = condensation.n_blocks();
    let mut has_in = vec![false; d];
    let mut has_out = vec![false; d];
    for e in g.edges() {
        let (a, b) = (condensation.block_of(e.source), condensation.block_of(e.target));
        if a != b {
            has_out[a] = true;
            has_in[b] = true;
        }
    }
    let labels = (0..d)
        .map(|k| match (has_in[k], has_out[k]) {
            (false, _) => BlockKind::Isolated,
            (true, false) => BlockKind::Absorbing,
            (true, true) => BlockKind::Neither,
        })
        .collect();
    BlockDecomposition { condensation, labels }
}

pub fn decompose(g: &WeightedDigraph) -> BlockDecomposition {
    classify_blocks(g, strongly_connected_components(g))
}

/// Consensus for every initial condition, in both the ODE and the jump
/// process, holds exactly when there is a single isolated block.
pub fn predicts_unconditional_consensus(d: &BlockDecomposition) -> bool {
    d.n_isolated() == 1
}

/// Matrix-side isolation test: every row of the diagonal block sums to zero.
pub fn isolated_by_row_sums(l: &LaplacianMatrix, block: &[usize]) -> bool {
    let m = l.matrix();
    block.iter().all(|&i| {
        let s: f64 = block.iter().map(|&j| m[(i, j)]).sum();
        s.abs() <= 1e-12 * m[(i, i)].max(1.0)
    })
}

/// `L` with rows and columns reordered into block lower triangular form.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusForm {
    /// New position -> original node.
    pub permutation: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub block_ranges: Vec<Range<usize>>,
}

impl FrobeniusForm {
    pub fn diagonal_block(&self, k: usize) -> DMatrix<f64> {
        let r = &self.block_ranges[k];
        self.matrix.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    /// Exact check that every entry above the diagonal blocks is zero.
    pub fn is_block_lower_triangular(&self) -> bool {
        self.block_ranges.iter().all(|r| {
            r.clone().all(|row| (r.end..self.matrix.ncols()).all(|col| self.matrix[(row, col)] == 0.0))
        })
    }
}

pub fn frobenius_form(l: &LaplacianMatrix, d: &BlockDecomposition) -> Result<FrobeniusForm> {
    let permutation = d.permutation();
    let n = permutation.len();
    if n != l.n() {
        return Err(crate::Error::Dimension { expected: l.n(), actual: n });
    }
    let m = l.matrix();
    let matrix = DMatrix::from_fn(n, n, |a, b| m[(permutation[a], permutation[b])]);
    let mut block_ranges = Vec::with_capacity(d.blocks().len());
    let mut start = 0;
    for b in d.blocks() {
        block_ranges.push(start..start + b.len());
        start += b.len();
    }
    Ok(FrobeniusForm { permutation, matrix, block_ranges })
}
