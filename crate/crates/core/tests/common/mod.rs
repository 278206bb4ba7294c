#![allow(dead_code)]

use consensus_dynamics::graph::decompose;
use consensus_dynamics::WeightedDigraph;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn weight<R: Rng>(rng: &mut R) -> f64 {
    // (0, 2]
    2.0 - rng.random_range(0.0..2.0)
}

/// Erdős–Rényi digraph without self-loops.
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, density: f64) -> WeightedDigraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                edges.push((i, j, weight(rng)));
            }
        }
    }
    WeightedDigraph::new(n, edges).unwrap()
}

/// Corpus of random digraphs with `N in [3, 12]` and density in `[0.1, 0.9]`.
pub fn digraph_corpus<R: Rng>(rng: &mut R, count: usize) -> Vec<WeightedDigraph> {
    (0..count)
        .map(|_| {
            let n = rng.random_range(3..=12);
            let p = rng.random_range(0.1..=0.9);
            random_digraph(rng, n, p)
        })
        .collect()
}

/// Symmetric graph that is connected: a random spanning tree plus extra
/// symmetric edges.
pub fn random_connected_symmetric<R: Rng>(rng: &mut R, n: usize, density: f64) -> WeightedDigraph {
    let mut w = vec![vec![0.0; n]; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        let x = weight(rng);
        w[order[k]][parent] = x;
        w[parent][order[k]] = x;
    }
    for i in 0..n {
        for j in i + 1..n {
            if w[i][j] == 0.0 && rng.random_bool(density) {
                let x = weight(rng);
                w[i][j] = x;
                w[j][i] = x;
            }
        }
    }
    from_matrix(&w)
}

/// Strongly connected balanced graph built as a sum of weighted cycles,
/// the first one Hamiltonian.
pub fn random_balanced<R: Rng>(rng: &mut R, n: usize, extra_cycles: usize) -> WeightedDigraph {
    let mut w = vec![vec![0.0; n]; n];
    let add_cycle = |nodes: &[usize], x: f64, w: &mut Vec<Vec<f64>>| {
        for k in 0..nodes.len() {
            // next node listens to the current one
            w[nodes[(k + 1) % nodes.len()]][nodes[k]] += x;
        }
    };
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    add_cycle(&perm, weight(rng), &mut w);
    for _ in 0..extra_cycles {
        perm.shuffle(rng);
        let len = rng.random_range(2..=n);
        add_cycle(&perm[..len], weight(rng), &mut w);
    }
    from_matrix(&w)
}

/// `k` isolated strongly connected blocks feeding `downstream` further
/// nodes. Returns the graph and the block memberships.
pub fn random_layered<R: Rng>(
    rng: &mut R,
    k: usize,
    max_block: usize,
    downstream: usize,
) -> (WeightedDigraph, Vec<Vec<usize>>) {
    let mut blocks = Vec::new();
    let mut edges = Vec::new();
    let mut next = 0;
    for _ in 0..k {
        let size = rng.random_range(1..=max_block);
        let nodes: Vec<usize> = (next..next + size).collect();
        next += size;
        if size > 1 {
            for a in 0..size {
                edges.push((nodes[(a + 1) % size], nodes[a], weight(rng)));
            }
            for &a in &nodes {
                for &b in &nodes {
                    if a != b && rng.random_bool(0.3) && !edges.iter().any(|e| e.0 == a && e.1 == b) {
                        edges.push((a, b, weight(rng)));
                    }
                }
            }
        }
        blocks.push(nodes);
    }
    let roots = next;
    let n = roots + downstream;
    for v in roots..n {
        let src = rng.random_range(0..v);
        edges.push((v, src, weight(rng)));
        for u in roots..n {
            if u != v && u != src && rng.random_bool(0.25) {
                edges.push((v, u, weight(rng)));
            }
        }
        for u in 0..roots {
            if u != src && rng.random_bool(0.15) {
                edges.push((v, u, weight(rng)));
            }
        }
    }
    let g = WeightedDigraph::new(n, edges).unwrap();
    assert_eq!(decompose(&g).n_isolated(), k);
    (g, blocks)
}

pub fn from_matrix(w: &[Vec<f64>]) -> WeightedDigraph {
    let n = w.len();
    let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| w[i][j] > 0.0).map(|(i, j)| (i, j, w[i][j]));
    WeightedDigraph::new(n, edges.collect::<Vec<_>>()).unwrap()
}
