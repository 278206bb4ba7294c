//! Exact absorption analysis of the embedded chain for small graphs.
//!
//! States are label vectors over the distinct initial opinions, packed in
//! base `k`. Transitions that change nothing are dropped; this leaves the
//! absorption distribution unchanged. A state with no remaining transition
//! is absorbing.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_dims, Encoded};
use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

pub const STATE_BUDGET: usize = 1_000_000;
pub const MAX_NODES: usize = 8;

/// Dense LU is used up to this many transient states.
const DENSE_LIMIT: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSolver {
    Auto,
    Dense,
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionOutcome {
    pub state: Vec<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactChain {
    pub n_states: usize,
    /// Every reachable state can reach an absorbing state.
    pub is_absorbing: bool,
    /// Empty when the chain is not absorbing.
    pub outcomes: Vec<AbsorptionOutcome>,
    /// `E[S_i]` at absorption, per node.
    pub expected_final: Option<Vec<f64>>,
    /// Probability that the absorbing state is a global consensus.
    pub consensus_probability: Option<f64>,
}

struct StateGraph {
    /// Packed states, indexed by id.
    states: Vec<u64>,
    /// `(to, probability)` per state; empty for absorbing states.
    transitions: Vec<Vec<(usize, f64)>>,
}

fn pack(labels: &[u32], base: u64) -> u64 {
    labels.iter().rev().fold(0, |acc, &l| acc * base + u64::from(l))
}

fn unpack(mut code: u64, base: u64, n: usize, out: &mut [u32]) {
    for slot in out.iter_mut().take(n) {
        *slot = (code % base) as u32;
        code /= base;
    }
}

fn explore(g: &WeightedDigraph, enc: &Encoded) -> Result<StateGraph> {
    let n = g.n_nodes();
    let base = enc.values.len() as u64;
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut transitions = Vec::new();
    let start = pack(&enc.labels, base);
    ids.insert(start, 0);
    states.push(start);
    let mut queue = VecDeque::from([0usize]);
    let mut labels = vec![0u32; n];

    while let Some(id) = queue.pop_front() {
        unpack(states[id], base, n, &mut labels);
        let mut out: Vec<(u64, f64)> = Vec::new();
        let mut total = 0.0;
        for e in g.edges() {
            if labels[e.target] == labels[e.source] {
                continue;
            }
            let old = labels[e.target];
            labels[e.target] = labels[e.source];
            out.push((pack(&labels, base), e.weight));
            labels[e.target] = old;
            total += e.weight;
        }
        out.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, f64)> = Vec::new();
        let mut last: Option<u64> = None;
        for (code, w) in out {
            if last == Some(code) {
                merged.last_mut().expect("merged entry exists").1 += w / total;
                continue;
            }
            last = Some(code);
            let next_id = match ids.get(&code) {
                Some(&k) => k,
                None => {
                    if states.len() >= STATE_BUDGET {
                        return Err(Error::StateSpaceBudget { budget: STATE_BUDGET });
                    }
                    let k = states.len();
                    ids.insert(code, k);
                    states.push(code);
                    queue.push_back(k);
                    k
                }
            };
            merged.push((next_id, w / total));
        }
        if transitions.len() <= id {
            transitions.resize(id + 1, Vec::new());
        }
        transitions[id] = merged;
    }
    transitions.resize(states.len(), Vec::new());
    Ok(StateGraph { states, transitions })
}

/// Expected visits to each transient state starting from state 0:
/// `(I - Q^T) v = e_0`.
fn expected_visits(sg: &StateGraph, transient: &[usize], solver: ChainSolver) -> Result<Vec<f64>> {
    let m = transient.len();
    let mut pos = vec![usize::MAX; sg.states.len()];
    for (k, &s) in transient.iter().enumerate() {
        pos[s] = k;
    }
    let dense = match solver {
        ChainSolver::Auto => m <= DENSE_LIMIT,
        ChainSolver::Dense => true,
        ChainSolver::GaussSeidel => false,
    };
    if dense {
        let mut a = DMatrix::<f64>::identity(m, m);
        for (k, &s) in transient.iter().enumerate() {
            for &(to, p) in &sg.transitions[s] {
                if pos[to] != usize::MAX {
                    a[(pos[to], k)] -= p;
                }
            }
        }
        let mut rhs = DVector::zeros(m);
        rhs[pos[0]] = 1.0;
        let v = a.lu().solve(&rhs).ok_or_else(|| Error::InvalidInput("singular absorption system".into()))?;
        return Ok(v.iter().copied().collect());
    }

    // incoming transitions between transient states
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (k, &s) in transient.iter().enumerate() {
        for &(to, p) in &sg.transitions[s] {
            if pos[to] != usize::MAX {
                incoming[pos[to]].push((k, p));
            }
        }
    }
    let mut v = vec![0.0; m];
    let origin = pos[0];
    for _sweep in 0..1_000_000 {
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..m {
            let mut x = if k == origin { 1.0 } else { 0.0 };
            let mut self_p = 0.0;
            for &(from, p) in &incoming[k] {
                if from == k {
                    self_p += p;
                } else {
                    x += p * v[from];
                }
            }
            x /= 1.0 - self_p;
            delta = delta.max((x - v[k]).abs());
            scale = scale.max(x.abs());
            v[k] = x;
        }
        if delta <= 1e-15 * scale.max(1.0) {
            return Ok(v);
        }
    }
    Err(Error::InvalidInput("Gauss-Seidel did not converge on the absorption system".into()))
}

/// Absorption distribution of the jump chain from `s0`, by exhaustive
/// enumeration of the reachable states and an exact linear solve.
pub fn exact_chain(g: &WeightedDigraph, s0: &[f64]) -> Result<ExactChain> {
    exact_chain_with(g, s0, ChainSolver::Auto)
}

pub fn exact_chain_with(g: &WeightedDigraph, s0: &[f64], solver: ChainSolver) -> Result<ExactChain> {
    check_dims(g, s0)?;
    let n = g.n_nodes();
    if n > MAX_NODES {
        return Err(Error::InvalidInput(format!(
            "exact chain supports at most {MAX_NODES} nodes, got {n}; use Monte Carlo instead"
        )));
    }
    let enc = Encoded::new(s0)?;
    let sg = explore(g, &enc)?;
    let n_states = sg.states.len();
    let base = enc.values.len() as u64;

    // states that can reach an absorbing state
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n_states];
    for (s, ts) in sg.transitions.iter().enumerate() {
        for &(to, _) in ts {
            reverse[to].push(s);
        }
    }
    let mut can_absorb = vec![false; n_states];
    let mut queue: VecDeque<usize> = (0..n_states).filter(|&s| sg.transitions[s].is_empty()).collect();
    for &s in &queue {
        can_absorb[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &r in &reverse[s] {
            if !can_absorb[r] {
                can_absorb[r] = true;
                queue.push_back(r);
            }
        }
    }
    if !can_absorb.iter().all(|&b| b) {
        return Ok(ExactChain {
            n_states,
            is_absorbing: false,
            outcomes: Vec::new(),
            expected_final: None,
            consensus_probability: None,
        });
    }

    let transient: Vec<usize> = (0..n_states).filter(|&s| !sg.transitions[s].is_empty()).collect();
    let mut absorb_p: HashMap<usize, f64> = HashMap::new();
    if transient.is_empty() {
        absorb_p.insert(0, 1.0);
    } else {
        let visits = expected_visits(&sg, &transient, solver)?;
        for (k, &s) in transient.iter().enumerate() {
            for &(to, p) in &sg.transitions[s] {
                if sg.transitions[to].is_empty() {
                    *absorb_p.entry(to).or_insert(0.0) += visits[k] * p;
                }
            }
        }
    }

    let mut outcomes: Vec<(usize, f64)> = absorb_p.into_iter().collect();
    outcomes.sort_by_key(|&(s, _)| s);
    let mut labels = vec![0u32; n];
    let mut expected = vec![0.0; n];
    let mut consensus = 0.0;
    let outcomes = outcomes
        .into_iter()
        .map(|(s, p)| {
            unpack(sg.states[s], base, n, &mut labels);
            let state = enc.decode(&labels);
            for (e, x) in expected.iter_mut().zip(&state) {
                *e += p * x;
            }
            if labels.iter().all(|&l| l == labels[0]) {
                consensus += p;
            }
            AbsorptionOutcome { state, probability: p }
        })
        .collect();
    Ok(ExactChain {
        n_states,
        is_absorbing: true,
        outcomes,
        expected_final: Some(expected),
        consensus_probability: Some(consensus),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn complete(n: usize) -> WeightedDigraph {
        let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j, 1.0)));
        WeightedDigraph::new(n, edges).unwrap()
    }

    #[test]
    fn two_node_complete() {
        let r = exact_chain(&complete(2), &[0.0, 1.0]).unwrap();
        assert!(r.is_absorbing);
        assert_eq!(r.outcomes.len(), 2);
        for o in &r.outcomes {
            assert_abs_diff_eq!(o.probability, 0.5, epsilon = 1e-15);
        }
        let e = r.expected_final.unwrap();
        assert_abs_diff_eq!(e[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.consensus_probability.unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn balanced_cycle_preserves_mean() {
        let g = WeightedDigraph::new(3, [(1, 0, 1.0), (2, 1, 1.0), (0, 2, 1.0)]).unwrap();
        let r = exact_chain(&g, &[0.0, 1.0, 2.0]).unwrap();
        for x in r.expected_final.unwrap() {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fan_in_is_not_absorbing() {
        let g = WeightedDigraph::new(3, [(2, 0, 1.0), (2, 1, 1.0)]).unwrap();
        let r = exact_chain(&g, &[0.0, 1.0, 0.5]).unwrap();
        assert!(!r.is_absorbing);
        assert_eq!(r.n_states, 3);
        assert!(r.expected_final.is_none());
    }

    #[test]
    fn frozen_disconnected_state_is_absorbing_but_not_consensus() {
        let g = WeightedDigraph::new(4, [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]).unwrap();
        let r = exact_chain(&g, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(r.is_absorbing);
        assert_eq!(r.outcomes.len(), 1);
        assert_eq!(r.consensus_probability, Some(0.0));
    }

    #[test]
    fn dense_and_iterative_solvers_agree() {
        let g = WeightedDigraph::new(
            4,
            [(1, 0, 0.7), (2, 1, 1.3), (3, 2, 0.4), (0, 3, 2.0), (0, 2, 0.5), (2, 0, 0.9)],
        )
        .unwrap();
        let s0 = [0.0, 1.0, 2.0, 3.0];
        let a = exact_chain_with(&g, &s0, ChainSolver::Dense).unwrap();
        let b = exact_chain_with(&g, &s0, ChainSolver::GaussSeidel).unwrap();
        assert_eq!(a.outcomes.len(), b.outcomes.len());
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            assert_eq!(x.state, y.state);
            assert_abs_diff_eq!(x.probability, y.probability, epsilon = 1e-12);
        }
        let total: f64 = a.outcomes.iter().map(|o| o.probability).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_many_nodes() {
        assert!(exact_chain(&complete(9), &[0.0; 9]).is_err());
    }
}
