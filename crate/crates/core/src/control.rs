//! Building a graph whose consensus lands on a chosen value.
//!
//! The two agents holding the extreme opinions form the only isolated
//! block. With `beta = (s* - s_min) / (s_max - s_min)` and `alpha = 1 - beta`,
//! the min agent listens to the max agent at rate `beta` and the max agent
//! listens to the min agent at rate `alpha`. The block then settles at
//! `beta * s_max + alpha * s_min = s*`. Everyone else hangs off a unit-weight
//! chain fed by the min agent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringPlan {
    pub graph: WeightedDigraph,
    pub alpha: f64,
    pub beta: f64,
    pub max_node: usize,
    pub min_node: usize,
    /// Nodes outside the block in chain order.
    pub chain: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringReport {
    pub alpha: f64,
    pub beta: f64,
    pub max_node: usize,
    pub min_node: usize,
    pub target: f64,
    pub predicted_limit: Vec<f64>,
    pub lambda2: Option<f64>,
}

/// Extreme opinions by value; ties go to the smallest index.
fn extremes(s0: &[f64]) -> (usize, usize) {
    let mut imax = 0;
    let mut imin = 0;
    for (i, &x) in s0.iter().enumerate() {
        if x > s0[imax] {
            imax = i;
        }
        if x < s0[imin] {
            imin = i;
        }
    }
    (imax, imin)
}

pub fn steer(s0: &[f64], target: f64) -> Result<SteeringPlan> {
    let n = s0.len();
    if n < 2 {
        return Err(Error::InvalidInput("steering needs at least 2 agents".into()));
    }
    if !target.is_finite() || s0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("opinions and target must be finite".into()));
    }
    let (imax, imin) = extremes(s0);
    let (hi, lo) = (s0[imax], s0[imin]);
    if target < lo || target > hi {
        return Err(Error::OutsideHull { target, min: lo, max: hi });
    }

    if hi == lo {
        // any connected graph keeps the common value
        let graph = WeightedDigraph::new(n, (1..n).map(|k| (k, k - 1, 1.0)))?;
        return Ok(SteeringPlan {
            graph,
            alpha: 0.5,
            beta: 0.5,
            max_node: 0,
            min_node: 0,
            chain: (1..n).collect(),
        });
    }

    let beta = (target - lo) / (hi - lo);
    let alpha = 1.0 - beta;
    let chain: Vec<usize> = (0..n).filter(|&k| k != imax && k != imin).collect();
    let mut edges = vec![(imax, imin, alpha), (imin, imax, beta)];
    let mut prev = imin;
    for &k in &chain {
        edges.push((k, prev, 1.0));
        prev = k;
    }
    let graph = WeightedDigraph::new(n, edges)?;
    Ok(SteeringPlan { graph, alpha, beta, max_node: imax, min_node: imin, chain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{decompose, LaplacianMatrix};
    use crate::spectral::predict_limit_for;
    use approx::assert_abs_diff_eq;

    fn limit(plan: &SteeringPlan, s0: &[f64]) -> Vec<f64> {
        predict_limit_for(&LaplacianMatrix::from_graph(&plan.graph).unwrap(), s0).unwrap()
    }

    #[test]
    fn two_agents_quarter() {
        let s0 = [0.0, 1.0];
        let plan = steer(&s0, 0.25).unwrap();
        assert_abs_diff_eq!(plan.alpha, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(plan.beta, 0.25, epsilon = 1e-15);
        for x in limit(&plan, &s0) {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-10);
        }
    }

    #[test]
    fn target_at_maximum() {
        let s0 = [0.2, 0.9, 0.4];
        let plan = steer(&s0, 0.9).unwrap();
        assert_eq!(plan.beta, 1.0);
        assert_eq!(plan.alpha, 0.0);
        let d = decompose(&plan.graph);
        assert_eq!(d.n_isolated(), 1);
        assert_eq!(d.isolated_blocks().next().unwrap(), &[1]);
        for x in limit(&plan, &s0) {
            assert_abs_diff_eq!(x, 0.9, epsilon = 1e-10);
        }
    }

    #[test]
    fn four_agents_half() {
        let s0 = [0.0, 0.3, 0.7, 1.0];
        let plan = steer(&s0, 0.5).unwrap();
        assert_eq!((plan.max_node, plan.min_node), (3, 0));
        assert_eq!(plan.chain, vec![1, 2]);
        assert_eq!(plan.graph.weight(1, 0), 1.0);
        assert_eq!(plan.graph.weight(2, 1), 1.0);
        assert_eq!(plan.graph.weight(3, 0), 0.5);
        assert_eq!(plan.graph.weight(0, 3), 0.5);
        let d = decompose(&plan.graph);
        assert_eq!(d.n_isolated(), 1);
        assert_eq!(d.isolated_blocks().next().unwrap(), &[0, 3]);
        for x in limit(&plan, &s0) {
            assert_abs_diff_eq!(x, 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn sign_mixed_uses_value_extremes() {
        let s0 = [-3.0, 1.0, 0.5];
        let plan = steer(&s0, -1.0).unwrap();
        assert_eq!((plan.max_node, plan.min_node), (1, 0));
        for x in limit(&plan, &s0) {
            assert_abs_diff_eq!(x, -1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn outside_hull_is_rejected() {
        let err = steer(&[0.0, 1.0], 1.5).unwrap_err();
        assert!(matches!(err, Error::OutsideHull { .. }));
        assert!(err.to_string().contains("convex hull"));
    }

    #[test]
    fn degenerate_opinions() {
        let plan = steer(&[2.0, 2.0, 2.0], 2.0).unwrap();
        assert_eq!(decompose(&plan.graph).n_isolated(), 1);
        assert!(steer(&[2.0, 2.0], 3.0).is_err());
        assert!(steer(&[2.0], 2.0).is_err());
    }
}
