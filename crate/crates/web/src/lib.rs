//! wasm-bindgen bindings for the browser demo. Every call takes and returns
//! JSON strings; the `*_json` functions are the plain-Rust versions.

use consensus_dynamics::control::steer;
use consensus_dynamics::deterministic::{default_dt, integrate, variance};
use consensus_dynamics::graph::{decompose, parse_graph, predicts_unconditional_consensus, BlockKind};
use consensus_dynamics::harness::{make_battle, make_bridged_clusters, make_fan_in, make_ring, uniform_opinions, BattleParams};
use consensus_dynamics::spectral::{predict_limit, spectrum};
use consensus_dynamics::stochastic::simulate;
use consensus_dynamics::{LaplacianMatrix, WeightedDigraph};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Points per plotted series.
const PLOT_POINTS: usize = 400;

type Out = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn opinions(text: &str, n: usize, seed: u64) -> Result<Vec<f64>, String> {
    if text.trim().is_empty() {
        return Ok(uniform_opinions(n, seed));
    }
    let s0: Vec<f64> = serde_json::from_str(text).map_err(err)?;
    if s0.len() != n {
        return Err(format!("expected {n} opinions, got {}", s0.len()));
    }
    Ok(s0)
}

fn plot_grid(t_end: f64) -> Vec<f64> {
    (0..PLOT_POINTS).map(|k| t_end * k as f64 / (PLOT_POINTS - 1) as f64).collect()
}

pub fn analyze_json(graph: &str) -> Out {
    let g = parse_graph(graph).map_err(err)?;
    let spec = spectrum(&LaplacianMatrix::from_graph(&g).map_err(err)?).map_err(err)?;
    let d = decompose(&g);
    let blocks: Vec<Value> = d
        .blocks()
        .iter()
        .zip(d.labels())
        .map(|(nodes, kind)| {
            let kind = match kind {
                BlockKind::Isolated => "isolated",
                BlockKind::Absorbing => "absorbing",
                BlockKind::Neither => "neither",
            };
            json!({ "nodes": nodes, "kind": kind })
        })
        .collect();
    Ok(json!({
        "n": g.n_nodes(),
        "blocks": blocks,
        "predicts_consensus": predicts_unconditional_consensus(&d),
        "spectrum": spec.report(),
    })
    .to_string())
}

/// Both models on one graph: the ODE and one jump-process path, sampled on
/// the same time grid, plus the predicted limit.
pub fn simulate_json(graph: &str, s0: &str, t_end: f64, seed: u64) -> Out {
    let g = parse_graph(graph).map_err(err)?;
    let s0 = opinions(s0, g.n_nodes(), seed)?;
    let l = LaplacianMatrix::from_graph(&g).map_err(err)?;
    let traj = integrate(&l, &s0, t_end, default_dt(&l)).map_err(err)?;
    let stride = traj.times.len().div_ceil(PLOT_POINTS).max(1);
    let pick = |xs: &[f64]| -> Vec<f64> { xs.iter().step_by(stride).copied().collect() };
    let det_t = pick(&traj.times);
    let det_s: Vec<&Vec<f64>> = traj.states.iter().step_by(stride).collect();
    let det_v = pick(&traj.variances());

    let run = simulate(&g, &s0, t_end, seed).map_err(err)?;
    let grid = plot_grid(t_end);
    let sto_s: Vec<Vec<f64>> = grid.iter().map(|&t| run.state_at(t)).collect();
    let sto_v: Vec<f64> = sto_s.iter().map(|s| variance(s)).collect();
    let spec = spectrum(&l).map_err(err)?;
    Ok(json!({
        "s0": s0,
        "deterministic": { "t": det_t, "s": det_s, "v": det_v },
        "stochastic": {
            "t": grid, "s": sto_s, "v": sto_v,
            "absorbed_at": run.absorbed_at, "events": run.effective_events(),
        },
        "limit": predict_limit(&spec, &s0).ok(),
    })
    .to_string())
}

pub fn steer_json(s0: &str, target: f64) -> Out {
    let s0: Vec<f64> = serde_json::from_str(s0).map_err(err)?;
    let plan = steer(&s0, target).map_err(err)?;
    Ok(json!({
        "alpha": plan.alpha,
        "beta": plan.beta,
        "max_node": plan.max_node,
        "min_node": plan.min_node,
        "edges": plan.graph.to_edge_list(),
    })
    .to_string())
}

/// `name` is one of `ring`, `bridged`, `battle`, `fan-in`.
pub fn scenario_json(name: &str, size: usize, seed: u64) -> Out {
    let (g, s0): (WeightedDigraph, Option<Vec<f64>>) = match name {
        "ring" => (make_ring(size, 2).map_err(err)?, None),
        "bridged" => (make_bridged_clusters(size).map_err(err)?, None),
        "battle" => {
            let p = BattleParams { core_w: size.max(2), core_h: (size / 2).max(3), ..BattleParams::default() };
            let sc = make_battle(p, seed).map_err(err)?;
            (sc.graph, Some(sc.s0))
        }
        "fan-in" => (make_fan_in(), Some(vec![1.0, -1.0, 0.0])),
        _ => return Err(format!("unknown scenario {name:?}")),
    };
    let s0 = s0.unwrap_or_else(|| uniform_opinions(g.n_nodes(), seed));
    Ok(json!({ "edges": g.to_edge_list(), "s0": s0 }).to_string())
}

fn js(r: Out) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze(graph: &str) -> Result<String, JsError> {
    js(analyze_json(graph))
}

#[wasm_bindgen]
pub fn simulate_both(graph: &str, s0: &str, t_end: f64, seed: u32) -> Result<String, JsError> {
    js(simulate_json(graph, s0, t_end, u64::from(seed)))
}

#[wasm_bindgen]
pub fn steer_to(s0: &str, target: f64) -> Result<String, JsError> {
    js(steer_json(s0, target))
}

#[wasm_bindgen]
pub fn scenario(name: &str, size: u32, seed: u32) -> Result<String, JsError> {
    js(scenario_json(name, size as usize, u64::from(seed)))
}
