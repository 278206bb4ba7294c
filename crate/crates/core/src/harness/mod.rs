//! Scenario generators and the experiment runner.
//!
//! The generators rebuild the shapes used in the classic consensus
//! experiments: a ring lattice, two cliques joined by a single bridge, and
//! a "battle" where two isolated blocks push opposite opinions into a grid.
//! These are parameterized reconstructions, not published data.

mod experiment;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{decompose, WeightedDigraph};

pub use experiment::{run_experiment, ExperimentConfig, ExperimentSummary, Model, ScenarioSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub graph: WeightedDigraph,
    pub s0: Vec<f64>,
    /// Number of isolated blocks the generator is designed to produce.
    pub expected_isolated: Option<usize>,
    /// Node groups with a role in the scenario, e.g. the two battle blocks.
    pub groups: Vec<(String, Vec<usize>)>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, graph: WeightedDigraph, s0: Vec<f64>) -> Result<Self> {
        if graph.n_nodes() != s0.len() {
            return Err(Error::Dimension { expected: graph.n_nodes(), actual: s0.len() });
        }
        Ok(Self { name: name.into(), graph, s0, expected_isolated: None, groups: Vec::new() })
    }

    pub fn group(&self, name: &str) -> Option<&[usize]> {
        self.groups.iter().find(|(g, _)| g == name).map(|(_, v)| v.as_slice())
    }

    /// Decomposition agrees with the generator's declared design.
    pub fn matches_design(&self) -> bool {
        self.expected_isolated.is_none_or(|k| decompose(&self.graph).n_isolated() == k)
    }
}

/// Opinions uniform on `[-1, 1]` from `seed`.
pub fn uniform_opinions(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn symmetric_edges(pairs: impl IntoIterator<Item = (usize, usize)>) -> Vec<(usize, usize, f64)> {
    pairs.into_iter().flat_map(|(a, b)| [(a, b, 1.0), (b, a, 1.0)]).collect()
}

/// Circulant ring: each node linked both ways to its `k` nearest
/// neighbours on each side.
pub fn make_ring(n: usize, k: usize) -> Result<WeightedDigraph> {
    if n < 3 || k == 0 || 2 * k >= n {
        return Err(Error::InvalidInput(format!("ring needs n >= 3 and 1 <= k < n/2, got n = {n}, k = {k}")));
    }
    let pairs = (0..n).flat_map(|i| (1..=k).map(move |d| (i, (i + d) % n)));
    Ok(WeightedDigraph::new(n, symmetric_edges(pairs))?)
}

/// Two complete `m`-cliques joined by one symmetric unit edge
/// between nodes `m - 1` and `m`.
pub fn make_bridged_clusters(m: usize) -> Result<WeightedDigraph> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("bridged clusters need m >= 2, got {m}")));
    }
    let clique = move |off: usize| (0..m).flat_map(move |i| (i + 1..m).map(move |j| (off + i, off + j)));
    let pairs = clique(0).chain(clique(m)).chain([(m - 1, m)]);
    Ok(WeightedDigraph::new(2 * m, symmetric_edges(pairs))?)
}

/// Grid dimensions and block sizes of the battle scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BattleParams {
    pub core_w: usize,
    pub core_h: usize,
    pub block_size: usize,
    pub links_per_side: usize,
}

impl Default for BattleParams {
    fn default() -> Self {
        Self { core_w: 20, core_h: 10, block_size: 5, links_per_side: 3 }
    }
}

/// Two isolated cliques at opinions -1 and +1 feeding opposite sides of a
/// symmetric 4-neighbour grid through one-way links.
///
/// Grid node `(r, c)` is `r * core_w + c`; block `left` follows the grid,
/// then block `right`. Links land on rows spread evenly down the first and
/// last grid columns.
pub fn make_battle(p: BattleParams, seed: u64) -> Result<Scenario> {
    let BattleParams { core_w, core_h, block_size, links_per_side } = p;
    if core_w == 0 || core_h == 0 || block_size == 0 || links_per_side == 0 {
        return Err(Error::InvalidInput("battle dimensions must be positive".into()));
    }
    if links_per_side > core_h {
        return Err(Error::InvalidInput(format!(
            "links_per_side ({links_per_side}) cannot exceed grid height ({core_h})"
        )));
    }
    let grid_n = core_w * core_h;
    let n = grid_n + 2 * block_size;
    let cell = |r: usize, c: usize| r * core_w + c;
    let mut pairs = Vec::new();
    for r in 0..core_h {
        for c in 0..core_w {
            if c + 1 < core_w {
                pairs.push((cell(r, c), cell(r, c + 1)));
            }
            if r + 1 < core_h {
                pairs.push((cell(r, c), cell(r + 1, c)));
            }
        }
    }
    let left: Vec<usize> = (grid_n..grid_n + block_size).collect();
    let right: Vec<usize> = (grid_n + block_size..n).collect();
    for block in [&left, &right] {
        for (a, &u) in block.iter().enumerate() {
            for &v in &block[a + 1..] {
                pairs.push((u, v));
            }
        }
    }
    let mut edges = symmetric_edges(pairs);
    for k in 0..links_per_side {
        let row = (2 * k + 1) * core_h / (2 * links_per_side);
        edges.push((cell(row, 0), left[k % block_size], 1.0));
        edges.push((cell(row, core_w - 1), right[k % block_size], 1.0));
    }
    let graph = WeightedDigraph::new(n, edges)?;

    let mut s0 = uniform_opinions(grid_n, seed);
    s0.extend(std::iter::repeat_n(-1.0, block_size));
    s0.extend(std::iter::repeat_n(1.0, block_size));

    let mut sc = Scenario::new("battle", graph, s0)?;
    sc.expected_isolated = Some(2);
    sc.groups = vec![("grid".into(), (0..grid_n).collect()), ("left".into(), left), ("right".into(), right)];
    Ok(sc)
}

/// Shortest influence-path length from any node of `sources`.
pub fn influence_distance(g: &WeightedDigraph, sources: &[usize]) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n_nodes()];
    let mut queue = VecDeque::new();
    for &s in sources {
        dist[s] = Some(0);
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        let d = dist[u].expect("queued nodes have a distance");
        for (v, _) in g.influenced(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// `dist(left) - dist(right)` for every grid node of a battle scenario:
/// positive means closer to the `+1` block.
pub fn battle_signed_distance(sc: &Scenario) -> Result<Vec<f64>> {
    let (grid, left, right) = match (sc.group("grid"), sc.group("left"), sc.group("right")) {
        (Some(g), Some(l), Some(r)) => (g, l, r),
        _ => return Err(Error::InvalidInput("not a battle scenario".into())),
    };
    let dl = influence_distance(&sc.graph, left);
    let dr = influence_distance(&sc.graph, right);
    grid.iter()
        .map(|&v| match (dl[v], dr[v]) {
            (Some(a), Some(b)) => Ok(a as f64 - b as f64),
            _ => Err(Error::InvalidInput(format!("grid node {v} is unreachable from a block"))),
        })
        .collect()
}

/// The three-node graph where node 2 listens to nodes 0 and 1.
pub fn make_fan_in() -> WeightedDigraph {
    WeightedDigraph::new(3, [(2, 0, 1.0), (2, 1, 1.0)]).expect("valid fan-in")
}
