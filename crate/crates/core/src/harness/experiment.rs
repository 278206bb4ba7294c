use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{make_battle, make_bridged_clusters, make_fan_in, make_ring, uniform_opinions, BattleParams, Scenario};
use crate::deterministic::{self, integrate, sample_on_grid, variance, DecayFit};
use crate::error::{Error, Result};
use crate::graph::{decompose, parse_graph, predicts_unconditional_consensus, LaplacianMatrix};
use crate::spectral::{predict_limit, spectrum};
use crate::stats;
use crate::stochastic::monte_carlo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Ring { n: usize, k: usize },
    BridgedClusters { m: usize },
    Battle {
        #[serde(flatten, default)]
        params: BattleParams,
    },
    FanIn,
    /// Graph read from an edge-list or JSON file.
    File { path: String },
}

impl ScenarioSpec {
    /// Builds the scenario; `seed` draws the random opinions.
    pub fn build(&self, seed: u64) -> Result<Scenario> {
        let random = |name: &str, g| {
            let n = crate::graph::WeightedDigraph::n_nodes(&g);
            Scenario::new(name, g, uniform_opinions(n, seed))
        };
        match self {
            Self::Ring { n, k } => random("ring", make_ring(*n, *k)?),
            Self::BridgedClusters { m } => random("bridged_clusters", make_bridged_clusters(*m)?),
            Self::Battle { params } => make_battle(*params, seed),
            Self::FanIn => Scenario::new("fan_in", make_fan_in(), vec![1.0, -1.0, 0.0]),
            Self::File { path } => random("file", parse_graph(&fs::read_to_string(path)?)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Deterministic,
    Stochastic,
    Both,
}

fn default_reps() -> usize {
    1000
}

fn default_grid_points() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub model: Model,
    pub seed: u64,
    /// Defaults to `40 / lambda2`.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Overrides the scenario's opinions.
    #[serde(default)]
    pub s0: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicSummary {
    pub dt: f64,
    pub steps: usize,
    pub warning: Option<String>,
    pub final_spread: f64,
    pub final_average: f64,
    pub decay: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticSummary {
    pub reps: usize,
    pub final_variance: f64,
    pub final_variance_se: f64,
    pub final_absorbed_fraction: f64,
    pub decay: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    /// Largest `(E[V] - bound) / SE` over the grid, where SE > 0.
    pub max_excess_over_bound_in_se: Option<f64>,
    /// Rank correlation of the final Monte Carlo means with the
    /// deterministic state; `None` when either is constant.
    pub final_mean_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub scenario: String,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_isolated: usize,
    pub predicts_consensus: bool,
    pub zero_multiplicity: usize,
    pub lambda2: Option<f64>,
    pub t_end: f64,
    pub predicted_limit: Option<Vec<f64>>,
    pub deterministic: Option<DeterministicSummary>,
    pub stochastic: Option<StochasticSummary>,
    pub comparison: Option<ComparisonSummary>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config: &'a ExperimentConfig,
    graph_hash: String,
    files: Vec<&'a str>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs one configured experiment and writes its outputs to `out`.
///
/// Files: `trajectory.csv`, `trajectory.meta.json` and `variance.csv` for
/// the ODE; `batch.csv` for the jump process; `comparison.csv` with columns
/// `t,v_det,v_mc,se_mc,bound` when both run; always `summary.json` and
/// `manifest.json`. Nothing time-dependent is written, so reruns are
/// byte-identical.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    let mut sc = config.scenario.build(config.seed)?;
    if let Some(s0) = &config.s0 {
        sc = Scenario::new(sc.name, sc.graph, s0.clone())?;
    }
    if config.grid_points < 2 {
        return Err(Error::InvalidInput("grid_points must be at least 2".into()));
    }
    let l = LaplacianMatrix::from_graph(&sc.graph)?;
    let spec = spectrum(&l)?;
    let d = decompose(&sc.graph);
    let t_end = match (config.t_end, spec.lambda2) {
        (Some(t), _) => t,
        (None, Some(l2)) if l2 > 0.0 => 40.0 / l2,
        _ => return Err(Error::InvalidInput("t_end is required when lambda2 is zero".into())),
    };
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    let dt = config.dt.unwrap_or_else(|| deterministic::default_dt(&l));
    let grid: Vec<f64> =
        (0..config.grid_points).map(|k| t_end * k as f64 / (config.grid_points - 1) as f64).collect();
    let n = sc.graph.n_nodes();

    fs::create_dir_all(out)?;
    let mut files = Vec::new();

    let run_det = matches!(config.model, Model::Deterministic | Model::Both);
    let run_sto = matches!(config.model, Model::Stochastic | Model::Both);

    let det_summary = if run_det {
        let traj = integrate(&l, &sc.s0, t_end, dt)?;
        traj.write_csv(create(&out.join("trajectory.csv"))?)?;
        write_json(&out.join("trajectory.meta.json"), &traj.meta)?;
        traj.write_variance_csv(create(&out.join("variance.csv"))?)?;
        files.extend(["trajectory.csv", "trajectory.meta.json", "variance.csv"]);
        let last = traj.final_state();
        Some(DeterministicSummary {
            dt: traj.meta.dt,
            steps: traj.meta.steps,
            warning: traj.meta.warning.clone(),
            final_spread: deterministic::spread(last),
            final_average: stats::mean(last),
            decay: traj.fit_decay_rate().ok(),
        })
    } else {
        None
    };

    let batch = if run_sto { Some(monte_carlo(&sc.graph, &sc.s0, &grid, config.reps, config.seed)?) } else { None };
    let sto_summary = batch.as_ref().map(|b| {
        let k = grid.len() - 1;
        b.write_csv(create(&out.join("batch.csv"))?)?;
        files.push("batch.csv");
        Ok::<_, Error>(StochasticSummary {
            reps: b.n_reps,
            final_variance: b.variance_estimate[k],
            final_variance_se: b.variance_se[k],
            final_absorbed_fraction: b.absorbed_fraction[k],
            decay: deterministic::fit_log_decay(&grid, &b.variance_estimate).ok(),
        })
    });
    let sto_summary = sto_summary.transpose()?;

    let comparison = match (&batch, run_det) {
        (Some(b), true) => {
            let det = sample_on_grid(&l, &sc.s0, &grid, dt)?;
            let v_det: Vec<f64> = det.iter().map(|s| variance(s)).collect();
            let v0 = variance(&sc.s0);
            let bound: Vec<f64> = match (spec.is_symmetric_case, spec.lambda2) {
                (true, Some(l2)) => grid.iter().map(|t| (-l2 * t / n as f64).exp() * v0).collect(),
                _ => vec![f64::NAN; grid.len()],
            };
            crate::io::write_columns(
                create(&out.join("comparison.csv"))?,
                &["t", "v_det", "v_mc", "se_mc", "bound"],
                &[&grid, &v_det, &b.variance_estimate, &b.variance_se, &bound],
            )?;
            files.push("comparison.csv");
            let excess = (0..grid.len())
                .filter(|&k| b.variance_se[k] > 0.0 && bound[k].is_finite())
                .map(|k| (b.variance_estimate[k] - bound[k]) / b.variance_se[k])
                .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
            let rho = stats::spearman(&b.mean_estimate[grid.len() - 1], &det[grid.len() - 1]);
            Some(ComparisonSummary { max_excess_over_bound_in_se: excess, final_mean_spearman: rho.is_finite().then_some(rho) })
        }
        _ => None,
    };

    let summary = ExperimentSummary {
        scenario: sc.name.clone(),
        n_nodes: n,
        n_edges: sc.graph.n_edges(),
        n_isolated: d.n_isolated(),
        predicts_consensus: predicts_unconditional_consensus(&d),
        zero_multiplicity: spec.zero_multiplicity,
        lambda2: spec.lambda2,
        t_end,
        predicted_limit: predict_limit(&spec, &sc.s0).ok(),
        deterministic: det_summary,
        stochastic: sto_summary,
        comparison,
    };
    write_json(&out.join("summary.json"), &summary)?;
    files.extend(["summary.json", "manifest.json"]);
    let manifest =
        Manifest { version: env!("CARGO_PKG_VERSION"), config, graph_hash: deterministic::laplacian_hash(&l), files };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(summary)
}
