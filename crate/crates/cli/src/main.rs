use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use consensus_dynamics::control::{steer, SteeringReport};
use consensus_dynamics::deterministic::{default_dt, integrate, laplacian_hash};
use consensus_dynamics::graph::{decompose, parse_graph, predicts_unconditional_consensus, BlockKind};
use consensus_dynamics::harness::{
    make_battle, make_bridged_clusters, make_fan_in, make_ring, run_experiment, uniform_opinions, BattleParams,
    ExperimentConfig, Model, Scenario, ScenarioSpec,
};
use consensus_dynamics::spectral::{predict_limit, spectrum};
use consensus_dynamics::stochastic::{monte_carlo, simulate};
use consensus_dynamics::{Error, LaplacianMatrix, Result, WeightedDigraph};
use serde_json::json;

#[derive(Parser)]
#[command(name = "consensus", version, about = "Linear consensus dynamics on weighted digraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct Opinions {
    /// Initial opinions: a comma-separated list or a JSON array file.
    /// Uniform on [-1, 1] from --seed when omitted.
    #[arg(long, allow_hyphen_values = true)]
    s0: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Block decomposition, spectrum and consensus prediction.
    Analyze {
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the ODE.
    SimulateDet {
        graph: PathBuf,
        #[command(flatten)]
        s0: Opinions,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        dt: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample the jump process: one event log, or a replicate batch with --reps > 1.
    SimulateSto {
        graph: PathBuf,
        #[command(flatten)]
        s0: Opinions,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run both models on one graph and compare variances.
    Compare {
        graph: PathBuf,
        #[command(flatten)]
        s0: Opinions,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a graph that drives the opinions to a target consensus.
    Steer {
        #[arg(long, allow_hyphen_values = true)]
        s0: String,
        #[arg(long, allow_hyphen_values = true)]
        target: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a named scenario: ring N K, bridged-clusters M,
    /// battle [W H B L], fan-in.
    Scenario {
        name: String,
        params: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_graph(path: &Path) -> Result<WeightedDigraph> {
    parse_graph(&fs::read_to_string(path)?)
}

fn parse_opinions(text: &str) -> Result<Vec<f64>> {
    if Path::new(text).is_file() {
        return Ok(serde_json::from_str(&fs::read_to_string(text)?)?);
    }
    text.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad opinion value {x:?}"))))
        .collect()
}

fn read_opinions(arg: &Option<String>, n: usize, seed: u64) -> Result<Vec<f64>> {
    let Some(text) = arg else {
        return Ok(uniform_opinions(n, seed));
    };
    let values = parse_opinions(text)?;
    if values.len() != n {
        return Err(Error::Dimension { expected: n, actual: values.len() });
    }
    Ok(values)
}

/// Writes to `dir/name`, or to stdout when there is no output directory.
fn emit(out: &Option<PathBuf>, name: &str, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn emit_json(out: &Option<PathBuf>, name: &str, value: &serde_json::Value) -> Result<()> {
    emit(out, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn analysis(g: &WeightedDigraph) -> Result<serde_json::Value> {
    let l = LaplacianMatrix::from_graph(g)?;
    let spec = spectrum(&l)?;
    let d = decompose(g);
    let blocks: Vec<_> = d
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
        "n_edges": g.n_edges(),
        "graph_hash": laplacian_hash(&l),
        "connectivity": g.connectivity_kind(),
        "symmetric": g.is_symmetric(),
        "balanced": g.is_balanced(),
        "blocks": blocks,
        "n_isolated": d.n_isolated(),
        "predicts_consensus": predicts_unconditional_consensus(&d),
        "spectrum": spec.report(),
    }))
}

fn scenario(name: &str, params: &[usize], seed: u64) -> Result<Scenario> {
    let arity = |k: usize| {
        if params.len() == k {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("scenario {name} takes {k} parameters, got {}", params.len())))
        }
    };
    let random = |name: &str, g: WeightedDigraph| {
        let n = g.n_nodes();
        Scenario::new(name, g, uniform_opinions(n, seed))
    };
    match name {
        "ring" => {
            arity(2)?;
            random(name, make_ring(params[0], params[1])?)
        }
        "bridged-clusters" => {
            arity(1)?;
            random(name, make_bridged_clusters(params[0])?)
        }
        "battle" => {
            let p = match params {
                [] => BattleParams::default(),
                &[core_w, core_h, block_size, links_per_side] => {
                    BattleParams { core_w, core_h, block_size, links_per_side }
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "scenario battle takes 0 or 4 parameters, got {}",
                        params.len()
                    )))
                }
            };
            make_battle(p, seed)
        }
        "fan-in" => {
            arity(0)?;
            Scenario::new(name, make_fan_in(), vec![1.0, -1.0, 0.0])
        }
        _ => Err(Error::InvalidInput(format!(
            "unknown scenario {name:?}; expected ring, bridged-clusters, battle or fan-in"
        ))),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { graph, out } => {
            let g = read_graph(&graph)?;
            emit_json(&out, "analysis.json", &analysis(&g)?)
        }
        Command::SimulateDet { graph, s0, t_end, dt, common } => {
            let g = read_graph(&graph)?;
            let s0 = read_opinions(&s0.s0, g.n_nodes(), common.seed)?;
            let l = LaplacianMatrix::from_graph(&g)?;
            let traj = integrate(&l, &s0, t_end, dt.unwrap_or_else(|| default_dt(&l)))?;
            if let Some(w) = &traj.meta.warning {
                eprintln!("warning: {w}");
            }
            match common.format {
                Format::Csv => {
                    emit(&common.out, "trajectory.csv", |w| traj.write_csv(w))?;
                    if common.out.is_some() {
                        emit_json(&common.out, "trajectory.meta.json", &json!(traj.meta))?;
                        emit(&common.out, "variance.csv", |w| traj.write_variance_csv(w))?;
                    }
                    Ok(())
                }
                Format::Json => emit_json(
                    &common.out,
                    "trajectory.json",
                    &json!({ "meta": traj.meta, "t": traj.times, "s": traj.states, "v": traj.variances() }),
                ),
            }
        }
        Command::SimulateSto { graph, s0, t_end, reps, grid_points, common } => {
            let g = read_graph(&graph)?;
            let s0 = read_opinions(&s0.s0, g.n_nodes(), common.seed)?;
            if reps <= 1 {
                let run = simulate(&g, &s0, t_end, common.seed)?;
                match common.format {
                    Format::Csv => {
                        emit(&common.out, "events.csv", |w| run.write_events_csv(w))?;
                        if common.out.is_some() {
                            let initial = json!({
                                "seed": common.seed,
                                "initial": run.initial,
                                "final": run.final_state,
                                "absorbed_at": run.absorbed_at,
                                "frozen_at": run.frozen_at,
                                "t_end": run.t_end,
                            });
                            emit_json(&common.out, "initial.json", &initial)?;
                        }
                        Ok(())
                    }
                    Format::Json => emit_json(&common.out, "run.json", &json!(run)),
                }
            } else {
                if grid_points < 2 {
                    return Err(Error::InvalidInput("grid-points must be at least 2".into()));
                }
                let grid: Vec<f64> = (0..grid_points).map(|k| t_end * k as f64 / (grid_points - 1) as f64).collect();
                let batch = monte_carlo(&g, &s0, &grid, reps, common.seed)?;
                match common.format {
                    Format::Csv => emit(&common.out, "batch.csv", |w| batch.write_csv(w)),
                    Format::Json => emit_json(&common.out, "batch.json", &json!(batch)),
                }
            }
        }
        Command::Compare { graph, s0, t_end, dt, reps, grid_points, seed, out } => {
            let g = read_graph(&graph)?;
            let s0 = read_opinions(&s0.s0, g.n_nodes(), seed)?;
            let config = ExperimentConfig {
                scenario: ScenarioSpec::File { path: graph.display().to_string() },
                model: Model::Both,
                seed,
                t_end,
                dt,
                reps,
                grid_points,
                s0: Some(s0),
            };
            let summary = run_experiment(&config, &out)?;
            emit_json(&None, "", &json!(summary))
        }
        Command::Steer { s0, target, out } => {
            let s0 = parse_opinions(&s0)?;
            let plan = steer(&s0, target)?;
            let l = LaplacianMatrix::from_graph(&plan.graph)?;
            let spec = spectrum(&l)?;
            let report = SteeringReport {
                alpha: plan.alpha,
                beta: plan.beta,
                max_node: plan.max_node,
                min_node: plan.min_node,
                target,
                predicted_limit: predict_limit(&spec, &s0)?,
                lambda2: spec.lambda2,
            };
            match out {
                Some(_) => {
                    emit(&out, "steered.edges", |w| Ok(w.write_all(plan.graph.to_edge_list().as_bytes())?))?;
                    emit_json(&out, "steer.json", &json!(report))
                }
                None => emit_json(&None, "", &json!({ "report": report, "edges": plan.graph.to_edge_list() })),
            }
        }
        Command::Scenario { name, params, common } => {
            let sc = scenario(&name, &params, common.seed)?;
            match common.format {
                Format::Csv => {
                    emit(&common.out, "graph.edges", |w| Ok(w.write_all(sc.graph.to_edge_list().as_bytes())?))?;
                    if common.out.is_some() {
                        emit_json(&common.out, "s0.json", &json!(sc.s0))?;
                    }
                    Ok(())
                }
                Format::Json => emit_json(
                    &common.out,
                    "scenario.json",
                    &json!({
                        "name": sc.name,
                        "graph": serde_json::from_str::<serde_json::Value>(&sc.graph.to_json())?,
                        "s0": sc.s0,
                        "analysis": analysis(&sc.graph)?,
                    }),
                ),
            }
        }
        Command::Run { config, out } => {
            let config = ExperimentConfig::from_json(&fs::read_to_string(config)?)?;
            let summary = run_experiment(&config, &out)?;
            emit_json(&None, "", &json!(summary))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
