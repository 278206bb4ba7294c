//! The stochastic consensus model: agent `i` adopts agent `j`'s opinion at
//! rate `a_ij`.
//!
//! Opinions are only ever copied, so internally a state is a vector of
//! indices into the distinct initial values. That makes consensus and
//! freezing checks exact.

mod exact;
mod monte_carlo;

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

pub use exact::{exact_chain, exact_chain_with, AbsorptionOutcome, ChainSolver, ExactChain, STATE_BUDGET};
pub use monte_carlo::{monte_carlo, BatchTable, ReplicateBatch};

/// RNG stream for one replicate: ChaCha8 keyed by the master seed, with
/// the replicate index as stream id.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// At time `t`, agent `i` adopted the opinion of agent `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpTrajectory {
    pub events: Vec<JumpEvent>,
    pub initial: Vec<f64>,
    #[serde(rename = "final")]
    pub final_state: Vec<f64>,
    /// First time all opinions agree.
    pub absorbed_at: Option<f64>,
    /// First time no event can change the state. Event generation stops here.
    pub frozen_at: Option<f64>,
    pub t_end: f64,
}

impl JumpTrajectory {
    /// Opinions just after all events with time `<= t`.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let mut s = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.t <= t) {
            s[e.i] = s[e.j];
        }
        s
    }

    /// Number of events that changed some opinion.
    pub fn effective_events(&self) -> usize {
        let mut s = self.initial.clone();
        let mut count = 0;
        for e in &self.events {
            if s[e.i] != s[e.j] {
                count += 1;
                s[e.i] = s[e.j];
            }
        }
        count
    }

    /// Event log as CSV `t,i,j`.
    pub fn write_events_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "i", "j"])?;
        for e in &self.events {
            out.write_record([e.t.to_string(), e.i.to_string(), e.j.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_events_csv<R: Read>(r: R) -> Result<Vec<JumpEvent>> {
        let mut reader = csv::Reader::from_reader(r);
        let mut events = Vec::new();
        for rec in reader.deserialize() {
            events.push(rec?);
        }
        Ok(events)
    }
}

/// Distinct opinion values and each agent's index into them.
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub values: Vec<f64>,
    pub labels: Vec<u32>,
}

impl Encoded {
    pub fn new(s0: &[f64]) -> Result<Self> {
        if let Some(x) = s0.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite opinion {x}")));
        }
        let mut values: Vec<f64> = Vec::new();
        let labels = s0
            .iter()
            .map(|&x| {
                let k = values.iter().position(|&v| v == x).unwrap_or_else(|| {
                    values.push(x);
                    values.len() - 1
                });
                k as u32
            })
            .collect();
        Ok(Self { values, labels })
    }

    pub fn decode(&self, labels: &[u32]) -> Vec<f64> {
        labels.iter().map(|&k| self.values[k as usize]).collect()
    }
}

/// Sampler for the jump process on a fixed graph.
pub(crate) struct JumpEngine<'g> {
    g: &'g WeightedDigraph,
    picker: Option<WeightedIndex<f64>>,
    clock: Option<Exp<f64>>,
    /// Edge indices touching each node.
    incident: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunOutcome {
    pub absorbed_at: Option<f64>,
    pub frozen_at: Option<f64>,
}

impl<'g> JumpEngine<'g> {
    pub fn new(g: &'g WeightedDigraph) -> Self {
        let rates: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
        let total = g.total_rate();
        let picker = (!rates.is_empty()).then(|| WeightedIndex::new(&rates).expect("positive rates"));
        let clock = (total > 0.0).then(|| Exp::new(total).expect("positive total rate"));
        let mut incident = vec![Vec::new(); g.n_nodes()];
        for (k, e) in g.edges().iter().enumerate() {
            incident[e.target].push(k);
            incident[e.source].push(k);
        }
        Self { g, picker, clock, incident }
    }

    fn discordant(&self, labels: &[u32], k: usize) -> bool {
        let e = &self.g.edges()[k];
        labels[e.target] != labels[e.source]
    }

    /// Runs the chain on `labels` up to `t_end`, calling `on_event(t, i, j)`
    /// before each jump is applied. Stops early once frozen.
    pub fn run<R: Rng + ?Sized>(
        &self,
        labels: &mut [u32],
        n_values: usize,
        t_end: f64,
        rng: &mut R,
        mut on_event: impl FnMut(f64, usize, usize, &[u32]),
    ) -> RunOutcome {
        let n = labels.len();
        let mut counts = vec![0usize; n_values];
        for &k in labels.iter() {
            counts[k as usize] += 1;
        }
        let mut outcome = RunOutcome::default();
        if counts.contains(&n) {
            outcome.absorbed_at = Some(0.0);
        }
        let mut discordant = (0..self.g.n_edges()).filter(|&k| self.discordant(labels, k)).count();
        if discordant == 0 {
            outcome.frozen_at = Some(0.0);
            return outcome;
        }
        let (picker, clock) = match (&self.picker, &self.clock) {
            (Some(p), Some(c)) => (p, c),
            _ => unreachable!("a discordant edge implies a positive rate"),
        };

        let mut t = 0.0;
        loop {
            t += clock.sample(rng);
            if t > t_end {
                break;
            }
            let k = picker.sample(rng);
            let e = &self.g.edges()[k];
            let (i, j) = (e.target, e.source);
            on_event(t, i, j, labels);
            let (old, new) = (labels[i], labels[j]);
            if old == new {
                continue;
            }
            for &m in &self.incident[i] {
                discordant -= usize::from(self.discordant(labels, m));
            }
            labels[i] = new;
            for &m in &self.incident[i] {
                discordant += usize::from(self.discordant(labels, m));
            }
            counts[old as usize] -= 1;
            counts[new as usize] += 1;
            if counts[new as usize] == n && outcome.absorbed_at.is_none() {
                outcome.absorbed_at = Some(t);
            }
            if discordant == 0 {
                outcome.frozen_at = Some(t);
                break;
            }
        }
        outcome
    }
}

fn check_dims(g: &WeightedDigraph, s0: &[f64]) -> Result<()> {
    if s0.len() != g.n_nodes() {
        return Err(Error::Dimension { expected: g.n_nodes(), actual: s0.len() });
    }
    Ok(())
}

/// Exact event-driven simulation (Gillespie) up to `t_end`.
///
/// Every event of the chain is logged, including those between agents that
/// already agree, until the state freezes.
pub fn simulate(g: &WeightedDigraph, s0: &[f64], t_end: f64, seed: u64) -> Result<JumpTrajectory> {
    check_dims(g, s0)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    let enc = Encoded::new(s0)?;
    let mut labels = enc.labels.clone();
    let mut events = Vec::new();
    let mut rng = replicate_rng(seed, 0);
    let outcome = JumpEngine::new(g).run(&mut labels, enc.values.len(), t_end, &mut rng, |t, i, j, _| {
        events.push(JumpEvent { t, i, j })
    });
    Ok(JumpTrajectory {
        events,
        initial: s0.to_vec(),
        final_state: enc.decode(&labels),
        absorbed_at: outcome.absorbed_at,
        frozen_at: outcome.frozen_at,
        t_end,
    })
}

/// The embedded jump chain: `max_steps` transitions with `p_ij = a_ij / sigma`.
///
/// Returns `max_steps + 1` states starting with `s0`.
pub fn simulate_embedded(g: &WeightedDigraph, s0: &[f64], max_steps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_dims(g, s0)?;
    let mut rng = replicate_rng(seed, 0);
    let mut s = s0.to_vec();
    let mut out = Vec::with_capacity(max_steps + 1);
    out.push(s.clone());
    if g.n_edges() == 0 {
        out.resize(max_steps + 1, s);
        return Ok(out);
    }
    let rates: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    let picker = WeightedIndex::new(&rates).expect("positive rates");
    for _ in 0..max_steps {
        let e = &g.edges()[rng.sample(&picker)];
        s[e.target] = s[e.source];
        out.push(s.clone());
    }
    Ok(out)
}
