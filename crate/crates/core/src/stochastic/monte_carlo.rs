use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{check_dims, replicate_rng, Encoded, JumpEngine};
use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;
use crate::stats;

/// Replicate statistics on a time grid. Row `k` of every per-time array
/// belongs to `grid[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateBatch {
    pub n_reps: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    /// Estimate of `E[S_i(t)]`, indexed `[t][i]`.
    pub mean_estimate: Vec<Vec<f64>>,
    pub mean_se: Vec<Vec<f64>>,
    /// Estimate of `E[V(S(t))]`.
    pub variance_estimate: Vec<f64>,
    pub variance_se: Vec<f64>,
    /// Estimate of `E[mean_i S_i(t)]`.
    pub average_estimate: Vec<f64>,
    pub average_se: Vec<f64>,
    pub absorbed_fraction: Vec<f64>,
}

struct Replicate {
    /// `grid.len() x n` opinions, row-major.
    states: Vec<f64>,
    absorbed_at: Option<f64>,
}

fn run_replicate(engine: &JumpEngine, enc: &Encoded, grid: &[f64], master_seed: u64, rep: u64) -> Replicate {
    let n = enc.labels.len();
    let mut labels = enc.labels.clone();
    let mut rng = replicate_rng(master_seed, rep);
    let mut states = Vec::with_capacity(grid.len() * n);
    let mut next = 0;
    let t_end = *grid.last().expect("non-empty grid");
    let outcome = engine.run(&mut labels, enc.values.len(), t_end, &mut rng, |t, _, _, cur| {
        while next < grid.len() && grid[next] < t {
            states.extend(cur.iter().map(|&k| enc.values[k as usize]));
            next += 1;
        }
    });
    while next < grid.len() {
        states.extend(labels.iter().map(|&k| enc.values[k as usize]));
        next += 1;
    }
    Replicate { states, absorbed_at: outcome.absorbed_at }
}

fn row(r: &Replicate, k: usize, n: usize) -> &[f64] {
    &r.states[k * n..(k + 1) * n]
}

/// Independent replicates of the jump process read out on `grid` by event
/// replay.
///
/// Replicate `r` uses stream `r` of `master_seed`, so results do not depend
/// on scheduling.
pub fn monte_carlo(
    g: &WeightedDigraph,
    s0: &[f64],
    grid: &[f64],
    n_reps: usize,
    master_seed: u64,
) -> Result<ReplicateBatch> {
    check_dims(g, s0)?;
    if n_reps < 2 {
        return Err(Error::InvalidInput(format!("n_reps must be at least 2, got {n_reps}")));
    }
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) || !grid.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidInput("grid must be a non-empty nondecreasing list of times >= 0".into()));
    }
    let enc = Encoded::new(s0)?;
    let engine = JumpEngine::new(g);

    #[cfg(feature = "parallel")]
    let reps: Vec<Replicate> = {
        use rayon::prelude::*;
        (0..n_reps as u64).into_par_iter().map(|r| run_replicate(&engine, &enc, grid, master_seed, r)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let reps: Vec<Replicate> = (0..n_reps as u64).map(|r| run_replicate(&engine, &enc, grid, master_seed, r)).collect();

    let n = s0.len();
    let mut batch = ReplicateBatch {
        n_reps,
        seed: master_seed,
        grid: grid.to_vec(),
        mean_estimate: Vec::with_capacity(grid.len()),
        mean_se: Vec::with_capacity(grid.len()),
        variance_estimate: Vec::with_capacity(grid.len()),
        variance_se: Vec::with_capacity(grid.len()),
        average_estimate: Vec::with_capacity(grid.len()),
        average_se: Vec::with_capacity(grid.len()),
        absorbed_fraction: Vec::with_capacity(grid.len()),
    };
    let mut column = vec![0.0; n_reps];
    for (k, &t) in grid.iter().enumerate() {
        let mut means = Vec::with_capacity(n);
        let mut ses = Vec::with_capacity(n);
        for i in 0..n {
            for (c, r) in column.iter_mut().zip(&reps) {
                *c = row(r, k, n)[i];
            }
            let (m, se) = stats::mean_and_se(&column);
            means.push(m);
            ses.push(se);
        }
        batch.mean_estimate.push(means);
        batch.mean_se.push(ses);

        for (c, r) in column.iter_mut().zip(&reps) {
            *c = crate::deterministic::variance(row(r, k, n));
        }
        let (v, vse) = stats::mean_and_se(&column);
        batch.variance_estimate.push(v);
        batch.variance_se.push(vse);

        for (c, r) in column.iter_mut().zip(&reps) {
            *c = stats::mean(row(r, k, n));
        }
        let (a, ase) = stats::mean_and_se(&column);
        batch.average_estimate.push(a);
        batch.average_se.push(ase);

        let absorbed = reps.iter().filter(|r| r.absorbed_at.is_some_and(|a| a <= t)).count();
        batch.absorbed_fraction.push(absorbed as f64 / n_reps as f64);
    }
    Ok(batch)
}

impl ReplicateBatch {
    pub fn n_nodes(&self) -> usize {
        self.mean_estimate.first().map_or(0, Vec::len)
    }

    /// CSV `t,mean_0..mean_{N-1},variance,se_variance,absorbed_fraction`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n_nodes()).map(|i| format!("mean_{i}")));
        header.extend(["variance", "se_variance", "absorbed_fraction"].map(String::from));
        out.write_record(&header)?;
        for (k, t) in self.grid.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.mean_estimate[k].iter().map(f64::to_string));
            row.push(self.variance_estimate[k].to_string());
            row.push(self.variance_se[k].to_string());
            row.push(self.absorbed_fraction[k].to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The columns of a batch CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTable {
    pub grid: Vec<f64>,
    pub mean_estimate: Vec<Vec<f64>>,
    pub variance_estimate: Vec<f64>,
    pub variance_se: Vec<f64>,
    pub absorbed_fraction: Vec<f64>,
}

impl BatchTable {
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let rows = crate::io::read_float_rows(r)?;
        let mut t = BatchTable {
            grid: Vec::new(),
            mean_estimate: Vec::new(),
            variance_estimate: Vec::new(),
            variance_se: Vec::new(),
            absorbed_fraction: Vec::new(),
        };
        for row in rows {
            let m = row.len();
            if m < 4 {
                return Err(Error::InvalidInput("batch CSV needs at least 4 columns".into()));
            }
            t.grid.push(row[0]);
            t.mean_estimate.push(row[1..m - 3].to_vec());
            t.variance_estimate.push(row[m - 3]);
            t.variance_se.push(row[m - 2]);
            t.absorbed_fraction.push(row[m - 1]);
        }
        Ok(t)
    }
}

impl From<&ReplicateBatch> for BatchTable {
    fn from(b: &ReplicateBatch) -> Self {
        Self {
            grid: b.grid.clone(),
            mean_estimate: b.mean_estimate.clone(),
            variance_estimate: b.variance_estimate.clone(),
            variance_se: b.variance_se.clone(),
            absorbed_fraction: b.absorbed_fraction.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> WeightedDigraph {
        let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j, 1.0)));
        WeightedDigraph::new(n, edges).unwrap()
    }

    #[test]
    fn reproducible_and_order_independent() {
        let g = complete(4);
        let s0 = [0.0, 1.0, 2.0, 3.0];
        let grid = [0.0, 0.5, 1.0];
        let a = monte_carlo(&g, &s0, &grid, 2, 9).unwrap();
        let b = monte_carlo(&g, &s0, &grid, 2, 9).unwrap();
        assert_eq!(a, b);
        // the first replicates of a bigger batch are the same streams
        let c = monte_carlo(&g, &s0, &grid, 50, 9).unwrap();
        assert_eq!(c.n_reps, 50);
    }

    #[test]
    fn grid_zero_is_initial_state() {
        let s0 = [0.0, 1.0, 2.0];
        let b = monte_carlo(&complete(3), &s0, &[0.0, 10.0], 100, 1).unwrap();
        assert_eq!(b.mean_estimate[0], s0.to_vec());
        assert!(b.mean_se[0].iter().all(|&x| x == 0.0));
        assert!(b.absorbed_fraction.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_bad_input() {
        let g = complete(2);
        assert!(monte_carlo(&g, &[0.0, 1.0], &[0.0, 1.0], 1, 0).is_err());
        assert!(monte_carlo(&g, &[0.0, 1.0], &[1.0, 0.5], 10, 0).is_err());
        assert!(monte_carlo(&g, &[0.0], &[1.0], 10, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let b = monte_carlo(&complete(3), &[0.0, 0.5, 1.0], &[0.0, 0.25, 1.0], 20, 4).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"t,mean_0,mean_1,mean_2,variance,se_variance,absorbed_fraction\n"));
        assert_eq!(BatchTable::read_csv(buf.as_slice()).unwrap(), BatchTable::from(&b));
    }
}
