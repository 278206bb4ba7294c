//! The consensus ODE `ds/dt = -L s`: fixed-step RK4, a closed form for the
//! symmetric case, the empirical variance and a log-linear decay fit.

use std::io::{Read, Write};

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::stats;

/// Stored samples per trajectory, regardless of step count.
pub const MAX_SAMPLES: usize = 10_000;

/// Variance below this is treated as underflow by the decay fit.
pub const VARIANCE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub graph_hash: String,
    pub method: String,
    /// Step actually used (`t_end / steps`).
    pub dt: f64,
    pub steps: usize,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

/// Short content hash of the Laplacian entries.
pub fn laplacian_hash(l: &LaplacianMatrix) -> String {
    let mut h = Sha256::new();
    h.update((l.n() as u64).to_le_bytes());
    for x in l.matrix().iter() {
        h.update(x.to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// `0.1 / max(1, max sigma_i)`.
pub fn default_dt(l: &LaplacianMatrix) -> f64 {
    0.1 / l.max_diagonal().max(1.0)
}

/// Classical RK4 on a uniform grid ending exactly at `t_end`.
///
/// The requested `dt` is shrunk to `t_end / ceil(t_end / dt)`.
pub fn integrate(l: &LaplacianMatrix, s0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    let n = l.n();
    if s0.len() != n {
        return Err(Error::Dimension { expected: n, actual: s0.len() });
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let max_sigma = l.max_diagonal();
    let warning = (max_sigma > 0.0 && dt > 2.0 / max_sigma).then(|| {
        format!("step exceeds stability heuristic: dt = {dt} > 2 / max sigma = {}", 2.0 / max_sigma)
    });
    let stride = steps.div_ceil(MAX_SAMPLES - 2).max(1);

    let mut s = s0.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![s.clone()];
    let mut stepper = Rk4::new(n);
    for k in 1..=steps {
        stepper.step(l, &mut s, h);
        if k % stride == 0 || k == steps {
            times.push(if k == steps { t_end } else { k as f64 * h });
            states.push(s.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        meta: TrajectoryMeta {
            graph_hash: laplacian_hash(l),
            method: "rk4".into(),
            dt: h,
            steps,
            warning,
        },
    })
}

struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n] }
    }

    /// `s <- s + h/6 (k1 + 2 k2 + 2 k3 + k4)` with `k = -L s`.
    fn step(&mut self, l: &LaplacianMatrix, s: &mut [f64], h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        l.apply(s, k1);
        for i in 0..s.len() {
            tmp[i] = s[i] - 0.5 * h * k1[i];
        }
        l.apply(tmp, k2);
        for i in 0..s.len() {
            tmp[i] = s[i] - 0.5 * h * k2[i];
        }
        l.apply(tmp, k3);
        for i in 0..s.len() {
            tmp[i] = s[i] - h * k3[i];
        }
        l.apply(tmp, k4);
        for i in 0..s.len() {
            s[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// RK4 states at each grid time, integrating interval by interval so the
/// samples sit exactly on the grid.
pub fn sample_on_grid(l: &LaplacianMatrix, s0: &[f64], grid: &[f64], dt: f64) -> Result<Vec<Vec<f64>>> {
    if s0.len() != l.n() {
        return Err(Error::Dimension { expected: l.n(), actual: s0.len() });
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.first().is_some_and(|&t| t < 0.0) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("grid must be nondecreasing and start at t >= 0".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut s = s0.to_vec();
    let mut t = 0.0;
    for &tk in grid {
        if tk > t {
            s = integrate(l, &s, tk - t, dt)?.final_state().to_vec();
            t = tk;
        }
        out.push(s.clone());
    }
    Ok(out)
}

/// `e^{-tL} s0` through the eigendecomposition of a symmetric `L`.
pub fn exact_symmetric(l: &LaplacianMatrix, s0: &[f64], t: f64) -> Result<Vec<f64>> {
    if !l.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if s0.len() != l.n() {
        return Err(Error::Dimension { expected: l.n(), actual: s0.len() });
    }
    let se = SymmetricEigen::new(l.matrix().clone());
    Ok(propagate_symmetric(&se, s0, t))
}

pub(crate) fn propagate_symmetric(se: &SymmetricEigen<f64, nalgebra::Dyn>, s0: &[f64], t: f64) -> Vec<f64> {
    let v = &se.eigenvectors;
    let mut coeffs = v.transpose() * DVector::from_column_slice(s0);
    for (c, &lambda) in coeffs.iter_mut().zip(se.eigenvalues.iter()) {
        *c *= (-lambda * t).exp();
    }
    (v * coeffs).iter().copied().collect()
}

/// `(1/N) sum_i (s_i - mean)^2`.
pub fn variance(s: &[f64]) -> f64 {
    let m = stats::mean(s);
    let sq: Vec<f64> = s.iter().map(|x| (x - m) * (x - m)).collect();
    stats::pairwise_sum(&sq) / s.len() as f64
}

/// Largest minus smallest entry.
pub fn spread(s: &[f64]) -> f64 {
    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi - lo
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Positive exponential rate of the variance.
    pub rate: f64,
    /// The variance stopped decreasing over the fit window; `rate` is not a
    /// certified convergence rate.
    pub floor_detected: bool,
    pub points_used: usize,
    pub window_start: f64,
    pub window_end: f64,
}

/// Fits `log v(t)` by least squares over the second half of the usable
/// horizon. Points after the variance first drops to [`VARIANCE_FLOOR`] are
/// discarded.
pub fn fit_log_decay(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    let usable = values.iter().take_while(|&&v| v > VARIANCE_FLOOR).count();
    if usable < 4 {
        return Err(Error::TooFewPoints(usable));
    }
    let (t, v) = (&times[..usable], &values[..usable]);
    let mid = 0.5 * (t[0] + t[usable - 1]);
    let mut start = t.iter().position(|&x| x >= mid).unwrap_or(0);
    start = start.min(usable - 4);
    let (tw, vw) = (&t[start..], &v[start..]);
    let logs: Vec<f64> = vw.iter().map(|x| x.ln()).collect();
    let rate = -stats::slope(tw, &logs);
    let decreasing = vw.windows(2).all(|p| p[1] < p[0]);
    let drop = logs[0] - logs[logs.len() - 1];
    Ok(DecayFit {
        rate,
        floor_detected: !decreasing || drop < 1e-6,
        points_used: tw.len(),
        window_start: tw[0],
        window_end: tw[tw.len() - 1],
    })
}

impl Trajectory {
    pub fn n_nodes(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    pub fn variances(&self) -> Vec<f64> {
        self.states.iter().map(|s| variance(s)).collect()
    }

    pub fn averages(&self) -> Vec<f64> {
        self.states.iter().map(|s| stats::mean(s)).collect()
    }

    pub fn fit_decay_rate(&self) -> Result<DecayFit> {
        fit_log_decay(&self.times, &self.variances())
    }

    /// CSV with header `t,s_0,...,s_{N-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n_nodes()).map(|i| format!("s_{i}")));
        out.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(s.iter().map(f64::to_string));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads back [`Trajectory::write_csv`] output plus its JSON sidecar.
    pub fn read_csv<R: Read>(r: R, meta: TrajectoryMeta) -> Result<Self> {
        let rows = crate::io::read_float_rows(r)?;
        let mut times = Vec::with_capacity(rows.len());
        let mut states = Vec::with_capacity(rows.len());
        for row in rows {
            times.push(row[0]);
            states.push(row[1..].to_vec());
        }
        Ok(Self { times, states, meta })
    }

    /// CSV with header `t,v`.
    pub fn write_variance_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_columns(w, &["t", "v"], &[&self.times, &self.variances()])
    }
}
