//! Continuous-time quantum walk on the hypercube with a diagonal problem
//! Hamiltonian, `H = -gamma * sum_j X_j + diag`.
//!
//! The walk starts in the uniform superposition. States are advanced with a
//! Chebyshev expansion of the propagator, which is exact to double precision
//! for any step length, so `dt` only sets the spacing of the recorded samples.

mod bessel;
mod cheb;
mod kernel;

use std::io::Write;
use std::path::Path;

pub use bessel::{bessel_j_run, bessel_j_truncated};
pub use cheb::{Bounds, Propagator};
pub use kernel::{CVec, Hop};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub const MAX_QUBITS: usize = 21;
pub const NORM_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkParams {
    pub gamma: f64,
    pub t_start: f64,
    pub t_window: f64,
    /// Spacing of the recorded samples.
    pub dt: f64,
    pub n_qubits: usize,
    pub exec: Execution,
}

impl WalkParams {
    pub fn new(gamma: f64, n_qubits: usize) -> Self {
        WalkParams {
            gamma,
            t_start: 30.0,
            t_window: 70.0,
            dt: 0.1,
            n_qubits,
            exec: Execution::default(),
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_window(mut self, t_start: f64, t_window: f64) -> Self {
        self.t_start = t_start;
        self.t_window = t_window;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    fn sample_count(&self) -> Result<usize> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.t_window > 0.0) || !(self.t_start >= 0.0) {
            return Err(Error::invalid("window needs t_start >= 0 and t_window > 0"));
        }
        if !(self.dt > 0.0) || self.dt > self.t_window / 100.0 + 1e-15 {
            return Err(Error::invalid(format!(
                "dt = {} must lie in (0, t_window/100]",
                self.dt
            )));
        }
        let steps = (self.t_window / self.dt).round();
        if ((steps * self.dt) - self.t_window).abs() > 1e-9 * self.t_window {
            return Err(Error::invalid("t_window must be a whole number of dt steps"));
        }
        Ok(steps as usize + 1)
    }
}

/// Per-basis-state probability that a measurement counts as a success.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessWeights {
    pub weights: Vec<f64>,
}

impl SuccessWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::invalid(format!("success weight {w} outside [0, 1]")));
        }
        Ok(SuccessWeights { weights })
    }

    pub fn indicator(len: usize, state: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[state] = 1.0;
        SuccessWeights { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Success probability under a uniformly random measurement outcome.
    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkTrajectory {
    pub gamma: f64,
    pub t_start: f64,
    pub t_window: f64,
    pub times: Vec<f64>,
    pub probs: Vec<f64>,
    pub avg: f64,
    pub norm_drift: f64,
}

impl WalkTrajectory {
    /// Trajectory from externally produced samples.
    pub fn from_samples(times: Vec<f64>, probs: Vec<f64>, t_start: f64, t_window: f64) -> Result<Self> {
        if times.len() != probs.len() || times.len() < 2 {
            return Err(Error::invalid("need at least two matching samples"));
        }
        let avg = trapezoid_average(&times, &probs, t_start, t_start + t_window)?;
        Ok(WalkTrajectory {
            gamma: f64::NAN,
            t_start,
            t_window,
            times,
            probs,
            avg,
            norm_drift: 0.0,
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("t,P\n");
        for (t, p) in self.times.iter().zip(&self.probs) {
            out.push_str(&format!("{t},{p}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Mean of the sampled curve over `[t0, t1]` by the composite trapezoid rule.
/// Window ends that fall between samples are linearly interpolated.
pub fn trapezoid_average(times: &[f64], probs: &[f64], t0: f64, t1: f64) -> Result<f64> {
    let eps = 1e-9 * (1.0 + t1.abs());
    if times.is_empty() || !(t1 > t0) || times[0] > t0 + eps || *times.last().unwrap() < t1 - eps {
        return Err(Error::invalid(format!(
            "window [{t0}, {t1}] not covered by the samples"
        )));
    }
    let at = |t: f64| -> f64 {
        let i = times.partition_point(|&x| x < t);
        if i == 0 {
            return probs[0];
        }
        if i >= times.len() {
            return probs[times.len() - 1];
        }
        let (xa, xb) = (times[i - 1], times[i]);
        probs[i - 1] + (probs[i] - probs[i - 1]) * (t - xa) / (xb - xa)
    };
    let mut pts: Vec<(f64, f64)> = vec![(t0, at(t0))];
    for (&t, &p) in times.iter().zip(probs) {
        if t > t0 + eps && t < t1 - eps {
            pts.push((t, p));
        }
    }
    pts.push((t1, at(t1)));
    let area: f64 = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    Ok(area / (t1 - t0))
}

pub fn average_success(traj: &WalkTrajectory) -> Result<f64> {
    trapezoid_average(&traj.times, &traj.probs, traj.t_start, traj.t_start + traj.t_window)
}

fn check_inputs(diag: &[f64], params: &WalkParams, weights: &[&[f64]]) -> Result<usize> {
    let len = diag.len();
    if !len.is_power_of_two() || len < 2 {
        return Err(Error::invalid(format!("diagonal length {len} is not 2^m, m >= 1")));
    }
    let m = len.trailing_zeros() as usize;
    if m > MAX_QUBITS {
        return Err(Error::Capability(format!(
            "walk supports at most {MAX_QUBITS} qubits, got {m}"
        )));
    }
    if params.n_qubits != m {
        return Err(Error::invalid(format!(
            "params declare {} qubits, diagonal has {m}",
            params.n_qubits
        )));
    }
    for w in weights {
        if w.len() != len {
            return Err(Error::invalid(format!(
                "weights length {} != diagonal length {len}",
                w.len()
            )));
        }
    }
    if diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("diagonal has non-finite entries"));
    }
    Ok(m)
}

/// Blocks of samples per Chebyshev run considered for dense output.
const MAX_BLOCK: usize = 16;
/// Drift above this with estimated spectral bounds triggers a rerun with
/// rigorous ones.
const RETRY_DRIFT: f64 = 1e-10;

enum Plan {
    Dense { block: usize },
    Support(Vec<usize>),
}

fn plan(prop: &Propagator, m: usize, params: &WalkParams, samples: usize, weights: &[&[f64]]) -> Plan {
    let len = 1usize << m;
    let apply = (len * (m + 2)) as f64;
    let axpy = len as f64;
    let steps = samples - 1;
    let dt = params.dt;
    let mut best = (f64::INFINITY, 1usize);
    let max_block = MAX_BLOCK.min(((1usize << 24) / len).max(1)).min(steps.max(1));
    for b in 1..=max_block {
        let terms = prop.terms(b as f64 * dt) as f64;
        let cost = steps.div_ceil(b) as f64 * terms * 2.0 * (apply + b as f64 * axpy);
        if cost < best.0 {
            best = (cost, b);
        }
    }
    let start = 2.0 * prop.terms(params.t_start) as f64 * (apply + axpy);
    let support: Vec<usize> = (0..len).filter(|&z| weights.iter().any(|w| w[z] != 0.0)).collect();
    let terms = prop.terms(params.t_start + params.t_window) as f64;
    if support.len() as f64 * terms <= (1u64 << 23) as f64 {
        let cost = terms * (apply + 4.0 * axpy) + terms * 2.0 * (samples * support.len()) as f64;
        if cost < best.0 + start {
            return Plan::Support(support);
        }
    }
    Plan::Dense { block: best.1 }
}

struct Raw {
    probs: Vec<Vec<f64>>,
    drift: f64,
}

fn run(prop: &Propagator, m: usize, params: &WalkParams, samples: usize, weights: &[&[f64]]) -> Raw {
    let exec = params.exec;
    let psi0 = CVec::uniform(1 << m);
    let mut probs: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); weights.len()];
    let norm_err = |s: &CVec| (s.norm_sqr(exec).sqrt() - 1.0).abs();
    let mut drift = 0.0f64;
    match plan(prop, m, params, samples, weights) {
        Plan::Support(support) => {
            let times: Vec<f64> = (0..samples).map(|j| params.t_start + j as f64 * params.dt).collect();
            let keep = [params.t_start, params.t_start + params.t_window];
            let (amps, full) = prop.propagate_support_real(&psi0.re, &times, &support, &keep);
            for s in &full {
                drift = drift.max(norm_err(s));
            }
            for (p, w) in probs.iter_mut().zip(weights) {
                for a in &amps {
                    let v: f64 = support
                        .iter()
                        .enumerate()
                        .map(|(s, &z)| w[z] * (a.re[s] * a.re[s] + a.im[s] * a.im[s]))
                        .sum();
                    p.push(v);
                }
            }
        }
        Plan::Dense { block } => {
            let mut psi = prop.propagate(&psi0, params.t_start);
            drift = norm_err(&psi);
            for (p, w) in probs.iter_mut().zip(weights) {
                p.push(psi.weighted_prob(exec, w));
            }
            let mut j = 0;
            while j + 1 < samples {
                let b = block.min(samples - 1 - j);
                let taus: Vec<f64> = (1..=b).map(|i| i as f64 * params.dt).collect();
                let states = prop.propagate_many(&psi, &taus);
                for s in &states {
                    drift = drift.max(norm_err(s));
                    for (p, w) in probs.iter_mut().zip(weights) {
                        p.push(s.weighted_prob(exec, w));
                    }
                }
                psi = states.into_iter().last().expect("block is nonempty");
                j += b;
            }
        }
    }
    Raw { probs, drift }
}

/// Evolve once and score the trajectory against each weight vector.
pub fn evolve_multi(diag: &[f64], params: &WalkParams, weights: &[&[f64]]) -> Result<Vec<WalkTrajectory>> {
    let m = check_inputs(diag, params, weights)?;
    let samples = params.sample_count()?;
    let prop = Propagator::new(diag, params.gamma, params.exec);
    let mut raw = run(&prop, m, params, samples, weights);
    if raw.drift > RETRY_DRIFT {
        let safe = Propagator::with_bounds(diag, params.gamma, params.exec, Bounds::Rigorous);
        raw = run(&safe, m, params, samples, weights);
    }
    let Raw { probs, drift } = raw;
    if drift > NORM_LIMIT {
        return Err(Error::IntegrationFailure {
            drift,
            limit: NORM_LIMIT,
            dt: params.dt,
        });
    }
    let times: Vec<f64> = (0..samples).map(|j| params.t_start + j as f64 * params.dt).collect();
    probs
        .into_iter()
        .map(|mut p| {
            for v in p.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            let avg = trapezoid_average(&times, &p, params.t_start, params.t_start + params.t_window)?;
            Ok(WalkTrajectory {
                gamma: params.gamma,
                t_start: params.t_start,
                t_window: params.t_window,
                times: times.clone(),
                probs: p,
                avg,
                norm_drift: drift,
            })
        })
        .collect()
}

pub fn evolve(diag: &[f64], params: &WalkParams, weights: &SuccessWeights) -> Result<WalkTrajectory> {
    let mut v = evolve_multi(diag, params, &[&weights.weights])?;
    Ok(v.pop().expect("one trajectory per weight vector"))
}

/// `exp(-i H t) psi` for the walk Hamiltonian at hopping rate `gamma`.
pub fn propagate(diag: &[f64], gamma: f64, psi: &CVec, t: f64, exec: Execution) -> CVec {
    Propagator::new(diag, gamma, exec).propagate(psi, t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaSweep {
    pub gammas: Vec<f64>,
    pub values: Vec<f64>,
    /// Extra points evaluated by the golden-section refinement.
    pub refined: Vec<(f64, f64)>,
    pub gamma_opt: f64,
    pub value_opt: f64,
}

pub const GOLDEN_TOL: f64 = 1e-3;

fn golden_refine(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Vec<(f64, f64)>> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut seen = vec![(c, fc), (d, fd)];
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
            seen.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
            seen.push((d, fd));
        }
    }
    Ok(seen)
}

fn best_point(points: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    points.fold((f64::NAN, f64::NEG_INFINITY), |best, (g, v)| {
        if v > best.1 || (v == best.1 && g < best.0) {
            (g, v)
        } else {
            best
        }
    })
}

/// Average success over a gamma grid for several weight vectors sharing one
/// trajectory per grid point, each refined separately around its argmax.
pub fn sweep_gamma_multi(
    diag: &[f64],
    weights: &[&[f64]],
    grid: &[f64],
    params: &WalkParams,
) -> Result<Vec<GammaSweep>> {
    sweep_gamma_multi_with(diag, weights, grid, params, true)
}

/// As [`sweep_gamma_multi`]; `refine = false` keeps the grid argmax.
pub fn sweep_gamma_multi_with(
    diag: &[f64],
    weights: &[&[f64]],
    grid: &[f64],
    params: &WalkParams,
    refine: bool,
) -> Result<Vec<GammaSweep>> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("gamma grid must be nonempty and strictly increasing"));
    }
    let inner = params.with_exec(Execution::Sequential);
    let evals: Vec<Vec<f64>> = par::try_map_range(params.exec, grid.len(), |i| {
        evolve_multi(diag, &inner.with_gamma(grid[i]), weights)
            .map(|ts| ts.into_iter().map(|t| t.avg).collect::<Vec<f64>>())
    })?;
    let per_weight = |w: usize| -> Result<GammaSweep> {
        let values: Vec<f64> = evals.iter().map(|e| e[w]).collect();
        let (mut gamma_opt, mut value_opt) = best_point(grid.iter().copied().zip(values.iter().copied()));
        let mut refined = Vec::new();
        if refine && grid.len() > 1 {
            let i = grid.iter().position(|&g| g == gamma_opt).expect("argmax on grid");
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(grid.len() - 1)];
            let one = [weights[w]];
            let mut f = |g: f64| -> Result<f64> {
                Ok(evolve_multi(diag, &params.with_gamma(g), &one)?[0].avg)
            };
            refined = golden_refine(&mut f, lo, hi, GOLDEN_TOL)?;
            (gamma_opt, value_opt) =
                best_point(std::iter::once((gamma_opt, value_opt)).chain(refined.iter().copied()));
        }
        Ok(GammaSweep {
            gammas: grid.to_vec(),
            values,
            refined,
            gamma_opt,
            value_opt,
        })
    };
    (0..weights.len()).map(per_weight).collect()
}

pub fn sweep_gamma(
    diag: &[f64],
    weights: &SuccessWeights,
    grid: &[f64],
    params: &WalkParams,
) -> Result<GammaSweep> {
    let mut v = sweep_gamma_multi(diag, &[&weights.weights], grid, params)?;
    Ok(v.pop().expect("one sweep per weight vector"))
}

/// `start, start + step, ...` up to `end` inclusive, free of accumulated drift.
pub fn linspace_step(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
}
