//! Hopping-rate heuristic from sampled single-flip energy gaps.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 1000;

/// Half the diagonal-energy difference across one hypercube edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapSample {
    pub zeta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiEstimate {
    pub chi_bar: f64,
    pub err: f64,
    pub n_samples: usize,
}

/// `x / (1 + x)^2` with `x = zeta / gamma`.
pub fn dynamic_coefficient(zeta: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
    }
    if !(zeta >= 0.0) {
        return Err(Error::invalid(format!("zeta must be >= 0, got {zeta}")));
    }
    Ok(chi(zeta / gamma))
}

#[inline]
fn chi(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    x / ((1.0 + x) * (1.0 + x))
}

/// Uniform basis state, then a uniform one of its `m` neighbours.
pub fn sample_gaps<R: Rng + ?Sized>(diag: &[f64], n_samples: usize, rng: &mut R) -> Result<Vec<GapSample>> {
    if n_samples == 0 {
        return Err(Error::invalid("need at least one gap sample"));
    }
    let len = diag.len();
    if !len.is_power_of_two() || len < 2 {
        return Err(Error::invalid(format!("diagonal length {len} is not 2^m, m >= 1")));
    }
    let m = len.trailing_zeros() as usize;
    Ok((0..n_samples)
        .map(|_| {
            let j = rng.random_range(0..len);
            let k = j ^ (1 << rng.random_range(0..m));
            GapSample {
                zeta: 0.5 * (diag[j] - diag[k]).abs(),
            }
        })
        .collect())
}

pub fn chi_bar(samples: &[GapSample], gamma: f64) -> Result<ChiEstimate> {
    if samples.is_empty() {
        return Err(Error::invalid("no gap samples"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
    }
    let n = samples.len();
    let sum: f64 = samples.iter().map(|s| chi(s.zeta / gamma)).sum();
    Ok(ChiEstimate {
        chi_bar: sum / n as f64,
        err: 0.25 / (n as f64).sqrt(),
        n_samples: n,
    })
}

/// `chi_bar` at every grid point from one shared sample set.
pub fn chi_curve(samples: &[GapSample], grid: &[f64]) -> Result<Vec<ChiEstimate>> {
    grid.iter().map(|&g| chi_bar(samples, g)).collect()
}

/// Grid argmax of `chi_bar`, ties toward the smaller gamma.
pub fn gamma_from_samples(samples: &[GapSample], grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("empty gamma grid"));
    }
    let curve = chi_curve(samples, grid)?;
    let mut best = 0;
    for (i, c) in curve.iter().enumerate() {
        if c.chi_bar > curve[best].chi_bar {
            best = i;
        }
    }
    Ok(grid[best])
}

pub fn gamma_heur<R: Rng + ?Sized>(diag: &[f64], grid: &[f64], n_samples: usize, rng: &mut R) -> Result<f64> {
    let samples = sample_gaps(diag, n_samples, rng)?;
    gamma_from_samples(&samples, grid)
}

/// CSV with columns `gamma,chi_bar,err`.
pub fn chi_csv(grid: &[f64], curve: &[ChiEstimate]) -> String {
    let mut out = String::from("gamma,chi_bar,err\n");
    for (g, c) in grid.iter().zip(curve) {
        out.push_str(&format!("{g},{},{}\n", c.chi_bar, c.err));
    }
    out
}
