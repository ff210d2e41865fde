//! Chebyshev expansion of `exp(-i H t)` for `H = D - gamma * sum_j X_j`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::bessel::{bessel_j_run, bessel_j_truncated};
use super::kernel::{axpy_real, chunked_sum, CVec, Hop};
use crate::par::Execution;

const LANCZOS_STEPS: usize = 80;
/// Relative widening of a Lanczos spectral estimate.
const LANCZOS_SLACK: f64 = 0.01;

/// Interval containing the spectrum of `H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bounds {
    /// `[min D - gamma m, max D + gamma m]`, always valid.
    Rigorous,
    /// Extreme Ritz values widened by their residual and a relative slack.
    Lanczos,
}

fn rigorous(diag: &[f64], gamma: f64, m: usize) -> (f64, f64) {
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let spread = gamma.abs() * m as f64;
    (lo - spread, hi + spread)
}

fn lanczos(diag: &[f64], gamma: f64, m: usize, exec: Execution) -> (f64, f64) {
    let n = diag.len();
    let h = Hop { m, diag, g: gamma };
    let dot = |a: &[f64], b: &[f64]| chunked_sum(exec, n, |lo, hi| (lo..hi).map(|i| a[i] * b[i]).sum());
    // fixed pseudo-random start so bounds are reproducible
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let x = crate::par::mix_seed(0x5eed, i as u64);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let nv = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = vec![0.0; n];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let scale = rigorous(diag, gamma, m);
    let scale = (scale.1 - scale.0).abs().max(1e-300);
    for it in 0..LANCZOS_STEPS.min(n) {
        let mut w = vec![0.0; n];
        h.apply_real(exec, &v, &mut w, 0.0);
        let a = dot(&w, &v);
        let b = if it > 0 { beta[it - 1] } else { 0.0 };
        for i in 0..n {
            w[i] -= a * v[i] + b * prev[i];
        }
        let nb = dot(&w, &w).sqrt();
        alpha.push(a);
        beta.push(nb);
        if nb < 1e-10 * scale {
            break;
        }
        w.iter_mut().for_each(|x| *x /= nb);
        prev = std::mem::replace(&mut v, w);
    }
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let last = beta[k - 1];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &theta) in eig.eigenvalues.iter().enumerate() {
        let resid = (last * eig.eigenvectors[(k - 1, i)]).abs();
        lo = lo.min(theta - resid);
        hi = hi.max(theta + resid);
    }
    let pad = LANCZOS_SLACK * (hi - lo);
    (lo - pad, hi + pad)
}

/// `H` rescaled to `(H - center) / half`, whose spectrum lies in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Propagator {
    m: usize,
    gamma: f64,
    exec: Execution,
    center: f64,
    half: f64,
    diag: Vec<f64>,
    scaled: Vec<f64>,
    scaled2: Vec<f64>,
}

impl Propagator {
    /// Propagator with Lanczos spectral bounds, falling back to the rigorous
    /// interval for tiny registers or a static walk.
    pub fn new(diag: &[f64], gamma: f64, exec: Execution) -> Self {
        Self::with_bounds(diag, gamma, exec, Bounds::Lanczos)
    }

    pub fn with_bounds(diag: &[f64], gamma: f64, exec: Execution, bounds: Bounds) -> Self {
        let m = diag.len().trailing_zeros() as usize;
        debug_assert_eq!(diag.len(), 1 << m);
        let safe = rigorous(diag, gamma, m);
        let (lo, hi) = if bounds == Bounds::Lanczos && m > 8 && gamma != 0.0 {
            let (a, b) = lanczos(diag, gamma, m, exec);
            (a.max(safe.0), b.min(safe.1))
        } else {
            safe
        };
        let center = 0.5 * (lo + hi);
        // a little slack keeps rounding from pushing eigenvalues past +-1
        let half = (0.5 * (hi - lo) * (1.0 + 1e-6)).max(1e-9 * (1.0 + center.abs()));
        let scaled: Vec<f64> = diag.iter().map(|d| (d - center) / half).collect();
        let scaled2 = scaled.iter().map(|d| 2.0 * d).collect();
        Propagator {
            m,
            gamma,
            exec,
            center,
            half,
            diag: diag.to_vec(),
            scaled,
            scaled2,
        }
    }

    pub fn qubits(&self) -> usize {
        self.m
    }

    pub fn half_width(&self) -> f64 {
        self.half
    }

    /// Expansion length needed for a step of length `tau`.
    pub fn terms(&self, tau: f64) -> usize {
        bessel_j_truncated(self.half * tau.abs()).len()
    }

    /// `<psi|H|psi>` with the unshifted walk Hamiltonian.
    pub fn energy(&self, psi: &CVec) -> f64 {
        let mut out = CVec::zeros(psi.len());
        Hop {
            m: self.m,
            diag: &self.diag,
            g: self.gamma,
        }
        .apply(self.exec, psi, &mut out, 0.0);
        psi.dot(&out).0
    }

    fn hops(&self) -> (Hop<'_>, Hop<'_>) {
        let h1 = Hop {
            m: self.m,
            diag: &self.scaled,
            g: self.gamma / self.half,
        };
        let h2 = Hop {
            m: self.m,
            diag: &self.scaled2,
            g: 2.0 * self.gamma / self.half,
        };
        (h1, h2)
    }

    /// Generate `T_k(Hs) psi` for `k = 0..terms`, handing each to `sink`.
    pub fn chebyshev_run(&self, psi: &CVec, terms: usize, sink: &mut dyn FnMut(usize, &CVec)) {
        let (h1, h2) = self.hops();
        sink(0, psi);
        if terms < 2 {
            return;
        }
        let mut prev = psi.clone();
        let mut cur = CVec::zeros(psi.len());
        h1.apply(self.exec, psi, &mut cur, 0.0);
        sink(1, &cur);
        for k in 2..terms {
            // prev <- 2 Hs cur - prev
            h2.apply(self.exec, &cur, &mut prev, -1.0);
            std::mem::swap(&mut prev, &mut cur);
            sink(k, &cur);
        }
    }

    /// Real-vector version of [`Propagator::chebyshev_run`].
    pub fn chebyshev_run_real(&self, psi: &[f64], terms: usize, sink: &mut dyn FnMut(usize, &[f64])) {
        let (h1, h2) = self.hops();
        sink(0, psi);
        if terms < 2 {
            return;
        }
        let mut prev = psi.to_vec();
        let mut cur = vec![0.0; psi.len()];
        h1.apply_real(self.exec, psi, &mut cur, 0.0);
        sink(1, &cur);
        for k in 2..terms {
            h2.apply_real(self.exec, &cur, &mut prev, -1.0);
            std::mem::swap(&mut prev, &mut cur);
            sink(k, &cur);
        }
    }

    /// Coefficients `c_k` with `exp(-i Hs x) = sum_k c_k T_k(Hs)`, truncated or
    /// padded to `terms`, as (real, imaginary) pairs where one part is zero.
    pub(crate) fn coefficients(x: f64, terms: usize) -> Vec<(f64, f64)> {
        let j = bessel_j_run(x.abs(), terms.saturating_sub(1));
        let s = x.signum();
        j.iter()
            .enumerate()
            .map(|(k, &v)| {
                let w = if k == 0 { v } else { 2.0 * v };
                // (-i s)^k
                match k % 4 {
                    0 => (w, 0.0),
                    1 => (0.0, -s * w),
                    2 => (-w, 0.0),
                    _ => (0.0, s * w),
                }
            })
            .collect()
    }

    /// `exp(-i H t) psi`; negative `t` runs the conjugate dynamics.
    pub fn propagate(&self, psi: &CVec, t: f64) -> CVec {
        if t == 0.0 {
            return psi.clone();
        }
        let terms = self.terms(t);
        let coef = Self::coefficients(self.half * t, terms);
        let mut acc = CVec::zeros(psi.len());
        self.chebyshev_run(psi, terms, &mut |k, phi| axpy(self.exec, coef[k], phi, &mut acc));
        acc.rotate(self.center * t);
        acc
    }

    /// States at `t0 + taus[j]` given the state at `t0`, with `taus` positive
    /// and increasing.
    pub fn propagate_many(&self, psi: &CVec, taus: &[f64]) -> Vec<CVec> {
        let Some(&last) = taus.last() else {
            return Vec::new();
        };
        let terms = self.terms(last);
        let coef: Vec<Vec<(f64, f64)>> = taus
            .iter()
            .map(|&tau| Self::coefficients(self.half * tau, terms))
            .collect();
        let mut acc: Vec<CVec> = taus.iter().map(|_| CVec::zeros(psi.len())).collect();
        self.chebyshev_run(psi, terms, &mut |k, phi| {
            for (a, c) in acc.iter_mut().zip(&coef) {
                axpy(self.exec, c[k], phi, a);
            }
        });
        for (a, &tau) in acc.iter_mut().zip(taus) {
            a.rotate(self.center * tau);
        }
        acc
    }

    /// From a real state at time 0: amplitudes on `support` at each of
    /// `times` (global phase omitted), and the full states at `keep` times.
    pub fn propagate_support_real(
        &self,
        psi: &[f64],
        times: &[f64],
        support: &[usize],
        keep: &[f64],
    ) -> (Vec<CVec>, Vec<CVec>) {
        let horizon = times.iter().chain(keep).fold(0.0f64, |a, &t| a.max(t));
        let terms = self.terms(horizon);
        let mut moments = vec![0.0; terms * support.len()];
        let keep_coef: Vec<Vec<(f64, f64)>> = keep
            .iter()
            .map(|&t| Self::coefficients(self.half * t, terms))
            .collect();
        let mut full: Vec<CVec> = keep.iter().map(|_| CVec::zeros(psi.len())).collect();
        self.chebyshev_run_real(psi, terms, &mut |k, phi| {
            let row = &mut moments[k * support.len()..(k + 1) * support.len()];
            for (r, &z) in row.iter_mut().zip(support) {
                *r = phi[z];
            }
            for (f, c) in full.iter_mut().zip(&keep_coef) {
                axpy_real(self.exec, c[k].0, phi, &mut f.re);
                axpy_real(self.exec, c[k].1, phi, &mut f.im);
            }
        });
        for (f, &t) in full.iter_mut().zip(keep) {
            f.rotate(self.center * t);
        }
        let amps = times
            .iter()
            .map(|&t| {
                let coef = Self::coefficients(self.half * t, terms);
                let mut a = CVec::zeros(support.len());
                for (k, &(cr, ci)) in coef.iter().enumerate() {
                    let row = &moments[k * support.len()..(k + 1) * support.len()];
                    for (s, &mu) in row.iter().enumerate() {
                        a.re[s] += cr * mu;
                        a.im[s] += ci * mu;
                    }
                }
                a
            })
            .collect();
        (amps, full)
    }
}

/// `acc += c * phi` where `c` is purely real or purely imaginary.
fn axpy(exec: Execution, c: (f64, f64), phi: &CVec, acc: &mut CVec) {
    let (cr, ci) = c;
    if ci == 0.0 {
        axpy_real(exec, cr, &phi.re, &mut acc.re);
        axpy_real(exec, cr, &phi.im, &mut acc.im);
    } else {
        axpy_real(exec, -ci, &phi.im, &mut acc.re);
        axpy_real(exec, ci, &phi.re, &mut acc.im);
    }
}
