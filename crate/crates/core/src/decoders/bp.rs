//! Loopy sum-product on the readout factor graph.
//!
//! Variables are the `n` logical spins. Each coupling qubit contributes a
//! pairwise parity factor and each data qubit a unary bias, both with the same
//! log-likelihood magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lhz::{LhzLayout, PhysicalState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpParams {
    pub llr: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub tol: f64,
}

impl Default for BpParams {
    fn default() -> Self {
        BpParams {
            llr: 2.0,
            max_iters: 50,
            damping: 0.0,
            tol: 1e-9,
        }
    }
}

impl BpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.llr > 0.0 && self.llr.is_finite()) {
            return Err(Error::invalid(format!("llr must be a positive finite number, got {}", self.llr)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("bp needs at least one iteration"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::invalid(format!("damping must lie in [0, 1), got {}", self.damping)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpResult {
    /// Logical bits, qubit `i` at bit `i`.
    pub bits: u32,
    pub iterations: usize,
    pub converged: bool,
}

const SAT: f64 = 1.0 - 1e-15;

/// `2 atanh(tanh(a/2) tanh(b/2))`, saturated to stay finite.
#[inline]
fn boxplus(a: f64, b: f64) -> f64 {
    let t = ((0.5 * a).tanh() * (0.5 * b).tanh()).clamp(-SAT, SAT);
    2.0 * t.atanh()
}

pub fn run(layout: &LhzLayout, z: PhysicalState, params: &BpParams) -> BpResult {
    let n = layout.n();
    let pairs = layout.pairs();
    let couplings = layout.coupling_bits(z);
    let data = layout.data_readout(z).bits();
    let prior: Vec<f64> = (0..n)
        .map(|i| if data >> i & 1 == 0 { params.llr } else { -params.llr })
        .collect();
    let sign: Vec<f64> = (0..pairs.len())
        .map(|q| if couplings >> q & 1 == 0 { 1.0 } else { -1.0 })
        .collect();
    // msg[q] = (to i, to j) for pair q = (i, j)
    let mut msg = vec![(0.0f64, 0.0f64); pairs.len()];
    let mut belief = prior.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        iterations += 1;
        let mut delta: f64 = 0.0;
        let mut next = msg.clone();
        for (q, &(i, j)) in pairs.iter().enumerate() {
            let (old_i, old_j) = msg[q];
            let ext_i = belief[i] - old_i;
            let ext_j = belief[j] - old_j;
            let new_i = sign[q] * boxplus(params.llr, ext_j);
            let new_j = sign[q] * boxplus(params.llr, ext_i);
            let d = params.damping;
            let mi = d * old_i + (1.0 - d) * new_i;
            let mj = d * old_j + (1.0 - d) * new_j;
            delta = delta.max((mi - old_i).abs()).max((mj - old_j).abs());
            next[q] = (mi, mj);
        }
        msg = next;
        belief.clone_from(&prior);
        for (q, &(i, j)) in pairs.iter().enumerate() {
            belief[i] += msg[q].0;
            belief[j] += msg[q].1;
        }
        if delta <= params.tol {
            converged = true;
            break;
        }
    }
    let mut bits = 0u32;
    for (i, &b) in belief.iter().enumerate() {
        let bit = if b > 0.0 {
            0
        } else if b < 0.0 {
            1
        } else {
            data >> i & 1
        };
        bits |= bit << i;
    }
    BpResult {
        bits,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::SpinConfig;

    #[test]
    fn params_validation() {
        assert!(BpParams::default().validate().is_ok());
        for bad in [
            BpParams { llr: 0.0, ..Default::default() },
            BpParams { damping: 1.0, ..Default::default() },
            BpParams { max_iters: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn clean_states_decode_within_two_iterations() {
        let layout = LhzLayout::new(5).unwrap();
        for llr in [0.05, 1.0, 30.0] {
            let p = BpParams { llr, max_iters: 2, ..Default::default() };
            for b in 0..32 {
                let z = layout.encode_bits(b);
                assert_eq!(run(&layout, z, &p).bits, b, "llr={llr} b={b}");
            }
        }
    }

    #[test]
    fn single_data_flip_is_outvoted() {
        let layout = LhzLayout::new(5).unwrap();
        for llr in [1.0, 2.0, 5.0] {
            let p = BpParams { llr, ..Default::default() };
            for b in [0u32, 0b10110, 0b11111] {
                for site in 0..5 {
                    let z = PhysicalState(layout.encode_bits(b).0 ^ 1 << layout.data_qubit(site));
                    let r = run(&layout, z, &p);
                    assert_eq!(r.bits, b, "llr={llr} b={b:05b} site={site}");
                }
            }
        }
    }

    #[test]
    fn saturated_llr_on_codespace_is_data_readout() {
        let layout = LhzLayout::new(4).unwrap();
        let p = BpParams { llr: 1e3, ..Default::default() };
        for b in 0..16 {
            let z = layout.encode_bits(b);
            assert_eq!(SpinConfig::new(run(&layout, z, &p).bits, 4), layout.data_readout(z));
        }
    }
}
