//! Minimum-weight syndrome correction table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lhz::{LhzLayout, PhysicalState, Syndrome};
use crate::par::mix_seed;

pub const MAX_TABLE_PLAQUETTES: usize = 15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyndromeTable {
    corrections: Vec<u32>,
    weights: Vec<u32>,
}

/// Next integer with the same popcount (Gosper's hack).
#[inline]
fn next_same_weight(x: u32) -> u32 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

/// Every `k`-bit pattern of weight `w`, in increasing order.
fn for_each_weight(k: usize, w: usize, mut f: impl FnMut(u32)) {
    if w == 0 {
        f(0);
        return;
    }
    if w > k {
        return;
    }
    let limit = 1u64 << k;
    let mut x = (1u32 << w) - 1;
    while (x as u64) < limit {
        f(x);
        if w == k {
            break;
        }
        x = next_same_weight(x);
    }
}

impl SyndromeTable {
    /// Weight-ordered enumeration; among tied minimum patterns the one kept
    /// for syndrome `s` is drawn from a stream seeded by `(seed, s)`.
    pub fn build(layout: &LhzLayout, seed: u64) -> Result<Self> {
        let p = layout.plaquettes().len();
        if p > MAX_TABLE_PLAQUETTES {
            return Err(Error::Capability(format!(
                "syndrome table needs P <= {MAX_TABLE_PLAQUETTES}, got {p}"
            )));
        }
        let k = layout.k();
        let size = 1usize << p;
        let mut best = vec![u32::MAX; size];
        let mut ties = vec![0u32; size];
        let mut found = 0usize;
        let mut top = 0;
        for w in 0..=k {
            for_each_weight(k, w, |f| {
                let s = layout.flip_syndrome(f).0 as usize;
                if best[s] == u32::MAX {
                    best[s] = w as u32;
                    found += 1;
                }
                if best[s] == w as u32 {
                    ties[s] += 1;
                }
            });
            top = w;
            if found == size {
                break;
            }
        }
        if found != size {
            return Err(Error::Internal(format!("{} syndromes unreachable", size - found)));
        }
        let pick: Vec<u32> = (0..size)
            .map(|s| ChaCha8Rng::seed_from_u64(mix_seed(seed, s as u64)).random_range(0..ties[s]))
            .collect();
        let mut seen = vec![0u32; size];
        let mut corrections = vec![0u32; size];
        for w in 0..=top {
            for_each_weight(k, w, |f| {
                let s = layout.flip_syndrome(f).0 as usize;
                if best[s] == w as u32 {
                    if seen[s] == pick[s] {
                        corrections[s] = f;
                    }
                    seen[s] += 1;
                }
            });
        }
        Ok(SyndromeTable {
            corrections,
            weights: best,
        })
    }

    pub fn len(&self) -> usize {
        self.corrections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corrections.is_empty()
    }

    pub fn correction(&self, s: Syndrome) -> u32 {
        self.corrections[s.0 as usize]
    }

    pub fn weight(&self, s: Syndrome) -> u32 {
        self.weights[s.0 as usize]
    }

    pub fn corrections(&self) -> &[u32] {
        &self.corrections
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn correct(&self, layout: &LhzLayout, z: PhysicalState) -> PhysicalState {
        PhysicalState(z.0 ^ self.correction(layout.syndrome(z)))
    }

    /// CSV with columns `syndrome_hex,correction_hex,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("syndrome_hex,correction_hex,weight\n");
        for (s, (c, w)) in self.corrections.iter().zip(&self.weights).enumerate() {
            out.push_str(&format!("{s:#x},{c:#x},{w}\n"));
        }
        out
    }
}
