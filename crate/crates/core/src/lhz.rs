//! LHZ parity layout with data qubits.
//!
//! Physical qubits are numbered coupling qubits first, in lexicographic pair
//! order `(0,1), (0,2), ..., (n-2,n-1)`, followed by the `n` data qubits. The
//! triangle has the nearest-neighbour pairs `(i,i+1)` in its bottom row,
//! directly above the data qubits, and the pair `(0,n-1)` at its apex.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ising::{IsingInstance, SpinConfig};

pub const MIN_N: usize = 3;
pub const MAX_N: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaquetteKind {
    Internal,
    DataTriangle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plaquette {
    pub kind: PlaquetteKind,
    pub qubits: Vec<usize>,
    /// Physical-qubit membership mask.
    pub mask: u32,
}

#[derive(Clone, Debug)]
pub struct LhzLayout {
    n: usize,
    pairs: Vec<(usize, usize)>,
    plaquettes: Vec<Plaquette>,
    logical_lines: Vec<Vec<usize>>,
    /// For each physical qubit, the mask of plaquettes containing it.
    incidence: Vec<u32>,
}

/// Physical basis state of the layout, qubit `q` at bit `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PhysicalState(pub u32);

/// Plaquette violation pattern, plaquette `v` at bit `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syndrome(pub u32);

impl Syndrome {
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }
}

pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Lexicographic index of the coupling qubit for pair `{i, j}`.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}

pub fn plaquette_count(n: usize) -> usize {
    (n - 1) * (n - 2) / 2 + (n - 1)
}

impl LhzLayout {
    pub fn new(n: usize) -> Result<Self> {
        if !(MIN_N..=MAX_N).contains(&n) {
            return Err(Error::Capability(format!(
                "LHZ layout supports {MIN_N} <= n <= {MAX_N}, got {n}"
            )));
        }
        let mut pairs = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        let kc = pairs.len();
        let index = |i: usize, j: usize| -> usize {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            // offset of row a in lexicographic order
            a * (2 * n - a - 1) / 2 + (b - a - 1)
        };

        let mut plaquettes = Vec::with_capacity(plaquette_count(n));
        // Internal plaquettes, top row of the triangle first. The plaquette
        // hanging below row d+1 at position i closes the loop
        // (i,i+d) (i+1,i+d+1) (i,i+d+1) [(i+1,i+d)].
        for d in (1..n - 1).rev() {
            for i in 0..(n - 1 - d) {
                let mut qubits = vec![index(i, i + d), index(i + 1, i + d + 1), index(i, i + d + 1)];
                if d > 1 {
                    qubits.push(index(i + 1, i + d));
                }
                qubits.sort_unstable();
                plaquettes.push(Plaquette {
                    kind: PlaquetteKind::Internal,
                    mask: qubits.iter().fold(0, |m, &q| m | 1 << q),
                    qubits,
                });
            }
        }
        for i in 0..n - 1 {
            let qubits = vec![index(i, i + 1), kc + i, kc + i + 1];
            plaquettes.push(Plaquette {
                kind: PlaquetteKind::DataTriangle,
                mask: qubits.iter().fold(0, |m, &q| m | 1 << q),
                qubits,
            });
        }

        let logical_lines = (0..n)
            .map(|l| {
                pairs
                    .iter()
                    .enumerate()
                    .filter(|(_, &(i, j))| i == l || j == l)
                    .map(|(q, _)| q)
                    .collect()
            })
            .collect();

        let k = kc + n;
        let mut incidence = vec![0u32; k];
        for (v, p) in plaquettes.iter().enumerate() {
            for &q in &p.qubits {
                incidence[q] |= 1 << v;
            }
        }
        Ok(LhzLayout {
            n,
            pairs,
            plaquettes,
            logical_lines,
            incidence,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total physical qubits `K`.
    pub fn k(&self) -> usize {
        self.pairs.len() + self.n
    }

    /// Number of coupling qubits.
    pub fn k_coupling(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        pair_index(self.n, i, j)
    }

    pub fn data_qubit(&self, i: usize) -> usize {
        self.pairs.len() + i
    }

    pub fn plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    pub fn logical_lines(&self) -> &[Vec<usize>] {
        &self.logical_lines
    }

    /// Plaquette mask touched by physical qubit `q`.
    pub fn incidence(&self, q: usize) -> u32 {
        self.incidence[q]
    }

    pub fn state_count(&self) -> usize {
        1usize << self.k()
    }

    fn data_shift(&self) -> usize {
        self.pairs.len()
    }

    pub fn encode(&self, logical: SpinConfig) -> Result<PhysicalState> {
        if logical.len() != self.n {
            return Err(Error::invalid(format!(
                "logical length {} != n = {}",
                logical.len(),
                self.n
            )));
        }
        Ok(self.encode_bits(logical.bits()))
    }

    pub(crate) fn encode_bits(&self, b: u32) -> PhysicalState {
        let mut z = 0u32;
        for (q, &(i, j)) in self.pairs.iter().enumerate() {
            z |= (((b >> i) ^ (b >> j)) & 1) << q;
        }
        PhysicalState(z | (b << self.data_shift()))
    }

    /// Logical state read directly from the data qubits.
    pub fn data_readout(&self, z: PhysicalState) -> SpinConfig {
        SpinConfig::new(z.0 >> self.data_shift(), self.n)
    }

    /// Coupling-qubit bits of `z`, pair `q` at bit `q`.
    pub fn coupling_bits(&self, z: PhysicalState) -> u32 {
        z.0 & ((1u32 << self.pairs.len()) - 1)
    }

    pub fn syndrome(&self, z: PhysicalState) -> Syndrome {
        let mut s = 0u32;
        for (v, p) in self.plaquettes.iter().enumerate() {
            s |= ((z.0 & p.mask).count_ones() & 1) << v;
        }
        Syndrome(s)
    }

    /// Syndrome of a flip pattern via the incidence columns.
    pub fn flip_syndrome(&self, flips: u32) -> Syndrome {
        let mut s = 0u32;
        let mut f = flips;
        while f != 0 {
            let q = f.trailing_zeros() as usize;
            s ^= self.incidence[q];
            f &= f - 1;
        }
        Syndrome(s)
    }

    /// Energy of every physical basis state:
    /// `-sum J_ij s~_ij - sum h_i s~_i - C sum_v prod_{q in v} s~_q`.
    pub fn physical_diagonal(&self, instance: &IsingInstance, c: f64) -> Result<Vec<f64>> {
        self.check_instance(instance)?;
        if !(c >= 0.0) {
            return Err(Error::invalid(format!("constraint strength must be >= 0, got {c}")));
        }
        let mut weights = Vec::with_capacity(self.k());
        for &(i, j) in &self.pairs {
            weights.push(instance.coupling(i, j));
        }
        weights.extend_from_slice(instance.fields());
        // Sum over bits of -w_q (1 - 2 b_q) = -W + 2 sum_{b_q = 1} w_q. Built
        // by doubling: entries for states with top bit set reuse the lower half.
        let total: f64 = weights.iter().sum();
        let k = self.k();
        let mut diag = vec![0.0f64; 1 << k];
        diag[0] = -total;
        for (q, &w) in weights.iter().enumerate() {
            let half = 1usize << q;
            let (lo, hi) = diag.split_at_mut(half);
            for (h, &l) in hi[..half].iter_mut().zip(lo.iter()) {
                *h = l + 2.0 * w;
            }
        }
        if c != 0.0 {
            let masks: Vec<u32> = self.plaquettes.iter().map(|p| p.mask).collect();
            for (z, e) in diag.iter_mut().enumerate() {
                let odd: u32 = masks
                    .iter()
                    .map(|&m| (z as u32 & m).count_ones() & 1)
                    .sum();
                // satisfied plaquettes give -C, violated ones +C
                *e += c * (2.0 * odd as f64 - masks.len() as f64);
            }
        }
        Ok(diag)
    }

    fn check_instance(&self, instance: &IsingInstance) -> Result<()> {
        if instance.n() != self.n {
            return Err(Error::invalid(format!(
                "instance has n = {}, layout has n = {}",
                instance.n(),
                self.n
            )));
        }
        if self.k() > 26 {
            return Err(Error::Capability(format!(
                "physical diagonal needs 2^{} entries",
                self.k()
            )));
        }
        Ok(())
    }

    /// JSON dump `{"n", "K", "couplings", "plaquettes"}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct P<'a> {
            kind: PlaquetteKind,
            qubits: &'a [usize],
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            n: usize,
            #[serde(rename = "K")]
            k: usize,
            couplings: Vec<[usize; 2]>,
            plaquettes: Vec<P<'a>>,
        }
        let dump = Dump {
            n: self.n,
            k: self.k(),
            couplings: self.pairs.iter().map(|&(i, j)| [i, j]).collect(),
            plaquettes: self
                .plaquettes
                .iter()
                .map(|p| P {
                    kind: p.kind,
                    qubits: &p.qubits,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dump).expect("layout serializes")
    }
}

pub fn build_layout(n: usize) -> Result<LhzLayout> {
    LhzLayout::new(n)
}
