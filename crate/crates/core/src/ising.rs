//! Logical Sherrington–Kirkpatrick instances.
//!
//! Spins use the convention `s = 1 - 2b`: bit 0 is spin +1, bit 1 is spin -1.
//! A configuration of `n` spins is packed into a `u32` with qubit `i` at bit
//! `i`; its textual form lists qubit 0 first.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::par::mix_seed;

/// Largest logical size accepted by the exhaustive ground-state search.
pub const MAX_EXHAUSTIVE_N: usize = 24;

/// Absolute energy tolerance used to declare two configurations degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SpinConfig {
    bits: u32,
    n: usize,
}

impl SpinConfig {
    pub fn new(bits: u32, n: usize) -> Self {
        debug_assert!(n <= 32);
        let mask = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        SpinConfig {
            bits: bits & mask,
            n,
        }
    }

    pub fn zeros(n: usize) -> Self {
        SpinConfig::new(0, n)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bit(&self, i: usize) -> u8 {
        ((self.bits >> i) & 1) as u8
    }

    pub fn spin(&self, i: usize) -> f64 {
        1.0 - 2.0 * self.bit(i) as f64
    }

    /// Global flip of every spin.
    pub fn flipped(&self) -> Self {
        SpinConfig::new(!self.bits, self.n)
    }

    /// Sort key under which smaller means lexicographically smaller text.
    pub fn lex_key(&self) -> u32 {
        if self.n == 0 {
            return 0;
        }
        self.bits.reverse_bits() >> (32 - self.n)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.len() > 32 {
            return Err(Error::invalid(format!("bitstring too long: {}", text.len())));
        }
        let mut bits = 0u32;
        for (i, c) in text.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                other => return Err(Error::invalid(format!("bad bit character {other:?}"))),
            }
        }
        Ok(SpinConfig::new(bits, text.len()))
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.bit(i) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Ground state stored alongside an instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CachedGround {
    pub config: SpinConfig,
    pub energy: f64,
}

/// Result of the exhaustive search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundState {
    pub config: SpinConfig,
    pub energy: f64,
    /// More than one configuration lies within [`DEGENERACY_TOL`] of the minimum.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsingInstance {
    n: usize,
    couplings: Vec<f64>,
    fields: Vec<f64>,
    uid: String,
    seed: u64,
    ground: Option<CachedGround>,
}

impl IsingInstance {
    /// Builds an instance from a row-major `n x n` coupling matrix.
    pub fn new(
        n: usize,
        couplings: Vec<f64>,
        fields: Vec<f64>,
        uid: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("n must be >= 2, got {n}")));
        }
        if n > 32 {
            return Err(Error::Capability(format!("n = {n} exceeds 32 spins")));
        }
        if couplings.len() != n * n {
            return Err(Error::parse(
                "J",
                format!("coupling matrix must be {n}x{n}, got {} entries", couplings.len()),
            ));
        }
        if fields.len() != n {
            return Err(Error::parse(
                "h",
                format!("field length {} does not match n = {n}", fields.len()),
            ));
        }
        for j in 0..n {
            if couplings[j * n + j] != 0.0 {
                return Err(Error::parse("J", format!("nonzero diagonal at ({j},{j})")));
            }
            for k in (j + 1)..n {
                if couplings[j * n + k] != couplings[k * n + j] {
                    return Err(Error::parse(
                        "J",
                        format!("asymmetric couplings at ({j},{k})"),
                    ));
                }
            }
        }
        if couplings.iter().chain(fields.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("couplings and fields must be finite"));
        }
        Ok(IsingInstance {
            n,
            couplings,
            fields,
            uid: uid.into(),
            seed,
            ground: None,
        })
    }

    /// Builds an instance from the upper-triangle couplings `J_jk` (j < k)
    /// listed row by row.
    pub fn from_upper(n: usize, upper: &[f64], fields: Vec<f64>, uid: &str, seed: u64) -> Result<Self> {
        if upper.len() != n * (n.saturating_sub(1)) / 2 {
            return Err(Error::invalid("upper-triangle length mismatch"));
        }
        let mut couplings = vec![0.0; n * n];
        let mut it = upper.iter();
        for j in 0..n {
            for k in (j + 1)..n {
                let v = *it.next().unwrap();
                couplings[j * n + k] = v;
                couplings[k * n + j] = v;
            }
        }
        Self::new(n, couplings, fields, uid, seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn uid(&self) -> &str {
        &self.uid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        self.couplings[j * self.n + k]
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn cached_ground(&self) -> Option<CachedGround> {
        self.ground
    }

    /// Returns the cached ground state, computing it on first use.
    pub fn ground(&mut self) -> Result<CachedGround> {
        if let Some(g) = self.ground {
            return Ok(g);
        }
        let g = ground_state(self)?;
        let cached = CachedGround {
            config: g.config,
            energy: g.energy,
        };
        self.ground = Some(cached);
        Ok(cached)
    }

    pub fn with_ground(mut self) -> Result<Self> {
        self.ground()?;
        Ok(self)
    }

    /// `true` when `config` is within the degeneracy tolerance of the ground energy.
    pub fn is_ground(&self, config: SpinConfig, ground_energy: f64) -> bool {
        (energy_unchecked(self, config) - ground_energy).abs() <= DEGENERACY_TOL
    }

    /// Sum of |J_jk| over pairs plus sum of |h_j|.
    pub fn energy_scale(&self) -> f64 {
        let mut s: f64 = self.fields.iter().map(|h| h.abs()).sum();
        for j in 0..self.n {
            for k in (j + 1)..self.n {
                s += self.coupling(j, k).abs();
            }
        }
        s
    }

    /// Logical energies of all `2^n` basis states, indexed by packed bits.
    pub fn direct_diagonal(&self) -> Result<Vec<f64>> {
        if self.n > MAX_EXHAUSTIVE_N {
            return Err(Error::Capability(format!(
                "direct diagonal needs 2^{} entries",
                self.n
            )));
        }
        Ok((0..1u32 << self.n)
            .map(|b| energy_unchecked(self, SpinConfig::new(b, self.n)))
            .collect())
    }
}

/// Draws a standard-normal SK instance. Identical `(n, seed)` always gives an
/// identical instance.
pub fn generate_sk(n: usize, seed: u64) -> Result<IsingInstance> {
    if n < 2 {
        return Err(Error::invalid(format!("n must be >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, n as u64));
    let upper: Vec<f64> = (0..n * (n - 1) / 2)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let fields: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    IsingInstance::from_upper(n, &upper, fields, &make_uid(n, seed), seed)
}

/// Thirty lowercase letters derived from `(n, seed)`.
pub fn make_uid(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ 0x5555_AAAA_0F0F_F0F0, n as u64));
    (0..30)
        .map(|_| (b'a' + rng.random_range(0..26u8)) as char)
        .collect()
}

/// `E = -1/2 sum_{j != k} J_jk s_j s_k - sum_j h_j s_j`.
pub fn energy(instance: &IsingInstance, config: SpinConfig) -> Result<f64> {
    if config.len() != instance.n {
        return Err(Error::invalid(format!(
            "config length {} != n = {}",
            config.len(),
            instance.n
        )));
    }
    Ok(energy_unchecked(instance, config))
}

pub(crate) fn energy_unchecked(instance: &IsingInstance, config: SpinConfig) -> f64 {
    let n = instance.n;
    let mut pair = 0.0;
    let mut field = 0.0;
    for j in 0..n {
        let sj = config.spin(j);
        let row = &instance.couplings[j * n..(j + 1) * n];
        let mut acc = 0.0;
        for (k, &jk) in row.iter().enumerate() {
            if k != j {
                acc += jk * config.spin(k);
            }
        }
        pair += sj * acc;
        field += instance.fields[j] * sj;
    }
    -0.5 * pair - field
}

/// Exhaustive minimum over all `2^n` configurations.
///
/// A Gray-code sweep with incremental local fields collects every
/// configuration within a loose window of the running minimum; those
/// candidates are then re-evaluated exactly so the tie rule does not depend on
/// accumulated rounding.
pub fn ground_state(instance: &IsingInstance) -> Result<GroundState> {
    let n = instance.n;
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::Capability(format!(
            "exhaustive ground state limited to n <= {MAX_EXHAUSTIVE_N}, got {n}"
        )));
    }
    const WINDOW: f64 = 1e-6;
    let j = &instance.couplings;
    let h = &instance.fields;
    let mut spins = vec![1.0f64; n];
    let mut local: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&k| k != i).map(|k| j[i * n + k]).sum())
        .collect();
    let mut e = energy_unchecked(instance, SpinConfig::zeros(n));
    let mut bits = 0u32;
    let mut best = e;
    let mut candidates: Vec<(u32, f64)> = vec![(0, e)];
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let si = spins[i];
        e += 2.0 * si * (local[i] + h[i]);
        spins[i] = -si;
        bits ^= 1 << i;
        for k in 0..n {
            if k != i {
                local[k] -= 2.0 * j[k * n + i] * si;
            }
        }
        if e < best + WINDOW {
            if e < best {
                best = e;
                candidates.retain(|&(_, ce)| ce < best + WINDOW);
            }
            candidates.push((bits, e));
        }
    }
    let exact: Vec<(SpinConfig, f64)> = candidates
        .into_iter()
        .map(|(b, _)| {
            let c = SpinConfig::new(b, n);
            (c, energy_unchecked(instance, c))
        })
        .collect();
    let min = exact.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min);
    let tied: Vec<&(SpinConfig, f64)> = exact
        .iter()
        .filter(|&&(_, e)| e - min <= DEGENERACY_TOL)
        .collect();
    let &(config, energy) = tied
        .iter()
        .min_by_key(|(c, _)| c.lex_key())
        .copied()
        .expect("at least one candidate");
    Ok(GroundState {
        config,
        energy,
        degenerate: tied.len() > 1,
    })
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    format!("{x:.16e}")
}

impl IsingInstance {
    /// JSON text of the instance file. Byte-stable for equal instances.
    pub fn to_json(&self) -> String {
        let n = self.n;
        let mut s = String::new();
        s.push_str("{\n");
        s.push_str(&format!("  \"uid\": {},\n", Value::String(self.uid.clone())));
        s.push_str(&format!("  \"n\": {n},\n"));
        s.push_str(&format!("  \"seed\": {},\n", self.seed));
        s.push_str("  \"J\": [\n");
        for r in 0..n {
            let row: Vec<String> = self.couplings[r * n..(r + 1) * n]
                .iter()
                .map(|&x| fmt_real(x))
                .collect();
            s.push_str(&format!(
                "    [{}]{}\n",
                row.join(", "),
                if r + 1 < n { "," } else { "" }
            ));
        }
        s.push_str("  ],\n");
        let h: Vec<String> = self.fields.iter().map(|&x| fmt_real(x)).collect();
        s.push_str(&format!("  \"h\": [{}]", h.join(", ")));
        if let Some(g) = self.ground {
            s.push_str(&format!(
                ",\n  \"ground_state\": {{\"bits\": \"{}\", \"energy\": {}}}",
                g.config,
                fmt_real(g.energy)
            ));
        }
        s.push_str("\n}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| Error::parse("<document>", e.to_string()))?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::parse("<document>", "expected a JSON object"))?;
        let uid = obj
            .get("uid")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::parse("uid", "missing or not a string"))?;
        let n = obj
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::parse("n", "missing or not a non-negative integer"))?
            as usize;
        let seed = obj
            .get("seed")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::parse("seed", "missing or not a non-negative integer"))?;
        let rows = obj
            .get("J")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse("J", "missing or not an array"))?;
        if rows.len() != n {
            return Err(Error::parse("J", format!("expected {n} rows, got {}", rows.len())));
        }
        let mut couplings = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| Error::parse("J", format!("row {r} is not an array")))?;
            if row.len() != n {
                return Err(Error::parse(
                    "J",
                    format!("row {r} has {} entries, expected {n}", row.len()),
                ));
            }
            for x in row {
                couplings.push(
                    x.as_f64()
                        .ok_or_else(|| Error::parse("J", format!("non-numeric entry in row {r}")))?,
                );
            }
        }
        let fields: Vec<f64> = obj
            .get("h")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse("h", "missing or not an array"))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::parse("h", "non-numeric entry")))
            .collect::<Result<_>>()?;
        if fields.len() != n {
            return Err(Error::parse(
                "h",
                format!("field length {} does not match n = {n}", fields.len()),
            ));
        }
        let mut inst = IsingInstance::new(n, couplings, fields, uid, seed)?;
        if let Some(g) = obj.get("ground_state") {
            if !g.is_null() {
                let bits = g
                    .get("bits")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::parse("ground_state.bits", "missing or not a string"))?;
                let config = SpinConfig::parse(bits)
                    .map_err(|e| Error::parse("ground_state.bits", e.to_string()))?;
                if config.len() != n {
                    return Err(Error::parse("ground_state.bits", "length does not match n"));
                }
                let e = g
                    .get("energy")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| Error::parse("ground_state.energy", "missing or not a number"))?;
                let actual = energy_unchecked(&inst, config);
                if (actual - e).abs() > 1e-12 * e.abs().max(1.0) {
                    return Err(Error::parse(
                        "ground_state.energy",
                        format!("cached energy {e} disagrees with evaluated {actual}"),
                    ));
                }
                inst.ground = Some(CachedGround { config, energy: e });
            }
        }
        Ok(inst)
    }
}

pub fn save_instance(instance: &IsingInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, instance.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<IsingInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    IsingInstance::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(j01: f64, h: [f64; 2]) -> IsingInstance {
        IsingInstance::from_upper(2, &[j01], h.to_vec(), "t", 0).unwrap()
    }

    /// Second evaluator: each pair once with weight J_jk.
    fn energy_upper(inst: &IsingInstance, c: SpinConfig) -> f64 {
        let n = inst.n();
        let mut e = 0.0;
        for j in 0..n {
            for k in (j + 1)..n {
                e -= inst.coupling(j, k) * c.spin(j) * c.spin(k);
            }
            e -= inst.fields()[j] * c.spin(j);
        }
        e
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate_sk(4, 7).unwrap();
        let b = generate_sk(4, 7).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a.to_json(), generate_sk(4, 8).unwrap().to_json());
        assert_eq!(a.uid().len(), 30);
    }

    #[test]
    fn generate_sizes() {
        let a = generate_sk(2, 0).unwrap();
        assert_eq!(a.fields().len(), 2);
        assert_eq!(a.couplings().len(), 4);
        assert!(a.coupling(0, 1) != 0.0);
        assert!(matches!(generate_sk(1, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn generator_mean_is_centered() {
        let seeds = 10_000u64;
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in 0..seeds {
            let inst = generate_sk(5, s).unwrap();
            for j in 0..5 {
                for k in (j + 1)..5 {
                    sum += inst.coupling(j, k);
                    count += 1;
                }
            }
        }
        let mean = sum / count as f64;
        let sigma = 1.0 / (count as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean}, 3 sigma {}", 3.0 * sigma);
    }

    #[test]
    fn energy_examples() {
        let zero = IsingInstance::from_upper(3, &[0.0; 3], vec![0.0; 3], "z", 0).unwrap();
        for b in 0..8 {
            assert_eq!(energy(&zero, SpinConfig::new(b, 3)).unwrap(), 0.0);
        }
        let p = pair(1.0, [0.0, 0.0]);
        assert_eq!(energy(&p, SpinConfig::parse("00").unwrap()).unwrap(), -1.0);
        assert!(energy(&p, SpinConfig::parse("000").unwrap()).is_err());
    }

    #[test]
    fn energy_matches_pairwise_evaluator() {
        let inst = generate_sk(4, 11).unwrap();
        for b in 0..16 {
            let c = SpinConfig::new(b, 4);
            let e1 = energy(&inst, c).unwrap();
            let e2 = energy_upper(&inst, c);
            assert!((e1 - e2).abs() < 1e-12, "{e1} vs {e2}");
        }
    }

    #[test]
    fn ground_state_examples() {
        let g = ground_state(&pair(2.0, [0.0, 0.0])).unwrap();
        assert_eq!(g.config.to_string(), "00");
        assert_eq!(g.energy, -2.0);
        assert!(g.degenerate);

        let g = ground_state(&pair(0.0, [1.0, -1.0])).unwrap();
        assert_eq!(g.config.to_string(), "01");
        assert_eq!(g.energy, -2.0);
        assert!(!g.degenerate);
    }

    #[test]
    fn ground_state_is_brute_force_minimum() {
        for seed in 0..20 {
            let inst = generate_sk(5, seed).unwrap();
            let g = ground_state(&inst).unwrap();
            let min = (0..32)
                .map(|b| energy_upper(&inst, SpinConfig::new(b, 5)))
                .fold(f64::INFINITY, f64::min);
            assert!((g.energy - min).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_state_capability_bound() {
        let big = IsingInstance::new(25, vec![0.0; 625], vec![0.0; 25], "big", 0).unwrap();
        assert!(matches!(ground_state(&big), Err(Error::Capability(_))));
    }

    #[test]
    fn lex_key_orders_text() {
        let a = SpinConfig::parse("0110").unwrap();
        let b = SpinConfig::parse("1000").unwrap();
        assert!(a.lex_key() < b.lex_key());
        assert!(a.bits() > b.bits());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let inst = generate_sk(5, 3).unwrap().with_ground().unwrap();
        let text = inst.to_json();
        let back = IsingInstance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json(), text);

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["J"][0][1] = Value::from(0.5);
        let err = IsingInstance::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("asymmetric couplings"), "{err}");

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["h"].as_array_mut().unwrap().pop();
        let err = IsingInstance::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("field length"), "{err}");
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "h"));
    }

    #[test]
    fn save_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        let inst = generate_sk(4, 9).unwrap().with_ground().unwrap();
        save_instance(&inst, &path).unwrap();
        let back = load_instance(&path).unwrap();
        assert_eq!(back, inst);
        assert!(load_instance(dir.path().join("missing.json")).is_err());
    }

    proptest! {
        #[test]
        fn global_flip_symmetry(seed in 0u64..500, bits in 0u32..64) {
            let inst = generate_sk(6, seed).unwrap();
            let c = SpinConfig::new(bits, 6);
            let f = c.flipped();
            let (pair_c, field_c) = split_energy(&inst, c);
            let (pair_f, field_f) = split_energy(&inst, f);
            prop_assert!((pair_c - pair_f).abs() < 1e-12);
            prop_assert!((field_c + field_f).abs() < 1e-12);
            let e = energy(&inst, c).unwrap();
            prop_assert!((e - (pair_c + field_c)).abs() < 1e-12);
        }

        #[test]
        fn ground_is_below_every_config(seed in 0u64..200) {
            let inst = generate_sk(6, seed).unwrap();
            let g = ground_state(&inst).unwrap();
            for b in 0..64 {
                prop_assert!(g.energy <= energy(&inst, SpinConfig::new(b, 6)).unwrap() + 1e-12);
            }
        }

        #[test]
        fn json_is_byte_stable(seed in 0u64..1000, n in 2usize..7) {
            let inst = generate_sk(n, seed).unwrap();
            let text = inst.to_json();
            let back = IsingInstance::from_json(&text).unwrap();
            prop_assert_eq!(back.to_json(), text);
        }
    }

    fn split_energy(inst: &IsingInstance, c: SpinConfig) -> (f64, f64) {
        let n = inst.n();
        let mut pair = 0.0;
        let mut field = 0.0;
        for j in 0..n {
            for k in (j + 1)..n {
                pair -= inst.coupling(j, k) * c.spin(j) * c.spin(k);
            }
            field -= inst.fields()[j] * c.spin(j);
        }
        (pair, field)
    }
}
