//! Exact counts of coupling-qubit states decodable by sets of spanning trees.
//!
//! A state is covered by a tree when it agrees with a fixed reference
//! codeword on every edge of that tree. Only coupling qubits are counted.

use serde::Serialize;

use crate::decoders::{SpanningTree, prufer_decode};
use crate::error::{Error, Result};
use crate::lhz::pair_count;
use crate::par::{map_range, Execution};

/// Largest coupling-qubit count that is enumerated exhaustively.
pub const MAX_ENUM_COUPLINGS: usize = 21;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountLedger {
    pub order: Vec<String>,
    pub new_states: Vec<u64>,
    pub running_total: Vec<u64>,
    pub total: u64,
}

impl CountLedger {
    /// CSV with columns `index,tree_edges,new_states,total`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,tree_edges,new_states,total\n");
        for (i, ((t, n), r)) in self
            .order
            .iter()
            .zip(&self.new_states)
            .zip(&self.running_total)
            .enumerate()
        {
            out.push_str(&format!("{},{t},{n},{r}\n", i + 1));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WeightCount {
    pub weight: usize,
    pub combinations: u64,
    pub invalid: u64,
}

impl WeightCount {
    pub fn valid(&self) -> u64 {
        self.combinations - self.invalid
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityCensus {
    pub n: usize,
    pub per_weight: Vec<WeightCount>,
    pub total: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RandomChance {
    pub p_n: f64,
    pub p_k: f64,
    pub p_k_over_n: f64,
}

fn check_size(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2, got {n}")));
    }
    let kc = pair_count(n);
    if kc > MAX_ENUM_COUPLINGS {
        return Err(Error::Capability(format!(
            "coverage enumeration supports at most {MAX_ENUM_COUPLINGS} coupling qubits, n = {n} has {kc}"
        )));
    }
    Ok(kc)
}

fn check_trees(trees: &[SpanningTree], n: usize) -> Result<()> {
    match trees.iter().find(|t| t.n() != n) {
        Some(t) => Err(Error::invalid(format!("tree {} is not on {n} vertices", t.label()))),
        None => Ok(()),
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Coverage ledger for trees measured in the given order.
pub fn enumerate_covered_states(trees: &[SpanningTree], n: usize, exec: Execution) -> Result<CountLedger> {
    let kc = check_size(n)?;
    check_trees(trees, n)?;
    // States are the error patterns relative to the reference codeword, so a
    // tree covers exactly the patterns that vanish on its mask.
    let mut covered = vec![false; 1usize << kc];
    let mut new_states = Vec::with_capacity(trees.len());
    let mut running_total = Vec::with_capacity(trees.len());
    let mut total = 0u64;
    for t in trees {
        let mask = t.mask() as usize;
        let fresh = newly_covered(&covered, mask, exec);
        for x in &fresh {
            covered[*x] = true;
        }
        total += fresh.len() as u64;
        new_states.push(fresh.len() as u64);
        running_total.push(total);
    }
    Ok(CountLedger {
        order: trees.iter().map(SpanningTree::label).collect(),
        new_states,
        running_total,
        total,
    })
}

/// Uncovered patterns vanishing on `mask`, ascending.
fn newly_covered(covered: &[bool], mask: usize, exec: Execution) -> Vec<usize> {
    const BLOCK: usize = 1 << 14;
    let blocks = covered.len().div_ceil(BLOCK);
    map_range(exec, blocks, |b| {
        (b * BLOCK..((b + 1) * BLOCK).min(covered.len()))
            .filter(|&x| x & mask == 0 && !covered[x])
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// New states contributed by `new` after `existing` have been counted.
pub fn overlap_increment(existing: &[SpanningTree], new: &SpanningTree, n: usize) -> Result<u64> {
    let kc = check_size(n)?;
    check_trees(existing, n)?;
    check_trees(std::slice::from_ref(new), n)?;
    let masks: Vec<u32> = existing.iter().map(SpanningTree::mask).collect();
    let m = new.mask();
    Ok((0u32..1 << kc)
        .filter(|&x| x & m == 0 && masks.iter().all(|&e| x & e != 0))
        .count() as u64)
}

fn connected(n: usize, pairs: &[(usize, usize)], subset: u32) -> bool {
    let mut reach = 1u32;
    loop {
        let mut next = reach;
        let mut s = subset;
        while s != 0 {
            let q = s.trailing_zeros() as usize;
            s &= s - 1;
            let (a, b) = pairs[q];
            if reach >> a & 1 == 1 || reach >> b & 1 == 1 {
                next |= 1 << a | 1 << b;
            }
        }
        if next == reach {
            return reach.count_ones() as usize == n;
        }
        reach = next;
    }
}

/// Valid and invalid edge subsets by size, from `n - 1` edges up to all of them.
pub fn semianalytic_count(n: usize, exec: Execution) -> Result<ValidityCensus> {
    let kc = check_size(n)?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    const BLOCK: usize = 1 << 14;
    let states = 1usize << kc;
    let per_block = map_range(exec, states.div_ceil(BLOCK), |b| {
        let mut inv = vec![0u64; kc + 1];
        for x in b * BLOCK..((b + 1) * BLOCK).min(states) {
            let x = x as u32;
            if !connected(n, &pairs, x) {
                inv[x.count_ones() as usize] += 1;
            }
        }
        inv
    });
    let mut invalid = vec![0u64; kc + 1];
    for inv in per_block {
        for (a, b) in invalid.iter_mut().zip(inv) {
            *a += b;
        }
    }
    let per_weight: Vec<WeightCount> = (n - 1..=kc)
        .map(|w| WeightCount {
            weight: w,
            combinations: binomial(kc, w),
            invalid: invalid[w],
        })
        .collect();
    let total = per_weight.iter().map(WeightCount::valid).sum();
    Ok(ValidityCensus { n, per_weight, total })
}

pub fn random_chance(n: usize, k: usize) -> Result<RandomChance> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("n and K must be positive"));
    }
    let p_n = 0.5f64.powi(n as i32);
    Ok(RandomChance {
        p_n,
        p_k: 0.5f64.powi(k as i32),
        p_k_over_n: 1.0 - (1.0 - p_n).powf(k as f64 / n as f64),
    })
}

/// Probability that a uniform coupling state is decodable after each tree.
pub fn random_decode_curve(trees: &[SpanningTree], n: usize, exec: Execution) -> Result<Vec<f64>> {
    let ledger = enumerate_covered_states(trees, n, exec)?;
    let denom = (1u64 << pair_count(n)) as f64;
    Ok(ledger.running_total.iter().map(|&c| c as f64 / denom).collect())
}

/// The 16 trees on four vertices, ordered as
/// lexicographic 3-subsets of `01 02 03 12 13 23`, triangles skipped.
pub fn table_order_n4() -> Vec<SpanningTree> {
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut out = Vec::with_capacity(16);
    for a in 0..6 {
        for b in a + 1..6 {
            for c in b + 1..6 {
                if let Ok(t) = SpanningTree::new(4, [pairs[a], pairs[b], pairs[c]]) {
                    out.push(t);
                }
            }
        }
    }
    out
}

/// All trees on `n` vertices in Prüfer-code order.
pub fn trees_in_prufer_order(n: usize) -> Result<Vec<SpanningTree>> {
    if !(3..=8).contains(&n) {
        return Err(Error::Capability(format!("tree enumeration supports 3 <= n <= 8, got {n}")));
    }
    let total = n.pow((n - 2) as u32);
    let mut seq = vec![0usize; n - 2];
    (0..total)
        .map(|mut code| {
            for s in seq.iter_mut().rev() {
                *s = code % n;
                code /= n;
            }
            prufer_decode(n, &seq)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{all_spanning_trees, random_spanning_tree};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SEQ: Execution = Execution::Sequential;

    #[test]
    fn table_ledger_n4() {
        let trees = table_order_n4();
        assert_eq!(trees.len(), 16);
        let l = enumerate_covered_states(&trees, 4, SEQ).unwrap();
        assert_eq!(l.new_states, [8, 4, 2, 4, 2, 2, 1, 1, 4, 2, 2, 1, 1, 2, 1, 1]);
        assert_eq!(l.total, 38);
        assert!(l.to_csv().starts_with("index,tree_edges,new_states,total\n1,01-02-03,8,8\n"));
    }

    #[test]
    fn single_tree_covers_an_eighth() {
        for t in all_spanning_trees(4).unwrap() {
            assert_eq!(enumerate_covered_states(&[t], 4, SEQ).unwrap().total, 8);
        }
        let t = &all_spanning_trees(5).unwrap()[17];
        assert_eq!(enumerate_covered_states(std::slice::from_ref(t), 5, SEQ).unwrap().total, 64);
    }

    #[test]
    fn census_n4() {
        let c = semianalytic_count(4, SEQ).unwrap();
        let rows: Vec<(usize, u64, u64)> = c.per_weight.iter().map(|w| (w.weight, w.combinations, w.invalid)).collect();
        assert_eq!(rows, [(3, 20, 4), (4, 15, 0), (5, 6, 0), (6, 1, 0)]);
        assert_eq!(c.total, 38);
    }

    #[test]
    fn census_matches_enumeration_n5() {
        let c = semianalytic_count(5, SEQ).unwrap();
        assert_eq!(c.per_weight[0].valid(), 125);
        let all = all_spanning_trees(5).unwrap();
        assert_eq!(enumerate_covered_states(&all, 5, Execution::Parallel).unwrap().total, c.total);
        for w in &c.per_weight {
            assert_eq!(w.combinations, binomial(10, w.weight));
        }
    }

    #[test]
    fn binomial_matches_pascal() {
        let mut row = vec![1u64];
        for n in 1..=21 {
            let mut next = vec![1u64; n + 1];
            for k in 1..n {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(binomial(n, k), v);
            }
        }
    }

    #[test]
    fn overlap_examples() {
        let t = |e: [(usize, usize); 3]| SpanningTree::new(4, e).unwrap();
        let a = t([(0, 1), (0, 2), (1, 3)]);
        assert_eq!(overlap_increment(&[a.clone()], &t([(0, 3), (1, 2), (2, 3)]), 4).unwrap(), 7);
        assert_eq!(overlap_increment(&[a.clone()], &t([(0, 1), (1, 2), (2, 3)]), 4).unwrap(), 6);
        assert_eq!(overlap_increment(&[a], &t([(0, 1), (0, 2), (2, 3)]), 4).unwrap(), 4);
    }

    #[test]
    fn closed_forms_on_pairs_and_triples() {
        let trees = all_spanning_trees(4).unwrap();
        let kc = 6i64;
        let p = |bits: u32| 2f64.powi((kc - bits.count_ones() as i64) as i32) as i64;
        for a in &trees {
            for b in &trees {
                let (ma, mb) = (a.mask(), b.mask());
                let two = p(mb) - p(ma | mb);
                assert_eq!(overlap_increment(&[a.clone()], b, 4).unwrap() as i64, two);
                for c in trees.iter().step_by(3) {
                    let mc = c.mask();
                    let three = p(mc) - p(ma | mc) - p(mb | mc) + p(ma | mb | mc);
                    assert_eq!(overlap_increment(&[a.clone(), b.clone()], c, 4).unwrap() as i64, three);
                }
            }
        }
    }

    #[test]
    fn random_chance_examples() {
        let r = random_chance(5, 15).unwrap();
        assert_eq!(r.p_n, 0.03125);
        assert!((r.p_k_over_n - (1.0 - (31.0f64 / 32.0).powi(3))).abs() < 1e-15);
        assert!((r.p_k_over_n - 0.09085).abs() < 1e-5);
        let s = random_chance(4, 4).unwrap();
        assert!((s.p_k_over_n - s.p_n).abs() < 1e-15);
        assert!(random_chance(0, 3).is_err());
    }

    #[test]
    fn curve_endpoints_n4() {
        let c = random_decode_curve(&table_order_n4(), 4, SEQ).unwrap();
        assert_eq!(c[0], 0.125);
        assert_eq!(*c.last().unwrap(), 38.0 / 64.0);
    }

    #[test]
    fn prufer_order_is_complete() {
        let v = trees_in_prufer_order(5).unwrap();
        assert_eq!(v.len(), 125);
        let mut s = v.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 125);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn total_is_order_invariant(seed in 0u64..1000) {
            let mut trees = table_order_n4();
            trees.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let l = enumerate_covered_states(&trees, 4, SEQ).unwrap();
            prop_assert_eq!(l.total, 38);
            prop_assert!(l.running_total.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn random_curves_are_monotone(seed in 0u64..1000, len in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let trees: Vec<_> = (0..len).map(|_| random_spanning_tree(5, &mut rng).unwrap()).collect();
            let c = random_decode_curve(&trees, 5, SEQ).unwrap();
            prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(*c.last().unwrap() <= semianalytic_count(5, SEQ).unwrap().total as f64 / 1024.0);
        }
    }
}
