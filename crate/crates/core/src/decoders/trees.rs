//! Spanning trees of the complete logical graph and their readout.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lhz::{pair_count, pair_index};

/// Tree on the logical vertices `0..n`, stored by its coupling-qubit edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanningTree {
    n: usize,
    /// Sorted pairs `(i, j)`, `i < j`.
    edges: Vec<(usize, usize)>,
}

impl SpanningTree {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let tree = SpanningTree { n, edges };
        tree.validate()?;
        Ok(tree)
    }

    /// Tree from a coupling-qubit mask.
    pub fn from_mask(n: usize, mask: u32) -> Result<Self> {
        let pairs = all_pairs(n);
        Self::new(n, pairs.into_iter().enumerate().filter(|(q, _)| mask >> q & 1 == 1).map(|(_, p)| p))
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.edges.len() + 1 != n {
            return Err(Error::invalid(format!(
                "a spanning tree on {n} vertices needs {} edges, got {}",
                n - 1,
                self.edges.len()
            )));
        }
        if self.edges.iter().any(|&(_, b)| b >= n) {
            return Err(Error::invalid("tree edge outside the vertex range"));
        }
        let mut uf = UnionFind::new(n);
        for &(a, b) in &self.edges {
            if !uf.union(a, b) {
                return Err(Error::invalid(format!("edge ({a},{b}) closes a cycle")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Coupling-qubit indices of the edges.
    pub fn qubits(&self) -> Vec<usize> {
        self.edges.iter().map(|&(i, j)| pair_index(self.n, i, j)).collect()
    }

    pub fn mask(&self) -> u32 {
        self.qubits().iter().fold(0, |m, &q| m | 1 << q)
    }

    /// Edges as `(parent, child, qubit)` in breadth-first order from vertex 0.
    pub fn oriented(&self) -> Vec<(usize, usize, usize)> {
        let n = self.n;
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        let mut out = Vec::with_capacity(n - 1);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    out.push((v, w, pair_index(n, v, w)));
                    queue.push_back(w);
                }
            }
        }
        out
    }

    /// Label like `01-12-23`.
    pub fn label(&self) -> String {
        self.edges
            .iter()
            .map(|(i, j)| format!("{i}{j}"))
            .collect::<Vec<_>>()
            .join("-")
    }
}

pub(crate) fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            v.push((i, j));
        }
    }
    v
}

#[derive(Clone, Debug)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    pub(crate) components: usize,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            components: n,
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merge; false if already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        self.components -= 1;
        true
    }
}

/// Decode a Prüfer sequence of length `n - 2` over `0..n`.
pub fn prufer_decode(n: usize, seq: &[usize]) -> Result<SpanningTree> {
    if n < 2 || seq.len() + 2 != n || seq.iter().any(|&v| v >= n) {
        return Err(Error::invalid(format!("bad Prüfer sequence for n = {n}")));
    }
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).expect("a leaf always exists");
        edges.push((leaf, v));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    SpanningTree::new(n, edges)
}

/// Uniform over the `n^(n-2)` labelled trees.
pub fn random_spanning_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SpanningTree> {
    if n < 3 {
        return Err(Error::invalid(format!("random trees need n >= 3, got {n}")));
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    prufer_decode(n, &seq)
}

/// Every labelled tree, by decoding all Prüfer sequences, sorted and unique.
pub fn all_spanning_trees(n: usize) -> Result<Vec<SpanningTree>> {
    if !(2..=8).contains(&n) {
        return Err(Error::Capability(format!("tree enumeration supports 2 <= n <= 8, got {n}")));
    }
    let total = n.pow((n - 2) as u32);
    let mut trees = Vec::with_capacity(total);
    let mut seq = vec![0usize; n - 2];
    for mut code in 0..total {
        for s in seq.iter_mut() {
            *s = code % n;
            code /= n;
        }
        trees.push(prufer_decode(n, &seq)?);
    }
    trees.sort();
    trees.dedup();
    Ok(trees)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeSet {
    pub trees: Vec<SpanningTree>,
    pub include_data: bool,
}

/// Pairwise-disjoint trees built line by line over the coupling qubits.
pub fn nonoverlapping_trees(n: usize) -> Result<Vec<SpanningTree>> {
    if n < 4 {
        return Err(Error::invalid(format!("non-overlapping trees need n >= 4, got {n}")));
    }
    let pairs = all_pairs(n);
    let kc = pairs.len();
    let count = kc / (n - 1);
    let lines: Vec<Vec<usize>> = (0..n)
        .map(|l| (0..kc).filter(|&q| pairs[q].0 == l || pairs[q].1 == l).collect())
        .collect();
    let mut used = vec![false; kc];
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let remaining = count - t - 1;
        let mut chosen: Vec<usize> = Vec::new();
        let mut seen_secondary = vec![false; n];
        let all_seen = |s: &[bool]| (1..n).all(|j| s[j]);
        'lines: for line in &lines {
            for &q in line {
                if all_seen(&seen_secondary) {
                    break 'lines;
                }
                let free = line.iter().filter(|&&x| !used[x] && !chosen.contains(&x)).count();
                if free <= remaining {
                    break;
                }
                if used[q] || chosen.contains(&q) {
                    continue;
                }
                let j = pairs[q].1;
                if !seen_secondary[j] {
                    seen_secondary[j] = true;
                    chosen.push(q);
                }
            }
            if all_seen(&seen_secondary) {
                break;
            }
        }
        complete_tree(n, &pairs, &lines, &used, remaining, &mut chosen)?;
        for &q in &chosen {
            used[q] = true;
        }
        out.push(SpanningTree::new(n, chosen.iter().map(|&q| pairs[q]))?);
    }
    Ok(out)
}

/// Add the lowest-index free qubits that join components, keeping at least
/// `reserve` free qubits on every line when possible.
fn complete_tree(
    n: usize,
    pairs: &[(usize, usize)],
    lines: &[Vec<usize>],
    used: &[bool],
    reserve: usize,
    chosen: &mut Vec<usize>,
) -> Result<()> {
    let mut uf = UnionFind::new(n);
    for &q in chosen.iter() {
        if !uf.union(pairs[q].0, pairs[q].1) {
            return Err(Error::Internal(format!("selected qubits already contain a cycle: {chosen:?}")));
        }
    }
    let free_on = |line: &Vec<usize>, chosen: &[usize], extra: usize| {
        line.iter()
            .filter(|&&x| !used[x] && !chosen.contains(&x) && x != extra)
            .count()
    };
    for strict in [true, false] {
        while uf.components > 1 {
            let pick = (0..pairs.len()).find(|&q| {
                if used[q] || chosen.contains(&q) {
                    return false;
                }
                let (a, b) = pairs[q];
                let mut probe = uf.clone();
                if !probe.union(a, b) {
                    return false;
                }
                !strict || [a, b].iter().all(|&l| free_on(&lines[l], chosen, q) >= reserve)
            });
            match pick {
                Some(q) => {
                    uf.union(pairs[q].0, pairs[q].1);
                    chosen.push(q);
                }
                None => break,
            }
        }
    }
    if uf.components > 1 {
        return Err(Error::Internal(format!(
            "cannot complete a disjoint spanning tree for n = {n} from {chosen:?}"
        )));
    }
    chosen.sort_unstable();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn cayley_counts() {
        assert_eq!(all_spanning_trees(3).unwrap().len(), 3);
        assert_eq!(all_spanning_trees(4).unwrap().len(), 16);
        assert_eq!(all_spanning_trees(5).unwrap().len(), 125);
        assert_eq!(all_spanning_trees(6).unwrap().len(), 1296);
    }

    #[test]
    fn invalid_edge_sets() {
        assert!(SpanningTree::new(4, [(0, 1), (1, 2), (0, 2)]).is_err());
        assert!(SpanningTree::new(4, [(0, 1), (1, 2)]).is_err());
        assert!(SpanningTree::new(4, [(0, 1), (1, 2), (2, 3)]).is_ok());
    }

    #[test]
    fn random_trees_uniform_n4() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts: HashMap<SpanningTree, usize> = HashMap::new();
        for _ in 0..16_000 {
            *counts.entry(random_spanning_tree(4, &mut rng).unwrap()).or_default() += 1;
        }
        assert_eq!(counts.len(), 16);
        let bound = 5.0 * (1000.0f64 * 15.0 / 16.0).sqrt();
        for (t, c) in counts {
            assert!((c as f64 - 1000.0).abs() <= bound, "{} seen {c} times", t.label());
        }
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200 {
            seen.insert(random_spanning_tree(3, &mut rng).unwrap());
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn nonoverlapping_examples() {
        let t4 = nonoverlapping_trees(4).unwrap();
        let labels: Vec<String> = t4.iter().map(|t| t.label()).collect();
        assert_eq!(labels, ["01-02-13", "03-12-23"]);
        for (n, count) in [(4, 2), (5, 2), (6, 3), (7, 3)] {
            let trees = nonoverlapping_trees(n).unwrap();
            assert_eq!(trees.len(), count, "n={n}");
            let mut all = 0u32;
            for t in &trees {
                assert_eq!(all & t.mask(), 0, "overlap at n={n}");
                all |= t.mask();
            }
            assert_eq!(all.count_ones() as usize, count * (n - 1));
        }
    }

    #[test]
    fn oriented_covers_all_vertices() {
        let t = SpanningTree::new(5, [(0, 3), (3, 4), (1, 4), (2, 4)]).unwrap();
        let o = t.oriented();
        assert_eq!(o.len(), 4);
        assert_eq!(o[0].0, 0);
        let mut reached = vec![false; 5];
        reached[0] = true;
        for (p, c, _) in o {
            assert!(reached[p]);
            reached[c] = true;
        }
        assert!(reached.iter().all(|&r| r));
    }

    #[test]
    fn mask_round_trip() {
        for t in all_spanning_trees(5).unwrap() {
            assert_eq!(SpanningTree::from_mask(5, t.mask()).unwrap(), t);
        }
    }
}
