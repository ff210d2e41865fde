//! Physical-to-logical decoders and their success-weight vectors.

mod bp;
mod minweight;
mod trees;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use bp::{BpParams, BpResult};
pub use minweight::{SyndromeTable, MAX_TABLE_PLAQUETTES};
pub use trees::{
    all_spanning_trees, nonoverlapping_trees, prufer_decode, random_spanning_tree, SpanningTree, TreeSet,
};

use crate::error::{Error, Result};
use crate::ising::{energy_unchecked, ground_state, IsingInstance, SpinConfig, DEGENERACY_TOL};
use crate::lhz::{LhzLayout, PhysicalState};
use crate::par::{map_range, mix_seed, Execution};
use crate::walk::SuccessWeights;

pub const DEFAULT_REPLICAS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    LowestEnergy,
    Majority,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeSource {
    Random,
    Nonoverlap,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecoderSpec {
    Entire,
    Trees {
        source: TreeSource,
        count: usize,
        include_data: bool,
        mode: Selection,
    },
    MinWeight,
    BeliefPropagation(BpParams),
}

impl DecoderSpec {
    /// Decoders whose outcome depends on a seed.
    pub fn is_randomized(&self) -> bool {
        matches!(
            self,
            DecoderSpec::MinWeight
                | DecoderSpec::Trees {
                    source: TreeSource::Random,
                    ..
                }
        )
    }

    /// Labels of the five comparison decoders plus the entire-state baseline.
    pub fn standard_set() -> Vec<DecoderSpec> {
        [
            "entire",
            "trees:random:2+1:lowest",
            "trees:nonoverlap:2+1:lowest",
            "trees:nonoverlap:2+1:majority",
            "minweight",
            "bp",
        ]
        .iter()
        .map(|s| s.parse().expect("built-in spec parses"))
        .collect()
    }
}

impl fmt::Display for DecoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoderSpec::Entire => write!(f, "entire"),
            DecoderSpec::Trees {
                source,
                count,
                include_data,
                mode,
            } => {
                let src = match source {
                    TreeSource::Random => "random",
                    TreeSource::Nonoverlap => "nonoverlap",
                };
                let sel = match mode {
                    Selection::LowestEnergy => "lowest",
                    Selection::Majority => "majority",
                };
                write!(f, "trees:{src}:{count}+{}:{sel}", *include_data as u8)
            }
            DecoderSpec::MinWeight => write!(f, "minweight"),
            DecoderSpec::BeliefPropagation(p) => {
                write!(f, "bp(llr={},iters={},damping={}", p.llr, p.max_iters, p.damping)?;
                if p.tol != BpParams::default().tol {
                    write!(f, ",tol={}", p.tol)?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for DecoderSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let s = text.trim();
        let bad = |msg: &str| Error::parse("decoder", format!("{msg} in `{text}`"));
        if s == "entire" {
            return Ok(DecoderSpec::Entire);
        }
        if s == "minweight" {
            return Ok(DecoderSpec::MinWeight);
        }
        if s == "bp" || s.starts_with("bp(") {
            let mut p = BpParams::default();
            if s != "bp" {
                let inner = s
                    .strip_prefix("bp(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| bad("unbalanced parentheses"))?;
                for kv in inner.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    let num = || v.trim().parse::<f64>().map_err(|_| bad("bad number"));
                    match k.trim() {
                        "llr" => p.llr = num()?,
                        "iters" => p.max_iters = v.trim().parse().map_err(|_| bad("bad iteration count"))?,
                        "damping" => p.damping = num()?,
                        "tol" => p.tol = num()?,
                        other => return Err(bad(&format!("unknown bp key `{other}`"))),
                    }
                }
            }
            p.validate()?;
            return Ok(DecoderSpec::BeliefPropagation(p));
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 || parts[0] != "trees" {
            return Err(bad("unknown decoder"));
        }
        let source = match parts[1] {
            "random" => TreeSource::Random,
            "nonoverlap" => TreeSource::Nonoverlap,
            _ => return Err(bad("tree source must be random or nonoverlap")),
        };
        let (k, d) = parts[2].split_once('+').ok_or_else(|| bad("expected k+0 or k+1"))?;
        let count: usize = k.parse().map_err(|_| bad("bad tree count"))?;
        let include_data = match d {
            "0" => false,
            "1" => true,
            _ => return Err(bad("data flag must be 0 or 1")),
        };
        if count == 0 && !include_data {
            return Err(bad("no candidates"));
        }
        let mode = match parts[3] {
            "lowest" => Selection::LowestEnergy,
            "majority" => Selection::Majority,
            _ => return Err(bad("selection must be lowest or majority")),
        };
        Ok(DecoderSpec::Trees {
            source,
            count,
            include_data,
            mode,
        })
    }
}

impl Serialize for DecoderSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DecoderSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderOutcome {
    pub selected: Option<SpinConfig>,
    pub candidates: Vec<SpinConfig>,
    pub trees_correct: usize,
    pub success_weight: f64,
    /// False only when belief propagation hit its iteration cap.
    pub converged: bool,
}

/// Per-instance tables shared by every decoder.
#[derive(Clone, Debug)]
pub struct DecodeContext<'a> {
    layout: &'a LhzLayout,
    instance: &'a IsingInstance,
    energies: Vec<f64>,
    ground: Vec<bool>,
    ground_energy: f64,
}

impl<'a> DecodeContext<'a> {
    pub fn new(layout: &'a LhzLayout, instance: &'a IsingInstance) -> Result<Self> {
        let n = layout.n();
        if instance.n() != n {
            return Err(Error::invalid(format!(
                "instance has n = {} but layout has n = {n}",
                instance.n()
            )));
        }
        let ground_energy = match instance.cached_ground() {
            Some(g) => g.energy,
            None => ground_state(instance)?.energy,
        };
        let energies: Vec<f64> = (0..1u32 << n)
            .map(|b| energy_unchecked(instance, SpinConfig::new(b, n)))
            .collect();
        let ground = energies
            .iter()
            .map(|e| (e - ground_energy).abs() <= DEGENERACY_TOL)
            .collect();
        Ok(DecodeContext {
            layout,
            instance,
            energies,
            ground,
            ground_energy,
        })
    }

    pub fn layout(&self) -> &LhzLayout {
        self.layout
    }

    pub fn instance(&self) -> &IsingInstance {
        self.instance
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    fn n(&self) -> usize {
        self.layout.n()
    }

    fn config(&self, bits: u32) -> SpinConfig {
        SpinConfig::new(bits, self.n())
    }

    pub fn is_ground_bits(&self, bits: u32) -> bool {
        self.ground[bits as usize]
    }

    fn outcome(&self, selected: Option<u32>, candidates: &[u32], converged: bool) -> DecoderOutcome {
        let success = selected.is_some_and(|b| self.is_ground_bits(b));
        DecoderOutcome {
            selected: selected.map(|b| self.config(b)),
            candidates: candidates.iter().map(|&b| self.config(b)).collect(),
            trees_correct: candidates.iter().filter(|&&b| self.is_ground_bits(b)).count(),
            success_weight: if success { 1.0 } else { 0.0 },
            converged,
        }
    }

    /// Accept only fully consistent states.
    pub fn decode_entire(&self, z: PhysicalState) -> DecoderOutcome {
        if self.layout.syndrome(z).is_zero() {
            let d = self.layout.data_readout(z).bits();
            self.outcome(Some(d), &[d], true)
        } else {
            self.outcome(None, &[], true)
        }
    }

    /// XOR the tree's parities out from vertex 0, then orient by energy.
    pub fn tree_readout(&self, z: PhysicalState, tree: &SpanningTree) -> SpinConfig {
        self.config(self.oriented_readout(z, &tree.oriented()))
    }

    fn oriented_readout(&self, z: PhysicalState, edges: &[(usize, usize, usize)]) -> u32 {
        let mut b = 0u32;
        for &(p, c, q) in edges {
            b |= ((b >> p ^ z.0 >> q) & 1) << c;
        }
        let mask = (1u32 << self.n()) - 1;
        let f = !b & mask;
        if self.energies[f as usize] < self.energies[b as usize] - DEGENERACY_TOL {
            f
        } else {
            b
        }
    }

    fn select(&self, cands: &[u32], data: u32, mode: Selection) -> u32 {
        match mode {
            Selection::LowestEnergy => {
                let e_min = cands
                    .iter()
                    .map(|&b| self.energies[b as usize])
                    .fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .copied()
                    .filter(|&b| self.energies[b as usize] <= e_min + DEGENERACY_TOL)
                    .min_by_key(|&b| self.config(b).lex_key())
                    .expect("nonempty candidate list")
            }
            Selection::Majority => {
                let mut out = 0u32;
                for i in 0..self.n() {
                    let ones = cands.iter().filter(|&&b| b >> i & 1 == 1).count();
                    let bit = match (2 * ones).cmp(&cands.len()) {
                        std::cmp::Ordering::Greater => 1,
                        std::cmp::Ordering::Less => 0,
                        std::cmp::Ordering::Equal => data >> i & 1,
                    };
                    out |= bit << i;
                }
                out
            }
        }
    }

    pub fn decode_trees(&self, z: PhysicalState, set: &TreeSet, mode: Selection) -> Result<DecoderOutcome> {
        let plan = TreePlan::new(self, set)?;
        let mut buf = Vec::new();
        let sel = plan.decode(self, z, mode, &mut buf);
        Ok(self.outcome(Some(sel), &buf, true))
    }

    pub fn decode_min_weight(&self, z: PhysicalState, table: &SyndromeTable) -> DecoderOutcome {
        let d = self.layout.data_readout(table.correct(self.layout, z)).bits();
        self.outcome(Some(d), &[d], true)
    }

    pub fn decode_belief_propagation(&self, z: PhysicalState, params: &BpParams) -> Result<DecoderOutcome> {
        params.validate()?;
        let r = bp::run(self.layout, z, params);
        Ok(self.outcome(Some(r.bits), &[r.bits], r.converged))
    }

    /// Success and correct-candidate count for every basis state under one tree set.
    pub fn tree_scores(&self, set: &TreeSet, mode: Selection, exec: Execution) -> Result<(Vec<bool>, Vec<u8>)> {
        let plan = TreePlan::new(self, set)?;
        let scored = chunked(exec, self.layout.state_count(), |z, buf: &mut Vec<u32>| {
            let sel = plan.decode(self, PhysicalState(z as u32), mode, buf);
            let correct = buf.iter().filter(|&&b| self.is_ground_bits(b)).count() as u8;
            (self.is_ground_bits(sel), correct)
        });
        Ok(scored.into_iter().unzip())
    }
}

/// Apply `f` to every index in fixed-size chunks, each with its own scratch buffer.
fn chunked<R, F>(exec: Execution, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut Vec<u32>) -> R + Sync + Send,
{
    const CH: usize = 1 << 12;
    let parts = map_range(exec, len.div_ceil(CH), |c| {
        let mut buf = Vec::new();
        (c * CH..((c + 1) * CH).min(len)).map(|z| f(z, &mut buf)).collect::<Vec<R>>()
    });
    parts.into_iter().flatten().collect()
}

struct TreePlan {
    oriented: Vec<Vec<(usize, usize, usize)>>,
    include_data: bool,
}

impl TreePlan {
    fn new(ctx: &DecodeContext<'_>, set: &TreeSet) -> Result<Self> {
        if set.trees.is_empty() && !set.include_data {
            return Err(Error::invalid("tree set has no candidates"));
        }
        if let Some(t) = set.trees.iter().find(|t| t.n() != ctx.n()) {
            return Err(Error::invalid(format!("tree on {} vertices for n = {}", t.n(), ctx.n())));
        }
        Ok(TreePlan {
            oriented: set.trees.iter().map(SpanningTree::oriented).collect(),
            include_data: set.include_data,
        })
    }

    fn decode(&self, ctx: &DecodeContext<'_>, z: PhysicalState, mode: Selection, buf: &mut Vec<u32>) -> u32 {
        buf.clear();
        buf.extend(self.oriented.iter().map(|e| ctx.oriented_readout(z, e)));
        let data = ctx.layout.data_readout(z).bits();
        if self.include_data {
            buf.push(data);
        }
        ctx.select(buf, data, mode)
    }
}

/// Success weights of one decoder on one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderWeights {
    pub spec: DecoderSpec,
    pub replicas: usize,
    pub weights: SuccessWeights,
    /// `by_trees_correct[c][z]`: fraction of replicas where `z` succeeds with
    /// exactly `c` correct candidates.
    pub by_trees_correct: Vec<SuccessWeights>,
    /// Uniform-measure mean weight of each replica.
    pub replica_means: Vec<f64>,
}

impl DecoderWeights {
    /// Standard error of the uniform-measure mean over replicas.
    pub fn replica_stderr(&self) -> f64 {
        let r = self.replica_means.len();
        if r < 2 {
            return 0.0;
        }
        let m = self.replica_means.iter().sum::<f64>() / r as f64;
        let var = self.replica_means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r - 1) as f64;
        (var / r as f64).sqrt()
    }
}

/// Tree set for a spec; random trees are drawn from `rng_seed`.
pub fn tree_set_for(
    n: usize,
    source: TreeSource,
    count: usize,
    include_data: bool,
    rng_seed: u64,
) -> Result<TreeSet> {
    let trees = match source {
        TreeSource::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            (0..count)
                .map(|_| random_spanning_tree(n, &mut rng))
                .collect::<Result<Vec<_>>>()?
        }
        TreeSource::Nonoverlap => {
            let all = nonoverlapping_trees(n)?;
            if count > all.len() {
                return Err(Error::invalid(format!(
                    "only {} non-overlapping trees exist for n = {n}, asked for {count}",
                    all.len()
                )));
            }
            all.into_iter().take(count).collect()
        }
    };
    Ok(TreeSet { trees, include_data })
}

/// Weight of every physical basis state. Seeded decoders average over
/// `replicas` seeds derived from `seed`; the others use a single pass.
pub fn success_weights(
    spec: &DecoderSpec,
    ctx: &DecodeContext<'_>,
    seed: u64,
    replicas: usize,
    exec: Execution,
) -> Result<DecoderWeights> {
    if replicas == 0 {
        return Err(Error::invalid("need at least one replica"));
    }
    let layout = ctx.layout;
    let len = layout.state_count();
    let reps = if spec.is_randomized() { replicas } else { 1 };
    let max_cands = match spec {
        DecoderSpec::Trees { count, include_data, .. } => count + *include_data as usize,
        _ => 1,
    };
    let mut total = vec![0u32; len];
    let mut split = vec![vec![0u32; len]; max_cands + 1];
    let mut replica_means = Vec::with_capacity(reps);
    for r in 0..reps {
        let rs = mix_seed(seed, r as u64);
        let (ok, correct): (Vec<bool>, Vec<u8>) = match spec {
            DecoderSpec::Entire => scores_single(ctx, exec, |z| ctx.decode_entire_bits(z)),
            DecoderSpec::MinWeight => {
                let table = SyndromeTable::build(layout, rs)?;
                scores_single(ctx, exec, |z| Some(ctx.layout.data_readout(table.correct(ctx.layout, z)).bits()))
            }
            DecoderSpec::BeliefPropagation(p) => {
                p.validate()?;
                scores_single(ctx, exec, |z| Some(bp::run(ctx.layout, z, p).bits))
            }
            DecoderSpec::Trees {
                source,
                count,
                include_data,
                mode,
            } => {
                let set = tree_set_for(layout.n(), *source, *count, *include_data, rs)?;
                ctx.tree_scores(&set, *mode, exec)?
            }
        };
        let mut hits = 0u64;
        for z in 0..len {
            if ok[z] {
                total[z] += 1;
                split[correct[z] as usize][z] += 1;
                hits += 1;
            }
        }
        replica_means.push(hits as f64 / len as f64);
    }
    let scale = |v: Vec<u32>| SuccessWeights {
        weights: v.into_iter().map(|c| c as f64 / reps as f64).collect(),
    };
    Ok(DecoderWeights {
        spec: *spec,
        replicas: reps,
        weights: scale(total),
        by_trees_correct: split.into_iter().map(scale).collect(),
        replica_means,
    })
}

fn scores_single<F>(ctx: &DecodeContext<'_>, exec: Execution, f: F) -> (Vec<bool>, Vec<u8>)
where
    F: Fn(PhysicalState) -> Option<u32> + Sync + Send,
{
    let v = chunked(exec, ctx.layout.state_count(), |z, _| {
        let ok = f(PhysicalState(z as u32)).is_some_and(|b| ctx.is_ground_bits(b));
        (ok, ok as u8)
    });
    v.into_iter().unzip()
}

impl DecodeContext<'_> {
    fn decode_entire_bits(&self, z: PhysicalState) -> Option<u32> {
        self.layout
            .syndrome(z)
            .is_zero()
            .then(|| self.layout.data_readout(z).bits())
    }
}
