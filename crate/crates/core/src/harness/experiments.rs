use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::plot::{csv_field, Chart, Marker, PlotStyle, Point, Series};
use super::stats::{mean, spearman, stderr};
use super::{ExperimentConfig, ExperimentKind, GammaMode, Outputs};
use crate::combinatorics::{
    enumerate_covered_states, random_chance, random_decode_curve, semianalytic_count, table_order_n4,
};
use crate::decoders::{
    random_spanning_tree, success_weights, DecodeContext, DecoderSpec, DecoderWeights, Selection, TreeSource,
};
use crate::error::{Error, Result};
use crate::heuristic::gamma_heur;
use crate::ising::{fmt_real, IsingInstance};
use crate::lhz::LhzLayout;
use crate::par::{mix_seed, try_map_range, Execution};
use crate::walk::{evolve_multi, sweep_gamma_multi_with, trapezoid_average, GammaSweep, WalkTrajectory};

/// Progress sink for long runs; receives one line per finished unit of work.
pub type Progress<'a> = &'a (dyn Fn(&str) + Sync);

pub fn quiet(_: &str) {}

const TAG_DIRECT: u64 = 1;
const TAG_LHZ: u64 = 2;
const TAG_DECODER: u64 = 3;
const TAG_TREES: u64 = 4;

fn stream(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(master, |s, &p| mix_seed(s, p))
}

fn text_id(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn grid_value(grid: &[f64], values: &[f64], gamma: f64) -> Result<f64> {
    grid.iter()
        .position(|g| (g - gamma).abs() < 1e-12)
        .map(|i| values[i])
        .ok_or_else(|| Error::Internal(format!("gamma {gamma} is not a grid point")))
}

/// Shared per-instance setup for one constraint strength.
struct Prepared<'a> {
    idx: usize,
    inst: &'a IsingInstance,
    layout: LhzLayout,
    lhz_diag: Vec<f64>,
    direct_diag: Vec<f64>,
    direct_weights: Vec<f64>,
    heur_direct: f64,
    heur_lhz: f64,
}

impl<'a> Prepared<'a> {
    fn new(cfg: &ExperimentConfig, idx: usize, inst: &'a IsingInstance, c: f64, grid: &[f64]) -> Result<Self> {
        let n = inst.n();
        let layout = LhzLayout::new(n)?;
        let lhz_diag = layout.physical_diagonal(inst, c)?;
        let direct_diag = inst.direct_diagonal()?;
        let gs = inst.cached_ground().expect("resolved instances carry ground states");
        let mut direct_weights = vec![0.0; 1 << n];
        for (b, w) in direct_weights.iter_mut().enumerate() {
            if inst.is_ground(crate::ising::SpinConfig::new(b as u32, n), gs.energy) {
                *w = 1.0;
            }
        }
        let mut rd = ChaCha8Rng::seed_from_u64(stream(cfg.seed, &[idx as u64, TAG_DIRECT]));
        let heur_direct = gamma_heur(&direct_diag, grid, cfg.heuristic_samples, &mut rd)?;
        let mut rl = ChaCha8Rng::seed_from_u64(stream(cfg.seed, &[idx as u64, TAG_LHZ, c.to_bits()]));
        let heur_lhz = gamma_heur(&lhz_diag, grid, cfg.heuristic_samples, &mut rl)?;
        Ok(Prepared {
            idx,
            inst,
            layout,
            lhz_diag,
            direct_diag,
            direct_weights,
            heur_direct,
            heur_lhz,
        })
    }

    fn weights(&self, cfg: &ExperimentConfig, spec: &DecoderSpec) -> Result<DecoderWeights> {
        let ctx = DecodeContext::new(&self.layout, self.inst)?;
        let seed = stream(cfg.seed, &[self.idx as u64, TAG_DECODER, text_id(&spec.to_string())]);
        success_weights(spec, &ctx, seed, cfg.replicas, Execution::Sequential)
    }
}

fn resolve(cfg: &ExperimentConfig) -> Result<(Vec<IsingInstance>, Vec<f64>)> {
    cfg.validate()?;
    Ok((cfg.instances.resolve()?, cfg.gamma_grid.points()?))
}

fn with_uid<T>(uid: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.for_instance(uid))
}

fn finish_rows(header: &str, rows: &[String]) -> String {
    let mut s = String::with_capacity(rows.len() * 48);
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

fn series(label: impl Into<String>, pts: impl IntoIterator<Item = (f64, f64, Option<f64>)>) -> Series {
    Series {
        label: label.into(),
        points: pts.into_iter().map(|(x, y, err)| Point { x, y, err }).collect(),
        dashed: false,
    }
}

// ---------------------------------------------------------------- sweep gamma

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSweep {
    pub uid: String,
    pub direct: GammaSweep,
    pub gamma_heur_direct: f64,
    pub lhz: Vec<(DecoderSpec, GammaSweep)>,
    pub gamma_heur_lhz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGammaResult {
    pub grid: Vec<f64>,
    pub constraint: f64,
    pub instances: Vec<InstanceSweep>,
}

pub fn run_sweep_gamma(cfg: &ExperimentConfig, progress: Progress) -> Result<(SweepGammaResult, Outputs)> {
    let (instances, grid) = resolve(cfg)?;
    let c = cfg.constraint;
    let results = try_map_range(Execution::Parallel, instances.len(), |i| {
        let inst = &instances[i];
        with_uid(inst.uid(), (|| {
            let p = Prepared::new(cfg, i, inst, c, &grid)?;
            let params = cfg.walk.params(grid[0], inst.n()).with_exec(Execution::Sequential);
            let direct =
                sweep_gamma_multi_with(&p.direct_diag, &[&p.direct_weights], &grid, &params, cfg.refine)?.remove(0);
            let ws: Vec<DecoderWeights> = cfg.decoders.iter().map(|d| p.weights(cfg, d)).collect::<Result<_>>()?;
            let refs: Vec<&[f64]> = ws.iter().map(|w| w.weights.weights.as_slice()).collect();
            let lhz_params = cfg.walk.params(grid[0], p.layout.k()).with_exec(Execution::Sequential);
            let sweeps = sweep_gamma_multi_with(&p.lhz_diag, &refs, &grid, &lhz_params, cfg.refine)?;
            progress(&format!("sweep_gamma: {} done", inst.uid()));
            Ok(InstanceSweep {
                uid: inst.uid().to_string(),
                direct,
                gamma_heur_direct: p.heur_direct,
                lhz: cfg.decoders.iter().copied().zip(sweeps).collect(),
                gamma_heur_lhz: p.heur_lhz,
            })
        })())
    })?;
    let res = SweepGammaResult { grid, constraint: c, instances: results };
    let out = sweep_gamma_outputs(&res)?;
    Ok((res, out))
}

fn sweep_gamma_outputs(res: &SweepGammaResult) -> Result<Outputs> {
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for s in &res.instances {
        let mut emit = |emb: &str, dec: &str, sw: &GammaSweep, heur: f64| -> Result<()> {
            for (g, v) in sw.gammas.iter().zip(&sw.values) {
                rows.push(format!("{},{emb},{},{},{}", s.uid, csv_field(dec), fmt_real(*g), fmt_real(*v)));
            }
            let at_heur = grid_value(&sw.gammas, &sw.values, heur)?;
            summary.push(format!(
                "{},{emb},{},{},{},{},{},{}",
                s.uid,
                csv_field(dec),
                fmt_real(sw.gamma_opt),
                fmt_real(sw.value_opt),
                fmt_real(heur),
                fmt_real(at_heur),
                fmt_real(res.constraint)
            ));
            Ok(())
        };
        emit("direct", "direct", &s.direct, s.gamma_heur_direct)?;
        for (d, sw) in &s.lhz {
            emit("lhz", &d.to_string(), sw, s.gamma_heur_lhz)?;
        }
        let mut chart = Chart {
            title: format!("{} (C = {})", s.uid, fmt_real(res.constraint)),
            x_label: "gamma".into(),
            y_label: "mean success probability".into(),
            style: PlotStyle::Line,
            series: vec![series("direct", s.direct.gammas.iter().zip(&s.direct.values).map(|(&g, &v)| (g, v, None)))],
            markers: vec![
                Marker { label: "gamma_heur direct".into(), at: s.gamma_heur_direct, horizontal: false },
                Marker { label: "gamma_heur LHZ".into(), at: s.gamma_heur_lhz, horizontal: false },
            ],
        };
        for (d, sw) in &s.lhz {
            chart.series.push(series(d.to_string(), sw.gammas.iter().zip(&sw.values).map(|(&g, &v)| (g, v, None))));
        }
        if let Some((_, sw)) = s.lhz.first() {
            chart.markers.push(Marker { label: "gamma_opt".into(), at: sw.gamma_opt, horizontal: false });
        }
        out.chart(&format!("sweep_gamma_{}", s.uid), &chart)?;
    }
    out.add("sweep_gamma.csv", finish_rows("uid,embedding,decoder,gamma,pbar", &rows));
    out.add(
        "sweep_gamma_summary.csv",
        finish_rows("uid,embedding,decoder,gamma_opt,pbar_opt,gamma_heur,pbar_heur,constraint", &summary),
    );
    Ok(out)
}

// ------------------------------------------------------------ sweep constraint

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub uid: String,
    pub constraint: f64,
    pub gamma_heur: f64,
    pub gamma_opt: f64,
    pub pbar_heur: f64,
    pub pbar_opt: f64,
    pub gamma_diff: f64,
    #[serde(skip)]
    pub curve: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstraintPoint {
    pub constraint: f64,
    pub pbar_heur: f64,
    pub pbar_heur_err: f64,
    pub pbar_opt: f64,
    pub pbar_opt_err: f64,
    pub gamma_diff: f64,
    pub gamma_diff_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSweepResult {
    pub decoder: DecoderSpec,
    pub grid: Vec<f64>,
    pub rows: Vec<ConstraintRow>,
    pub points: Vec<ConstraintPoint>,
    /// Rank correlation of the mean gamma difference with the constraint.
    pub spearman: f64,
}

pub fn run_sweep_constraint(cfg: &ExperimentConfig, progress: Progress) -> Result<(ConstraintSweepResult, Outputs)> {
    let (instances, grid) = resolve(cfg)?;
    let cs = cfg.constraint_grid.points()?;
    let decoder = cfg.decoders[0];
    let weights = try_map_range(Execution::Parallel, instances.len(), |i| {
        let inst = &instances[i];
        with_uid(inst.uid(), Prepared::new(cfg, i, inst, 0.0, &grid).and_then(|p| p.weights(cfg, &decoder)))
    })?;
    let tasks: Vec<(usize, usize)> = (0..cs.len()).flat_map(|ci| (0..instances.len()).map(move |i| (ci, i))).collect();
    let rows = try_map_range(Execution::Parallel, tasks.len(), |t| {
        let (ci, i) = tasks[t];
        let inst = &instances[i];
        let c = cs[ci];
        with_uid(inst.uid(), (|| {
            let p = Prepared::new(cfg, i, inst, c, &grid)?;
            let params = cfg.walk.params(grid[0], p.layout.k()).with_exec(Execution::Sequential);
            let sw = sweep_gamma_multi_with(&p.lhz_diag, &[&weights[i].weights.weights], &grid, &params, cfg.refine)?
                .remove(0);
            let pbar_heur = grid_value(&grid, &sw.values, p.heur_lhz)?;
            progress(&format!("sweep_constraint: C = {} {} done", fmt_real(c), inst.uid()));
            Ok(ConstraintRow {
                uid: inst.uid().to_string(),
                constraint: c,
                gamma_heur: p.heur_lhz,
                gamma_opt: sw.gamma_opt,
                pbar_heur,
                pbar_opt: sw.value_opt,
                gamma_diff: (sw.gamma_opt - p.heur_lhz).abs(),
                curve: sw.values,
            })
        })())
    })?;
    let points: Vec<ConstraintPoint> = cs
        .iter()
        .enumerate()
        .map(|(ci, &c)| {
            let sel: Vec<&ConstraintRow> = rows[ci * instances.len()..(ci + 1) * instances.len()].iter().collect();
            let col = |f: fn(&ConstraintRow) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (h, o, d) = (col(|r| r.pbar_heur), col(|r| r.pbar_opt), col(|r| r.gamma_diff));
            ConstraintPoint {
                constraint: c,
                pbar_heur: mean(&h),
                pbar_heur_err: stderr(&h),
                pbar_opt: mean(&o),
                pbar_opt_err: stderr(&o),
                gamma_diff: mean(&d),
                gamma_diff_err: stderr(&d),
            }
        })
        .collect();
    let rho = if points.len() > 1 {
        spearman(&cs, &points.iter().map(|p| p.gamma_diff).collect::<Vec<_>>())
    } else {
        f64::NAN
    };
    let res = ConstraintSweepResult { decoder, grid, rows, points, spearman: rho };
    let out = constraint_outputs(&res)?;
    Ok((res, out))
}

fn constraint_outputs(res: &ConstraintSweepResult) -> Result<Outputs> {
    let mut out = Outputs::default();
    let rows: Vec<String> = res
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.uid,
                fmt_real(r.constraint),
                fmt_real(r.gamma_heur),
                fmt_real(r.gamma_opt),
                fmt_real(r.pbar_heur),
                fmt_real(r.pbar_opt),
                fmt_real(r.gamma_diff)
            )
        })
        .collect();
    out.add(
        "sweep_constraint.csv",
        finish_rows("uid,constraint,gamma_heur,gamma_opt,pbar_heur,pbar_opt,gamma_diff", &rows),
    );
    let mut curves = Vec::new();
    for r in &res.rows {
        for (g, v) in res.grid.iter().zip(&r.curve) {
            curves.push(format!("{},{},{},{}", r.uid, fmt_real(r.constraint), fmt_real(*g), fmt_real(*v)));
        }
    }
    out.add("sweep_constraint_curves.csv", finish_rows("uid,constraint,gamma,pbar", &curves));
    let summary: Vec<String> = res
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{}",
                fmt_real(p.constraint),
                fmt_real(p.pbar_heur),
                fmt_real(p.pbar_heur_err),
                fmt_real(p.pbar_opt),
                fmt_real(p.pbar_opt_err),
                fmt_real(p.gamma_diff),
                fmt_real(p.gamma_diff_err)
            )
        })
        .collect();
    out.add(
        "sweep_constraint_summary.csv",
        finish_rows(
            "constraint,pbar_heur,pbar_heur_stderr,pbar_opt,pbar_opt_stderr,gamma_diff,gamma_diff_stderr",
            &summary,
        ),
    );
    out.notes.push(format!("decoder: {}", res.decoder));
    out.notes.push(format!("spearman(constraint, gamma_diff) = {}", fmt_real(res.spearman)));
    let pts = |f: fn(&ConstraintPoint) -> (f64, f64)| {
        res.points.iter().map(move |p| {
            let (y, e) = f(p);
            (p.constraint, y, Some(e))
        })
    };
    out.chart(
        "sweep_constraint_pbar",
        &Chart {
            title: format!("mean success vs constraint ({})", res.decoder),
            x_label: "constraint strength C".into(),
            y_label: "ensemble mean success probability".into(),
            style: PlotStyle::Line,
            series: vec![
                series("at gamma_heur", pts(|p| (p.pbar_heur, p.pbar_heur_err))),
                series("at gamma_opt", pts(|p| (p.pbar_opt, p.pbar_opt_err))),
            ],
            markers: vec![],
        },
    )?;
    out.chart(
        "sweep_constraint_gamma_diff",
        &Chart {
            title: "gamma difference vs constraint".into(),
            x_label: "constraint strength C".into(),
            y_label: "mean |gamma_opt - gamma_heur|".into(),
            style: PlotStyle::Line,
            series: vec![series("gamma difference", pts(|p| (p.gamma_diff, p.gamma_diff_err)))],
            markers: vec![],
        },
    )?;
    Ok(out)
}

// ------------------------------------------------------------- compare decoders

/// One labelled weight vector scored on the LHZ walk.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCurve {
    pub label: String,
    /// `values[k]` at `gammas[k]`.
    pub gammas: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceComparison {
    pub uid: String,
    pub gamma_heur_direct: f64,
    pub gamma_heur_lhz: f64,
    /// Decoder curves in config order.
    pub decoders: Vec<ScoredCurve>,
    /// For every tree decoder: success split by correct-candidate count,
    /// `split[d][c]` with `c = 0..=candidates`.
    pub split: Vec<(usize, Vec<ScoredCurve>)>,
    /// Fraction of probability on states with at least two correct candidates,
    /// per tree decoder index.
    pub at_least_two: Vec<(usize, ScoredCurve)>,
    pub direct_one: ScoredCurve,
    pub direct_three: ScoredCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleValue {
    pub label: String,
    pub gamma: Option<f64>,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonResult {
    pub mode: GammaMode,
    pub constraint: f64,
    pub decoders: Vec<DecoderSpec>,
    pub instances: Vec<InstanceComparison>,
    /// Ensemble mean per decoder (heuristic mode) or per decoder and gamma (grid mode).
    pub ensemble: Vec<EnsembleValue>,
}

impl ComparisonResult {
    /// Ensemble mean for a label at heuristic rates.
    pub fn mean_of(&self, label: &str) -> Option<f64> {
        self.ensemble.iter().find(|e| e.label == label && e.gamma.is_none()).map(|e| e.mean)
    }
}

fn three_copies(t: &WalkTrajectory) -> Result<f64> {
    let p3: Vec<f64> = t.probs.iter().map(|p| 1.0 - (1.0 - p).powi(3)).collect();
    trapezoid_average(&t.times, &p3, t.t_start, t.t_start + t.t_window)
}

pub fn run_compare_decoders(cfg: &ExperimentConfig, progress: Progress) -> Result<(ComparisonResult, Outputs)> {
    let (instances, grid) = resolve(cfg)?;
    let c = cfg.constraint;
    let per = try_map_range(Execution::Parallel, instances.len(), |i| {
        let inst = &instances[i];
        with_uid(inst.uid(), compare_one(cfg, i, inst, c, &grid))
            .inspect(|_| progress(&format!("{}: {} done", cfg.kind.name(), inst.uid())))
    })?;
    let ensemble = ensemble_of(&per, cfg.gamma_mode);
    let res = ComparisonResult {
        mode: cfg.gamma_mode,
        constraint: c,
        decoders: cfg.decoders.clone(),
        instances: per,
        ensemble,
    };
    let out = compare_outputs(&res, cfg.kind)?;
    Ok((res, out))
}

fn compare_one(cfg: &ExperimentConfig, i: usize, inst: &IsingInstance, c: f64, grid: &[f64]) -> Result<InstanceComparison> {
    let p = Prepared::new(cfg, i, inst, c, grid)?;
    let ws: Vec<DecoderWeights> = cfg.decoders.iter().map(|d| p.weights(cfg, d)).collect::<Result<_>>()?;
    // weight vectors: decoders, then every split category, then >= 2 correct
    let mut vecs: Vec<Vec<f64>> = ws.iter().map(|w| w.weights.weights.clone()).collect();
    let mut split_idx: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut two_idx: Vec<(usize, usize)> = Vec::new();
    for (d, w) in ws.iter().enumerate() {
        if let DecoderSpec::Trees { .. } = w.spec {
            let mut idx = Vec::new();
            for cat in &w.by_trees_correct {
                idx.push(vecs.len());
                vecs.push(cat.weights.clone());
            }
            split_idx.push((d, idx));
            let two = at_least_two_correct(&p, cfg, &w.spec)?;
            two_idx.push((d, vecs.len()));
            vecs.push(two);
        }
    }
    let refs: Vec<&[f64]> = vecs.iter().map(Vec::as_slice).collect();
    let (lhz_gammas, direct_gammas) = match cfg.gamma_mode {
        GammaMode::Grid => (grid.to_vec(), grid.to_vec()),
        GammaMode::Heuristic => (vec![p.heur_lhz], vec![p.heur_direct]),
    };
    let mut lhz_vals: Vec<Vec<f64>> = vec![Vec::new(); vecs.len()];
    for &g in &lhz_gammas {
        let params = cfg.walk.params(g, p.layout.k()).with_exec(Execution::Sequential);
        for (k, t) in evolve_multi(&p.lhz_diag, &params, &refs)?.into_iter().enumerate() {
            lhz_vals[k].push(t.avg);
        }
    }
    let mut one = Vec::new();
    let mut three = Vec::new();
    for &g in &direct_gammas {
        let params = cfg.walk.params(g, inst.n()).with_exec(Execution::Sequential);
        let t = evolve_multi(&p.direct_diag, &params, &[&p.direct_weights])?.remove(0);
        one.push(t.avg);
        three.push(three_copies(&t)?);
    }
    let curve = |label: String, k: usize| ScoredCurve { label, gammas: lhz_gammas.clone(), values: lhz_vals[k].clone() };
    let decoders = cfg.decoders.iter().enumerate().map(|(d, s)| curve(s.to_string(), d)).collect();
    let split = split_idx
        .into_iter()
        .map(|(d, idx)| {
            let cs = idx
                .iter()
                .enumerate()
                .map(|(cat, &k)| curve(format!("{} [{cat} correct]", cfg.decoders[d]), k))
                .collect();
            (d, cs)
        })
        .collect();
    let at_least_two = two_idx
        .into_iter()
        .map(|(d, k)| (d, curve(format!("{} [>=2 correct]", cfg.decoders[d]), k)))
        .collect();
    Ok(InstanceComparison {
        uid: inst.uid().to_string(),
        gamma_heur_direct: p.heur_direct,
        gamma_heur_lhz: p.heur_lhz,
        decoders,
        split,
        at_least_two,
        direct_one: ScoredCurve { label: "direct (1 copy)".into(), gammas: direct_gammas.clone(), values: one },
        direct_three: ScoredCurve { label: "direct (3 copies)".into(), gammas: direct_gammas, values: three },
    })
}

/// Indicator (replica-averaged) of two or more correct candidates, independent
/// of the selection rule.
fn at_least_two_correct(p: &Prepared<'_>, cfg: &ExperimentConfig, spec: &DecoderSpec) -> Result<Vec<f64>> {
    let DecoderSpec::Trees { source, count, include_data, .. } = *spec else {
        return Err(Error::Internal("split requested for a non-tree decoder".into()));
    };
    let lowest = DecoderSpec::Trees { source, count, include_data, mode: Selection::LowestEnergy };
    // The seed stream depends on the spec text, so use the lowest-energy
    // variant's text for both selection modes to share the tree draws.
    let w = p.weights(cfg, &lowest)?;
    let len = w.weights.len();
    Ok((0..len).map(|z| w.by_trees_correct.iter().skip(2).map(|c| c.weights[z]).sum()).collect())
}

fn ensemble_of(per: &[InstanceComparison], mode: GammaMode) -> Vec<EnsembleValue> {
    let mut labels: Vec<Vec<&ScoredCurve>> = Vec::new();
    if let Some(first) = per.first() {
        let count = first.decoders.len()
            + first.split.iter().map(|(_, s)| s.len()).sum::<usize>()
            + first.at_least_two.len()
            + 2;
        labels = vec![Vec::new(); count];
    }
    for inst in per {
        let all: Vec<&ScoredCurve> = inst
            .decoders
            .iter()
            .chain(inst.split.iter().flat_map(|(_, s)| s.iter()))
            .chain(inst.at_least_two.iter().map(|(_, s)| s))
            .chain([&inst.direct_one, &inst.direct_three])
            .collect();
        for (slot, c) in labels.iter_mut().zip(all) {
            slot.push(c);
        }
    }
    let mut out = Vec::new();
    for curves in labels {
        let label = curves[0].label.clone();
        match mode {
            GammaMode::Heuristic => {
                let v: Vec<f64> = curves.iter().map(|c| c.values[0]).collect();
                out.push(EnsembleValue { label, gamma: None, mean: mean(&v), stderr: stderr(&v) });
            }
            GammaMode::Grid => {
                for (k, &g) in curves[0].gammas.iter().enumerate() {
                    let v: Vec<f64> = curves.iter().map(|c| c.values[k]).collect();
                    out.push(EnsembleValue { label: label.clone(), gamma: Some(g), mean: mean(&v), stderr: stderr(&v) });
                }
            }
        }
    }
    out
}

fn compare_outputs(res: &ComparisonResult, kind: ExperimentKind) -> Result<Outputs> {
    let stem = kind.name();
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    for inst in &res.instances {
        for c in inst
            .decoders
            .iter()
            .chain(inst.split.iter().flat_map(|(_, s)| s.iter()))
            .chain(inst.at_least_two.iter().map(|(_, s)| s))
            .chain([&inst.direct_one, &inst.direct_three])
        {
            for (g, v) in c.gammas.iter().zip(&c.values) {
                rows.push(format!("{},{},{},{}", inst.uid, csv_field(&c.label), fmt_real(*g), fmt_real(*v)));
            }
        }
    }
    out.add(format!("{stem}.csv"), finish_rows("uid,series,gamma,pbar", &rows));
    let ens: Vec<String> = res
        .ensemble
        .iter()
        .map(|e| {
            format!(
                "{},{},{},{},{}",
                csv_field(&e.label),
                e.gamma.map(fmt_real).unwrap_or_else(|| "heuristic".into()),
                fmt_real(e.mean),
                fmt_real(e.stderr),
                res.instances.len()
            )
        })
        .collect();
    out.add(format!("{stem}_ensemble.csv"), finish_rows("series,gamma,mean,stderr,instances", &ens));
    out.notes.push(format!("constraint: {}", fmt_real(res.constraint)));
    out.notes.push("three-copy direct baseline is 1 - (1 - P(t))^3 averaged over the window".into());
    let labels: Vec<String> = {
        let mut v: Vec<String> = Vec::new();
        for e in &res.ensemble {
            if !v.contains(&e.label) {
                v.push(e.label.clone());
            }
        }
        v
    };
    let keep = |l: &str| kind == ExperimentKind::TreesSplit || !l.contains(" correct]");
    let split_only = |l: &str| l.contains(" correct]") && !l.contains(">=2");
    match res.mode {
        GammaMode::Grid => {
            let mk = |l: &String| {
                series(
                    l.clone(),
                    res.ensemble.iter().filter(|e| &e.label == l).map(|e| (e.gamma.unwrap_or(f64::NAN), e.mean, Some(e.stderr))),
                )
            };
            let main: Vec<Series> = labels.iter().filter(|l| keep(l) && !split_only(l)).map(mk).collect();
            out.chart(
                stem,
                &Chart {
                    title: format!("decoder comparison (C = {})", fmt_real(res.constraint)),
                    x_label: "gamma".into(),
                    y_label: "ensemble mean success probability".into(),
                    style: PlotStyle::Line,
                    series: main,
                    markers: vec![],
                },
            )?;
            for (d, spec) in res.decoders.iter().enumerate() {
                let prefix = format!("{spec} [");
                let parts: Vec<Series> = labels
                    .iter()
                    .filter(|l| l.starts_with(&prefix) && split_only(l))
                    .filter(|l| !l.ends_with("[0 correct]") || matches!(spec, DecoderSpec::Trees { mode: Selection::Majority, .. }))
                    .map(mk)
                    .collect();
                if !parts.is_empty() {
                    out.chart(
                        &format!("{stem}_split_{d}"),
                        &Chart {
                            title: format!("success split by correct candidates: {spec}"),
                            x_label: "gamma".into(),
                            y_label: "ensemble mean success probability".into(),
                            style: PlotStyle::Line,
                            series: parts,
                            markers: vec![],
                        },
                    )?;
                }
            }
        }
        GammaMode::Heuristic => {
            let mut main = Vec::new();
            for (k, l) in labels.iter().filter(|l| keep(l) && !split_only(l)).enumerate() {
                if let Some(e) = res.ensemble.iter().find(|e| &e.label == l) {
                    main.push(series(l.clone(), [(k as f64, e.mean, Some(e.stderr))]));
                }
            }
            out.chart(
                stem,
                &Chart {
                    title: format!("decoder comparison at heuristic rates (C = {})", fmt_real(res.constraint)),
                    x_label: "decoder".into(),
                    y_label: "ensemble mean success probability".into(),
                    style: PlotStyle::Bar,
                    series: main,
                    markers: vec![],
                },
            )?;
            let mut stacked = Vec::new();
            for spec in res.decoders.iter().filter(|s| matches!(s, DecoderSpec::Trees { mode: Selection::LowestEnergy, .. })) {
                let prefix = format!("{spec} [");
                for l in labels.iter().filter(|l| l.starts_with(&prefix) && split_only(l)) {
                    let e = res.ensemble.iter().find(|e| &e.label == l).expect("label present");
                    let d = res.decoders.iter().position(|s| s == spec).unwrap_or(0);
                    stacked.push(series(l.clone(), [(d as f64, e.mean, None)]));
                }
            }
            if !stacked.is_empty() {
                out.chart(
                    &format!("{stem}_split"),
                    &Chart {
                        title: "success split by number of correct candidates".into(),
                        x_label: "decoder index".into(),
                        y_label: "ensemble mean success probability".into(),
                        style: PlotStyle::Stacked,
                        series: stacked,
                        markers: vec![],
                    },
                )?;
            }
        }
    }
    Ok(out)
}

// --------------------------------------------------------------------- scaling

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    pub instances: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    /// `(n, p_K, p_n, p_{K/n})` with `K` physical qubits.
    pub baselines: Vec<(usize, f64, f64, f64)>,
}

impl ScalingResult {
    pub fn mean_of(&self, n: usize, label: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n && r.label == label).map(|r| r.mean)
    }
}

pub fn run_scaling(cfg: &ExperimentConfig, progress: Progress) -> Result<(ScalingResult, Outputs)> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut baselines = Vec::new();
    let default_count = match &cfg.instances {
        super::InstanceSource::Generate { count, .. } => *count,
        super::InstanceSource::Load(p) => p.len(),
    };
    for (k, &n) in cfg.sizes.iter().enumerate() {
        let count = cfg.size_counts.get(k).copied().unwrap_or(default_count);
        let mut sub = cfg.clone();
        sub.kind = ExperimentKind::CompareDecoders;
        sub.gamma_mode = GammaMode::Heuristic;
        sub.instances = cfg.instances.with_size(n, count)?;
        let (res, _) = run_compare_decoders(&sub, progress)?;
        for e in res.ensemble.iter().filter(|e| !e.label.contains(" correct]")) {
            rows.push(ScalingRow { n, label: e.label.clone(), mean: e.mean, stderr: e.stderr, instances: count });
        }
        let big_k = LhzLayout::new(n)?.k();
        let rc = random_chance(n, big_k)?;
        baselines.push((n, rc.p_k, rc.p_n, rc.p_k_over_n));
        progress(&format!("scaling: n = {n} done"));
    }
    let res = ScalingResult { rows, baselines };
    let mut out = Outputs::default();
    let lines: Vec<String> = res
        .rows
        .iter()
        .map(|r| format!("{},{},{},{},{}", r.n, csv_field(&r.label), fmt_real(r.mean), fmt_real(r.stderr), r.instances))
        .collect();
    out.add("scaling.csv", finish_rows("n,series,mean,stderr,instances", &lines));
    let base: Vec<String> = res
        .baselines
        .iter()
        .map(|(n, a, b, c)| format!("{n},{},{},{}", fmt_real(*a), fmt_real(*b), fmt_real(*c)))
        .collect();
    out.add("scaling_baselines.csv", finish_rows("n,p_K,p_n,p_K_over_n", &base));
    let mut labels: Vec<String> = Vec::new();
    for r in &res.rows {
        if !labels.contains(&r.label) {
            labels.push(r.label.clone());
        }
    }
    let mut chart = Chart {
        title: "success vs logical size".into(),
        x_label: "logical qubits n".into(),
        y_label: "ensemble mean success probability".into(),
        style: PlotStyle::Line,
        series: labels
            .iter()
            .map(|l| {
                series(
                    l.clone(),
                    res.rows.iter().filter(|r| &r.label == l).map(|r| (r.n as f64, r.mean, Some(r.stderr))),
                )
            })
            .collect(),
        markers: vec![],
    };
    for (name, f) in [
        ("p_K", (|b: &(usize, f64, f64, f64)| b.1) as fn(&(usize, f64, f64, f64)) -> f64),
        ("p_n", |b| b.2),
        ("p_K/n", |b| b.3),
    ] {
        let mut s = series(name, res.baselines.iter().map(|b| (b.0 as f64, f(b), None)));
        s.dashed = true;
        chart.series.push(s);
    }
    out.chart("scaling", &chart)?;
    Ok((res, out))
}

// ------------------------------------------------------------------ trees curve

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreesCurvePoint {
    pub trees: usize,
    pub walk_mean: f64,
    pub walk_stderr: f64,
    pub random_chance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreesCurveResult {
    pub n: usize,
    pub points: Vec<TreesCurvePoint>,
    /// Per instance, per tree count.
    pub per_instance: Vec<(String, Vec<f64>)>,
}

/// Sequences of random trees averaged for the random-chance overlay.
pub const OVERLAY_SEQUENCES: usize = 256;

pub fn run_trees_curve(cfg: &ExperimentConfig, progress: Progress) -> Result<(TreesCurveResult, Outputs)> {
    let (instances, grid) = resolve(cfg)?;
    let n = instances[0].n();
    if instances.iter().any(|i| i.n() != n) || !(4..=5).contains(&n) {
        return Err(Error::invalid("trees curve needs instances of one size n in {4, 5}"));
    }
    let kmax = cfg.max_trees;
    // tree count k: k - 1 random trees plus the data readout
    let specs: Vec<DecoderSpec> = (1..=kmax)
        .map(|k| DecoderSpec::Trees {
            source: TreeSource::Random,
            count: k - 1,
            include_data: true,
            mode: Selection::LowestEnergy,
        })
        .collect();
    let per = try_map_range(Execution::Parallel, instances.len(), |i| {
        let inst = &instances[i];
        with_uid(inst.uid(), (|| {
            let p = Prepared::new(cfg, i, inst, cfg.constraint, &grid)?;
            let ws: Vec<DecoderWeights> = specs.iter().map(|d| p.weights(cfg, d)).collect::<Result<_>>()?;
            let refs: Vec<&[f64]> = ws.iter().map(|w| w.weights.weights.as_slice()).collect();
            let params = cfg.walk.params(p.heur_lhz, p.layout.k()).with_exec(Execution::Sequential);
            let vals: Vec<f64> = evolve_multi(&p.lhz_diag, &params, &refs)?.into_iter().map(|t| t.avg).collect();
            progress(&format!("trees_curve: {} done", inst.uid()));
            Ok((inst.uid().to_string(), vals))
        })())
    })?;
    let overlay = try_map_range(Execution::Parallel, OVERLAY_SEQUENCES, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream(cfg.seed, &[s as u64, TAG_TREES]));
        let trees = (0..kmax).map(|_| random_spanning_tree(n, &mut rng)).collect::<Result<Vec<_>>>()?;
        random_decode_curve(&trees, n, Execution::Sequential)
    })?;
    let points = (0..kmax)
        .map(|k| {
            let v: Vec<f64> = per.iter().map(|(_, vals)| vals[k]).collect();
            let o: Vec<f64> = overlay.iter().map(|c| c[k]).collect();
            TreesCurvePoint { trees: k + 1, walk_mean: mean(&v), walk_stderr: stderr(&v), random_chance: mean(&o) }
        })
        .collect::<Vec<_>>();
    let res = TreesCurveResult { n, points, per_instance: per };
    let mut out = Outputs::default();
    let lines: Vec<String> = res
        .points
        .iter()
        .map(|p| format!("{},{},{},{}", p.trees, fmt_real(p.walk_mean), fmt_real(p.walk_stderr), fmt_real(p.random_chance)))
        .collect();
    out.add("trees_curve.csv", finish_rows("trees,walk_mean,walk_stderr,random_chance", &lines));
    let mut inst_rows = Vec::new();
    for (uid, vals) in &res.per_instance {
        for (k, v) in vals.iter().enumerate() {
            inst_rows.push(format!("{uid},{},{}", k + 1, fmt_real(*v)));
        }
    }
    out.add("trees_curve_instances.csv", finish_rows("uid,trees,pbar", &inst_rows));
    out.notes.push("tree count k uses k - 1 random trees plus the data-qubit readout".into());
    out.notes.push(format!("random-chance overlay averaged over {OVERLAY_SEQUENCES} random tree sequences"));
    let mut overlay_series = series("random chance", res.points.iter().map(|p| (p.trees as f64, p.random_chance, None)));
    overlay_series.dashed = true;
    out.chart(
        "trees_curve",
        &Chart {
            title: format!("success vs number of random trees (n = {n})"),
            x_label: "number of trees".into(),
            y_label: "success probability".into(),
            style: PlotStyle::Line,
            series: vec![
                series("quantum walk", res.points.iter().map(|p| (p.trees as f64, p.walk_mean, Some(p.walk_stderr)))),
                overlay_series,
            ],
            markers: vec![],
        },
    )?;
    Ok((res, out))
}

// ----------------------------------------------------------------- count states

#[derive(Clone, Debug, PartialEq)]
pub struct CountStatesResult {
    pub table: crate::combinatorics::CountLedger,
    pub census: Vec<crate::combinatorics::ValidityCensus>,
}

pub fn run_count_states(cfg: &ExperimentConfig) -> Result<(CountStatesResult, Outputs)> {
    cfg.validate()?;
    let table = enumerate_covered_states(&table_order_n4(), 4, Execution::Parallel)?;
    let mut sizes = cfg.sizes.clone();
    sizes.retain(|&n| (3..=6).contains(&n));
    if sizes.is_empty() {
        sizes = vec![4, 5];
    }
    let census = sizes
        .iter()
        .map(|&n| semianalytic_count(n, Execution::Parallel))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::default();
    out.add("count_states_table.csv", table.to_csv());
    let mut rows = Vec::new();
    for c in &census {
        for w in &c.per_weight {
            rows.push(format!("{},{},{},{},{}", c.n, w.weight, w.combinations, w.invalid, w.valid()));
        }
    }
    out.add("count_states_census.csv", finish_rows("n,weight,combinations,invalid,valid", &rows));
    let mut totals = String::from("n,total,coupling_states,fraction\n");
    for c in &census {
        let all = 1u64 << crate::lhz::pair_count(c.n);
        let _ = writeln!(totals, "{},{},{all},{}", c.n, c.total, fmt_real(c.total as f64 / all as f64));
    }
    out.add("count_states_totals.csv", totals);
    out.chart(
        "count_states",
        &Chart {
            title: "states decodable by the first k trees (n = 4)".into(),
            x_label: "trees measured".into(),
            y_label: "covered states".into(),
            style: PlotStyle::Bar,
            series: vec![
                series("new states", table.new_states.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v as f64, None))),
                series("total", table.running_total.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v as f64, None))),
            ],
            markers: vec![],
        },
    )?;
    Ok((CountStatesResult { table, census }, out))
}

/// Outcome of any experiment kind.
#[derive(Clone, Debug, PartialEq)]
pub enum RunResult {
    SweepGamma(SweepGammaResult),
    SweepConstraint(ConstraintSweepResult),
    Comparison(ComparisonResult),
    Scaling(ScalingResult),
    TreesCurve(TreesCurveResult),
    CountStates(CountStatesResult),
}

pub fn run_experiment(cfg: &ExperimentConfig, progress: Progress) -> Result<(RunResult, Outputs)> {
    Ok(match cfg.kind {
        ExperimentKind::SweepGamma => {
            let (r, o) = run_sweep_gamma(cfg, progress)?;
            (RunResult::SweepGamma(r), o)
        }
        ExperimentKind::SweepConstraint => {
            let (r, o) = run_sweep_constraint(cfg, progress)?;
            (RunResult::SweepConstraint(r), o)
        }
        ExperimentKind::CompareDecoders | ExperimentKind::TreesSplit => {
            let (r, o) = run_compare_decoders(cfg, progress)?;
            (RunResult::Comparison(r), o)
        }
        ExperimentKind::Scaling => {
            let (r, o) = run_scaling(cfg, progress)?;
            (RunResult::Scaling(r), o)
        }
        ExperimentKind::TreesCurve => {
            let (r, o) = run_trees_curve(cfg, progress)?;
            (RunResult::TreesCurve(r), o)
        }
        ExperimentKind::CountStates => {
            let (r, o) = run_count_states(cfg)?;
            (RunResult::CountStates(r), o)
        }
    })
}
