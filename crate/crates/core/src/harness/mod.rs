//! Configuration-driven experiments producing CSV tables, SVG charts and a
//! manifest.

mod experiments;
pub mod plot;
pub mod stats;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use experiments::*;

use crate::decoders::{DecoderSpec, DEFAULT_REPLICAS};
use crate::error::{Error, Result};
use crate::ising::{generate_sk, load_instance, IsingInstance};
use crate::par::mix_seed;
use crate::walk::{linspace_step, WalkParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SweepGamma,
    SweepConstraint,
    CompareDecoders,
    TreesSplit,
    Scaling,
    TreesCurve,
    CountStates,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SweepGamma => "sweep_gamma",
            ExperimentKind::SweepConstraint => "sweep_constraint",
            ExperimentKind::CompareDecoders => "compare_decoders",
            ExperimentKind::TreesSplit => "trees_split",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::TreesCurve => "trees_curve",
            ExperimentKind::CountStates => "count_states",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Generate { n: usize, count: usize, seed: u64 },
    Load(Vec<PathBuf>),
}

impl Default for InstanceSource {
    fn default() -> Self {
        InstanceSource::Generate { n: 5, count: 20, seed: 0 }
    }
}

impl InstanceSource {
    /// Instances with ground states attached.
    pub fn resolve(&self) -> Result<Vec<IsingInstance>> {
        let v = match self {
            InstanceSource::Generate { n, count, seed } => (0..*count)
                .map(|i| generate_sk(*n, mix_seed(*seed, i as u64)))
                .collect::<Result<Vec<_>>>()?,
            InstanceSource::Load(paths) => paths.iter().map(load_instance).collect::<Result<Vec<_>>>()?,
        };
        if v.is_empty() {
            return Err(Error::invalid("instance source produced no instances"));
        }
        v.into_iter()
            .map(|inst| {
                let uid = inst.uid().to_string();
                inst.with_ground().map_err(|e| e.for_instance(&uid))
            })
            .collect()
    }

    /// Same source at a different size, for multi-size experiments.
    pub fn with_size(&self, n: usize, count: usize) -> Result<InstanceSource> {
        match self {
            InstanceSource::Generate { seed, .. } => Ok(InstanceSource::Generate { n, count, seed: mix_seed(*seed, n as u64) }),
            InstanceSource::Load(_) => Err(Error::invalid("multi-size experiments need generated instances")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { start: 0.05, end: 3.2, step: 0.05 }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.end >= self.start) || !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::invalid(format!("bad grid {self:?}")));
        }
        Ok(linspace_step(self.start, self.end, self.step))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkSettings {
    pub t_start: f64,
    pub t_window: f64,
    pub dt: f64,
}

impl Default for WalkSettings {
    fn default() -> Self {
        WalkSettings { t_start: 30.0, t_window: 70.0, dt: 0.1 }
    }
}

impl WalkSettings {
    pub fn params(&self, gamma: f64, m: usize) -> WalkParams {
        WalkParams::new(gamma, m)
            .with_window(self.t_start, self.t_window)
            .with_dt(self.dt)
    }
}

/// Where decoder comparisons are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// Whole gamma grid.
    #[default]
    Grid,
    /// Only at each instance's heuristic rate for the embedding.
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub instances: InstanceSource,
    /// Constraint strength.
    pub constraint: f64,
    pub constraint_grid: GridSpec,
    pub gamma_grid: GridSpec,
    pub gamma_mode: GammaMode,
    /// Golden-section refinement of the grid argmax.
    pub refine: bool,
    pub decoders: Vec<DecoderSpec>,
    pub walk: WalkSettings,
    pub heuristic_samples: usize,
    pub replicas: usize,
    pub sizes: Vec<usize>,
    /// Instances per size for scaling; defaults to the source count.
    pub size_counts: Vec<usize>,
    pub max_trees: usize,
    pub output: PathBuf,
    pub seed: u64,
    pub allow_n6: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::SweepGamma,
            instances: InstanceSource::default(),
            constraint: 2.0,
            constraint_grid: GridSpec { start: 0.2, end: 2.2, step: 0.2 },
            gamma_grid: GridSpec::default(),
            gamma_mode: GammaMode::Grid,
            refine: true,
            decoders: DecoderSpec::standard_set(),
            walk: WalkSettings::default(),
            heuristic_samples: crate::heuristic::DEFAULT_SAMPLES,
            replicas: DEFAULT_REPLICAS,
            sizes: vec![4, 5],
            size_counts: vec![],
            max_trees: 10,
            output: PathBuf::from("out"),
            seed: 0,
            allow_n6: false,
        }
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig { kind, ..Default::default() };
        match kind {
            ExperimentKind::SweepConstraint => c.decoders = vec![DecoderSpec::Entire],
            ExperimentKind::TreesSplit => {
                c.decoders = vec![
                    "trees:random:2+1:lowest".parse().expect("valid spec"),
                    "trees:nonoverlap:2+1:lowest".parse().expect("valid spec"),
                ]
            }
            ExperimentKind::TreesCurve => c.instances = InstanceSource::Generate { n: 4, count: 20, seed: 0 },
            _ => {}
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("config", e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.constraint >= 0.0 && self.constraint.is_finite()) {
            return Err(Error::invalid(format!("constraint must be >= 0, got {}", self.constraint)));
        }
        self.gamma_grid.points()?;
        if self.gamma_grid.start <= 0.0 {
            return Err(Error::invalid("gamma grid must be positive"));
        }
        if self.kind == ExperimentKind::SweepConstraint {
            let cs = self.constraint_grid.points()?;
            if cs.iter().any(|c| !(0.0..=4.0).contains(c)) {
                return Err(Error::invalid("constraint grid must lie within [0, 4]"));
            }
        }
        if self.heuristic_samples == 0 || self.replicas == 0 {
            return Err(Error::invalid("heuristic_samples and replicas must be positive"));
        }
        let needs_decoders = matches!(
            self.kind,
            ExperimentKind::SweepGamma
                | ExperimentKind::SweepConstraint
                | ExperimentKind::CompareDecoders
                | ExperimentKind::TreesSplit
                | ExperimentKind::Scaling
        );
        if needs_decoders && self.decoders.is_empty() {
            return Err(Error::invalid("decoder list is empty"));
        }
        let n = match &self.instances {
            InstanceSource::Generate { n, .. } => Some(*n),
            InstanceSource::Load(_) => None,
        };
        let mut sizes: Vec<usize> = match self.kind {
            ExperimentKind::Scaling => {
                if self.sizes.iter().any(|s| !(4..=6).contains(s)) {
                    return Err(Error::invalid("scaling sizes must lie in {4, 5, 6}"));
                }
                self.sizes.clone()
            }
            ExperimentKind::TreesCurve => {
                if n.is_some_and(|n| !(4..=5).contains(&n)) {
                    return Err(Error::invalid("trees curve supports n in {4, 5}"));
                }
                if self.max_trees == 0 {
                    return Err(Error::invalid("max_trees must be positive"));
                }
                n.into_iter().collect()
            }
            ExperimentKind::CountStates => vec![],
            _ => n.into_iter().collect(),
        };
        sizes.retain(|&s| s >= 6);
        if !sizes.is_empty() && !self.allow_n6 {
            return Err(Error::Capability(format!(
                "n = 6 needs 2^21 amplitudes (about {} MiB per complex state); pass --allow-n6 to run it",
                (1usize << 21) * 16 >> 20
            )));
        }
        Ok(())
    }
}

/// Files and notes written by a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config: serde_json::Value,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Collects output files before they are written.
#[derive(Clone, Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    pub fn chart(&mut self, stem: &str, chart: &plot::Chart) -> Result<()> {
        let r = plot::render(chart)?;
        self.warnings.extend(r.warnings.into_iter().map(|w| format!("{stem}.svg: {w}")));
        self.add(format!("{stem}_plot.csv"), plot::chart_csv(chart));
        self.add(format!("{stem}.svg"), r.svg);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_str())
    }

    /// Write every file plus `manifest.json` under `dir`.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<Manifest> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        let manifest = Manifest {
            tool: "lhzwalk".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            experiment: config.kind.name().into(),
            config: serde_json::to_value(config).expect("config serializes"),
            files: self.files.iter().map(|(n, _)| n.clone()).collect(),
            warnings: self.warnings.clone(),
            notes: self.notes.clone(),
        };
        let p = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        Ok(manifest)
    }
}
