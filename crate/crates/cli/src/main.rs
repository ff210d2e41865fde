use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lhzwalk::decoders::{DecoderSpec, SyndromeTable, MAX_TABLE_PLAQUETTES};
use lhzwalk::harness::plot::{render, series_from_csv, Chart, PlotStyle};
use lhzwalk::harness::{run_experiment, ExperimentConfig, ExperimentKind, GammaMode, InstanceSource};
use lhzwalk::ising::{fmt_real, generate_sk, load_instance, save_instance};
use lhzwalk::par::{mix_seed, set_threads};
use lhzwalk::LhzLayout;

#[derive(Parser)]
#[command(name = "lhzwalk", version, about = "Quantum-walk experiments on directly and LHZ embedded SK instances")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate SK instances as JSON files.
    Gen {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "instances")]
        out: PathBuf,
    },
    /// Write the LHZ layout and physical local fields of an instance.
    Embed {
        instance: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        constraint: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also dump the minimum-weight syndrome table.
        #[arg(long)]
        syndrome_table: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Success probability versus hopping rate.
    SweepGamma(ExpArgs),
    /// Success probability and gamma difference versus constraint strength.
    SweepConstraint(ExpArgs),
    /// All decoders side by side, with direct-embedding baselines.
    CompareDecoders {
        #[command(flatten)]
        exp: ExpArgs,
        /// Emit the per-correct-tree split for the two tree decoders only.
        #[arg(long)]
        split: bool,
    },
    /// Success versus number of random spanning trees.
    TreesCurve(ExpArgs),
    /// Success versus logical size with random-chance baselines.
    Scaling {
        #[command(flatten)]
        exp: ExpArgs,
        /// Sizes to run, e.g. `--sizes 4,5,6`.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Instances per size, e.g. `--size-counts 100,100,48`.
        #[arg(long, value_delimiter = ',')]
        size_counts: Option<Vec<usize>>,
    },
    /// Spanning-tree coverage counts and the validity census.
    CountStates(ExpArgs),
    /// Render a chart CSV (`series,x,y,err`) as SVG.
    Plot {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Style::Line)]
        style: Style,
        #[arg(long, default_value = "")]
        title: String,
        #[arg(long, default_value = "x")]
        x_label: String,
        #[arg(long, default_value = "y")]
        y_label: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Style {
    Line,
    Bar,
    Stacked,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Grid,
    Heuristic,
}

#[derive(Args, Clone)]
struct ExpArgs {
    /// JSON experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    allow_n6: bool,
    /// Logical size of generated instances.
    #[arg(long)]
    n: Option<usize>,
    /// Number of generated instances.
    #[arg(long)]
    count: Option<usize>,
    /// Load these instance files instead of generating.
    #[arg(long, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Decoder spec; repeat for several.
    #[arg(long = "decoder")]
    decoders: Vec<String>,
    #[arg(long)]
    constraint: Option<f64>,
    #[arg(long, value_enum)]
    gamma_mode: Option<ModeArg>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    max_trees: Option<usize>,
}

impl ExpArgs {
    fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let mut c = ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?;
                c.kind = kind;
                c
            }
            None => ExperimentConfig::new(kind),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            if let InstanceSource::Generate { seed: s, .. } = &mut cfg.instances {
                *s = seed;
            }
        }
        if !self.instances.is_empty() {
            cfg.instances = InstanceSource::Load(self.instances.clone());
        } else if let InstanceSource::Generate { n, count, .. } = &mut cfg.instances {
            if let Some(v) = self.n {
                *n = v;
            }
            if let Some(v) = self.count {
                *count = v;
            }
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if !self.decoders.is_empty() {
            cfg.decoders = self
                .decoders
                .iter()
                .map(|d| d.parse::<DecoderSpec>().with_context(|| format!("decoder `{d}`")))
                .collect::<Result<_>>()?;
        }
        if let Some(c) = self.constraint {
            cfg.constraint = c;
        }
        if let Some(m) = self.gamma_mode {
            cfg.gamma_mode = match m {
                ModeArg::Grid => GammaMode::Grid,
                ModeArg::Heuristic => GammaMode::Heuristic,
            };
        }
        if let Some(r) = self.replicas {
            cfg.replicas = r;
        }
        if let Some(k) = self.max_trees {
            cfg.max_trees = k;
        }
        cfg.allow_n6 |= self.allow_n6;
        Ok(cfg)
    }
}

fn run(cfg: ExperimentConfig) -> Result<()> {
    if cfg.allow_n6 && cfg.sizes.contains(&6) && cfg.kind == ExperimentKind::Scaling {
        // 2^21 complex amplitudes per state vector
        let mib = (1usize << 21) * 16 / (1 << 20);
        eprintln!("n = 6 enabled: about {mib} MiB per state vector, several vectors per walk");
    }
    let progress = |line: &str| eprintln!("{line}");
    let (_, outputs) = run_experiment(&cfg, &progress)?;
    let manifest = outputs.write(&cfg.output, &cfg)?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} files to {}", manifest.files.len() + 1, cfg.output.display());
    Ok(())
}

fn embed(instance: &Path, constraint: f64, out: &Path, table: bool, seed: u64) -> Result<()> {
    let inst = load_instance(instance)?;
    let layout = LhzLayout::new(inst.n())?;
    std::fs::create_dir_all(out)?;
    let stem = inst.uid().to_string();
    std::fs::write(out.join(format!("{stem}_layout.json")), layout.to_json())?;
    let mut csv = String::from("qubit,role,logical,field\n");
    for (q, &(i, j)) in layout.pairs().iter().enumerate() {
        csv += &format!("{q},coupling,{i}-{j},{}\n", fmt_real(inst.coupling(i, j)));
    }
    for (i, h) in inst.fields().iter().enumerate() {
        csv += &format!("{},data,{i},{}\n", layout.data_qubit(i), fmt_real(*h));
    }
    std::fs::write(out.join(format!("{stem}_fields.csv")), csv)?;
    let diag = layout.physical_diagonal(&inst, constraint)?;
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "{stem}: K = {} physical qubits, {} plaquettes, lowest physical energy {} at C = {}",
        layout.k(),
        layout.plaquettes().len(),
        fmt_real(min),
        fmt_real(constraint)
    );
    if table {
        if layout.plaquettes().len() > MAX_TABLE_PLAQUETTES {
            bail!("syndrome table limited to {MAX_TABLE_PLAQUETTES} plaquettes");
        }
        let t = SyndromeTable::build(&layout, seed)?;
        std::fs::write(out.join(format!("{stem}_syndromes.csv")), t.to_csv())?;
    }
    Ok(())
}

fn plot(input: &Path, out: Option<PathBuf>, style: Style, title: String, x_label: String, y_label: String) -> Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let chart = Chart {
        title,
        x_label,
        y_label,
        style: match style {
            Style::Line => PlotStyle::Line,
            Style::Bar => PlotStyle::Bar,
            Style::Stacked => PlotStyle::Stacked,
        },
        series: series_from_csv(&text)?,
        markers: vec![],
    };
    let r = render(&chart)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    let out = out.unwrap_or_else(|| input.with_extension("svg"));
    std::fs::write(&out, r.svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be positive");
        }
        set_threads(j)?;
    }
    match cli.cmd {
        Cmd::Gen { n, count, seed, out } => {
            std::fs::create_dir_all(&out)?;
            for i in 0..count {
                let inst = generate_sk(n, mix_seed(seed, i as u64))?.with_ground()?;
                let path = out.join(format!("{}.json", inst.uid()));
                save_instance(&inst, &path)?;
                println!("{}", path.display());
            }
        }
        Cmd::Embed { instance, constraint, out, syndrome_table, seed } => {
            embed(&instance, constraint, &out, syndrome_table, seed)?
        }
        Cmd::SweepGamma(a) => run(a.resolve(ExperimentKind::SweepGamma)?)?,
        Cmd::SweepConstraint(a) => run(a.resolve(ExperimentKind::SweepConstraint)?)?,
        Cmd::CompareDecoders { exp, split } => {
            let kind = if split { ExperimentKind::TreesSplit } else { ExperimentKind::CompareDecoders };
            run(exp.resolve(kind)?)?
        }
        Cmd::TreesCurve(a) => run(a.resolve(ExperimentKind::TreesCurve)?)?,
        Cmd::Scaling { exp, sizes, size_counts } => {
            let mut cfg = exp.resolve(ExperimentKind::Scaling)?;
            if let Some(s) = sizes {
                cfg.sizes = s;
            }
            if let Some(c) = size_counts {
                cfg.size_counts = c;
            }
            run(cfg)?
        }
        Cmd::CountStates(a) => run(a.resolve(ExperimentKind::CountStates)?)?,
        Cmd::Plot { input, out, style, title, x_label, y_label } => plot(&input, out, style, title, x_label, y_label)?,
    }
    Ok(())
}
