use lhzwalk::harness::{
    quiet, run_compare_decoders, run_experiment, run_scaling, run_sweep_constraint, run_sweep_gamma, ExperimentConfig,
    ExperimentKind, GammaMode, GridSpec, InstanceSource, Manifest,
};
use lhzwalk::{generate_sk, save_instance};

fn tiny(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.instances = InstanceSource::Generate { n: 4, count: 3, seed: 9 };
    c.gamma_grid = GridSpec { start: 0.4, end: 2.0, step: 0.4 };
    c.constraint_grid = GridSpec { start: 0.0, end: 1.0, step: 0.5 };
    c.walk.t_start = 3.0;
    c.walk.t_window = 6.0;
    c.walk.dt = 0.05;
    c.heuristic_samples = 300;
    c.replicas = 3;
    c
}

#[test]
fn reruns_write_identical_bytes() {
    let cfg = tiny(ExperimentKind::SweepGamma);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let (_, out) = run_experiment(&cfg, &quiet).unwrap();
        out.write(dir, &cfg).unwrap();
    }
    let text = std::fs::read_to_string(a.path().join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f == "sweep_gamma.csv"));
    for f in files.iter().map(|f| f.as_str().unwrap()).chain(["manifest.json"]) {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let echoed = ExperimentConfig::from_json(&manifest["config"].to_string()).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn sweep_gamma_markers_and_optimum() {
    let (res, out) = run_sweep_gamma(&tiny(ExperimentKind::SweepGamma), &quiet).unwrap();
    for inst in &res.instances {
        for (_, sw) in &inst.lhz {
            let grid_best = sw.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(sw.value_opt >= grid_best);
        }
        assert!(res.grid.contains(&inst.gamma_heur_lhz));
        let svg = out.get(&format!("sweep_gamma_{}.svg", inst.uid)).unwrap();
        assert!(svg.contains("gamma_heur LHZ"));
    }
}

#[test]
fn constraint_sweep_optimal_dominates_heuristic() {
    let (res, _) = run_sweep_constraint(&tiny(ExperimentKind::SweepConstraint), &quiet).unwrap();
    assert_eq!(res.points.len(), 3);
    for p in &res.points {
        assert!(p.pbar_opt + 1e-12 >= p.pbar_heur, "{p:?}");
    }
    // C = 0 rows equal a gamma sweep on the unconstrained physical diagonal
    let mut plain = tiny(ExperimentKind::SweepGamma);
    plain.constraint = 0.0;
    plain.decoders = vec![res.decoder];
    let (sg, _) = run_sweep_gamma(&plain, &quiet).unwrap();
    for (row, inst) in res.rows.iter().filter(|r| r.constraint == 0.0).zip(&sg.instances) {
        assert_eq!(row.uid, inst.uid);
        assert_eq!(row.curve, inst.lhz[0].1.values);
        assert_eq!(row.gamma_heur, inst.gamma_heur_lhz);
    }
}

#[test]
fn comparison_invariants_on_the_grid() {
    let (res, _) = run_compare_decoders(&tiny(ExperimentKind::CompareDecoders), &quiet).unwrap();
    for inst in &res.instances {
        let entire = &inst.decoders[0].values;
        for d in &inst.decoders[1..] {
            assert!(entire.iter().zip(&d.values).all(|(a, b)| *a <= b + 1e-12), "{}", d.label);
        }
        for (one, three) in inst.direct_one.values.iter().zip(&inst.direct_three.values) {
            assert!(three >= one && *three <= 1.0);
        }
        for (d, parts) in &inst.split {
            for k in 0..res.instances[0].decoders[*d].gammas.len() {
                let total: f64 = parts.iter().map(|p| p.values[k]).sum();
                assert!((total - inst.decoders[*d].values[k]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn scaling_and_baselines() {
    let mut cfg = tiny(ExperimentKind::Scaling);
    cfg.sizes = vec![4];
    cfg.gamma_mode = GammaMode::Heuristic;
    let (res, out) = run_scaling(&cfg, &quiet).unwrap();
    assert_eq!(res.baselines[0].2, 1.0 / 16.0);
    assert!(res.mean_of(4, "entire").is_some());
    assert!(out.get("scaling_baselines.csv").unwrap().starts_with("n,p_K,p_n,p_K_over_n\n"));
    cfg.sizes = vec![6];
    assert!(run_scaling(&cfg, &quiet).is_err(), "n = 6 needs the opt-in flag");
}

#[test]
fn loaded_instances_match_generated() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for i in 0..2 {
        let inst = generate_sk(4, lhzwalk::par::mix_seed(9, i)).unwrap();
        let p = dir.path().join(format!("{i}.json"));
        save_instance(&inst, &p).unwrap();
        paths.push(p);
    }
    let mut gen = tiny(ExperimentKind::CompareDecoders);
    gen.gamma_mode = GammaMode::Heuristic;
    gen.instances = InstanceSource::Generate { n: 4, count: 2, seed: 9 };
    let mut load = gen.clone();
    load.instances = InstanceSource::Load(paths);
    let (a, _) = run_compare_decoders(&gen, &quiet).unwrap();
    let (b, _) = run_compare_decoders(&load, &quiet).unwrap();
    assert_eq!(a, b);
}

#[test]
fn manifest_parses_back() {
    let cfg = tiny(ExperimentKind::CountStates);
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run_experiment(&cfg, &quiet).unwrap();
    let m = out.write(dir.path(), &cfg).unwrap();
    let back: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(back, m);
    assert!(m.files.iter().all(|f| dir.path().join(f).exists()));
}
