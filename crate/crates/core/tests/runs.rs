use std::f64::consts::PI;
use std::path::PathBuf;

use fch::adaptive::AdaptiveConfig;
use fch::energy::dissipation_check;
use fch::experiments::{
    compare_step_counts, reference_solution, run_and_persist, run_simulation, RunConfig,
    RunManifest, Stepping, InitialCondition, MANIFEST_FILE, SERIES_FILE,
};
use fch::kernels::{max_stable_step, RestrictionMode};
use fch::{io, ModelParams, NonlinearSolveConfig};

fn example1(alpha: f64, m: usize) -> ModelParams {
    ModelParams {
        alpha,
        epsilon: 0.1f64.sqrt(),
        kappa: 1.0,
        length: 2.0 * PI,
        modes: m,
    }
}

fn example2(alpha: f64, m: usize) -> ModelParams {
    ModelParams {
        alpha,
        epsilon: 0.01,
        kappa: 0.01,
        length: 2.0 * PI,
        modes: m,
    }
}

fn config(model: ModelParams, stepping: Stepping, horizon: f64, initial: InitialCondition) -> RunConfig {
    RunConfig {
        model,
        stepping,
        horizon,
        initial,
        solver: NonlinearSolveConfig::default(),
        restriction: RestrictionMode::Warn,
        output: None,
    }
}

fn random_init() -> InitialCondition {
    InitialCondition::Random {
        lo: -0.1,
        hi: 0.1,
        seed: 1,
    }
}

#[test]
fn example1_short_uniform_run() {
    let cfg = config(example1(0.4, 64), Stepping::Uniform { tau: 1e-3 }, 0.01, InitialCondition::SinProduct);
    let out = run_simulation(&cfg).unwrap();
    assert_eq!(out.levels(), 10);
    let m0 = out.records[0].mass;
    assert!(out.records.iter().all(|r| (r.mass - m0).abs() <= 1e-10 * m0.abs() + 1e-12));
}

#[test]
fn replaying_a_manifest_reproduces_outputs_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let mut cfg = config(
        example2(0.6, 32),
        Stepping::RandomMesh { n: 40, seed: 9 },
        0.2,
        random_init(),
    );
    cfg.output = Some(first.clone());
    run_and_persist(&cfg).unwrap();

    let manifest: RunManifest = io::read_json(&first.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.mesh_seed, Some(9));
    assert_eq!(manifest.initial_seed, Some(1));
    let second = dir.path().join("second");
    let mut replay = manifest.config;
    replay.output = Some(second.clone());
    run_and_persist(&replay).unwrap();

    for name in [SERIES_FILE, "mesh.txt", "final.bin"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let series = io::read_series_csv(&first.join(SERIES_FILE)).unwrap();
    assert_eq!(series.len(), 41);
}

#[test]
fn mesh_file_stepping_matches_random_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = fch::adaptive::random_mesh(20, 0.1, 4).unwrap();
    let path = dir.path().join("mesh.txt");
    io::write_mesh(&path, &mesh).unwrap();
    let a = run_simulation(&config(example1(0.5, 16), Stepping::MeshFile { path }, 0.1, InitialCondition::SinProduct)).unwrap();
    let b = run_simulation(&config(
        example1(0.5, 16),
        Stepping::RandomMesh { n: 20, seed: 4 },
        0.1,
        InitialCondition::SinProduct,
    ))
    .unwrap();
    assert_eq!(a.final_field, b.final_field);
}

#[test]
fn controller_refines_during_fast_transients() {
    let cfg = config(
        example2(1.0, 64),
        Stepping::Adaptive(AdaptiveConfig::default()),
        1.0,
        random_init(),
    );
    let out = run_simulation(&cfg).unwrap();
    let early_min = out
        .records
        .iter()
        .skip(1)
        .filter(|r| r.t <= 0.5)
        .map(|r| r.tau)
        .fold(f64::INFINITY, f64::min);
    assert!(early_min < 0.1 * AdaptiveConfig::default().tau_max);
    let steps = out.mesh.steps();
    let max = steps.iter().cloned().fold(0.0, f64::max);
    assert!(max > 10.0 * steps[0], "steps should vary visibly");
    assert!(out.mesh.max_ratio() <= 4.0 * (1.0 + 1e-12));
}

#[test]
fn oversized_steps_are_flagged_against_the_restriction() {
    let model = ModelParams {
        alpha: 0.1,
        epsilon: 0.01,
        kappa: 1.0,
        length: 2.0 * PI,
        modes: 16,
    };
    let bound = max_stable_step(1.0, 1.0, model.epsilon, model.kappa, 1.0, model.alpha);
    let tau = 100.0 * bound;
    let cfg = config(model, Stepping::Uniform { tau }, 5.0 * tau, random_init());
    let out = run_simulation(&cfg).unwrap();
    assert_eq!(out.restriction_violations, 5);
    assert!(out.records[1..].iter().all(|r| !r.restriction_satisfied));
    let report = dissipation_check(&out.records);
    assert_eq!(report.unexplained().count(), 0);
}

#[test]
fn modified_energy_never_below_energy() {
    let cfg = config(
        example2(0.4, 32),
        Stepping::RandomMesh { n: 30, seed: 2 },
        0.5,
        random_init(),
    );
    let out = run_simulation(&cfg).unwrap();
    for r in &out.records {
        assert!(r.modified_energy >= r.energy);
    }
    assert_eq!(out.records.last().unwrap().modified_energy, out.records.last().unwrap().energy);
}

#[test]
fn cached_reference_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(example1(0.5, 16), Stepping::Uniform { tau: 0.01 }, 0.05, InitialCondition::SinProduct);
    let a = reference_solution(&cfg, 1e-3, Some(dir.path())).unwrap();
    let files: Vec<PathBuf> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 2);
    let b = reference_solution(&cfg, 1e-3, Some(dir.path())).unwrap();
    assert_eq!(a, b);
    assert_eq!(fch::norm_l2(&a.sub(&b)), 0.0);
}

#[test]
fn adaptive_needs_fewer_levels_than_uniform() {
    let mut cfgs = Vec::new();
    for alpha in [0.5, 1.0] {
        cfgs.push(("uniform".to_string(), config(example2(alpha, 32), Stepping::Uniform { tau: 1e-3 }, 2.0, random_init())));
        cfgs.push((
            "adaptive".to_string(),
            config(example2(alpha, 32), Stepping::Adaptive(AdaptiveConfig::default()), 2.0, random_init()),
        ));
    }
    let rows = compare_step_counts(&cfgs, 2).unwrap();
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].levels, 2000);
        assert!(pair[1].levels < pair[0].levels);
    }
}
