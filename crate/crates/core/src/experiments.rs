//! Simulation driver and the experiment studies built on it: convergence
//! tables on random meshes, energy-decay studies and step-count comparisons.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{next_step, random_initial_field, random_mesh, AdaptiveConfig};
use crate::energy::{
    discrete_energy, dissipation_check, increment_hneg_sq, modified_energy_coefficient,
    restriction_holds, DissipationReport, EnergyReport,
};
use crate::error::{Error, Result};
use crate::grid::{norm_l2, GridField, SpectralGrid};
use crate::io;
use crate::kernels::{clamp_to_restriction, restriction_scale, RestrictionMode, TimeMesh, R_USER_DEFAULT};
use crate::stepper::{ModelParams, NonlinearSolveConfig, SolverState, Stepper};

/// Relative mass drift tolerated at every level.
pub const MASS_TOLERANCE: f64 = 1e-10;
/// Absolute floor added to the mass tolerance.
pub const MASS_FLOOR: f64 = 1e-12;
/// Step halvings attempted after a nonconvergent solve.
pub const MAX_RETRIES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Stepping {
    Uniform { tau: f64 },
    RandomMesh { n: usize, seed: u64 },
    Adaptive(AdaptiveConfig),
    MeshFile { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `sin(nu x) sin(nu y)`; `sin x sin y` on `L = 2 pi`.
    SinProduct,
    Random { lo: f64, hi: f64, seed: u64 },
    Snapshot { path: PathBuf },
}

impl InitialCondition {
    pub fn build(&self, grid: &SpectralGrid) -> Result<GridField> {
        match self {
            InitialCondition::SinProduct => {
                let nu = grid.nu();
                Ok(grid.sample(|x, y| (nu * x).sin() * (nu * y).sin()))
            }
            InitialCondition::Random { lo, hi, seed } => random_initial_field(grid, *lo, *hi, *seed),
            InitialCondition::Snapshot { path } => {
                let (meta, field) = io::read_snapshot(path)?;
                if meta.modes != grid.modes() || meta.length != grid.length() {
                    return Err(Error::Config(format!(
                        "snapshot {} is M = {}, L = {}; run expects M = {}, L = {}",
                        path.display(),
                        meta.modes,
                        meta.length,
                        grid.modes(),
                        grid.length()
                    )));
                }
                Ok(field)
            }
        }
    }

    fn cache_key(&self) -> Option<String> {
        match self {
            InitialCondition::SinProduct => Some("sin".into()),
            InitialCondition::Random { lo, hi, seed } => {
                Some(format!("rand{:016x}{:016x}s{seed}", lo.to_bits(), hi.to_bits()))
            }
            InitialCondition::Snapshot { .. } => None,
        }
    }
}

/// Full description of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub stepping: Stepping,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub initial: InitialCondition,
    #[serde(default)]
    pub solver: NonlinearSolveConfig,
    #[serde(default)]
    pub restriction: RestrictionMode,
    /// Directory for the CSV series, mesh, snapshot and manifest.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.solver.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {}", self.horizon)));
        }
        match &self.stepping {
            Stepping::Uniform { tau } if !(*tau > 0.0) => {
                Err(Error::Config(format!("uniform tau must be positive, got {tau}")))
            }
            Stepping::RandomMesh { n, .. } if *n < 2 => {
                Err(Error::Config(format!("random mesh needs N >= 2, got {n}")))
            }
            Stepping::Adaptive(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }

    /// Ratio cap assumed for the following step when enforcing the energy
    /// restriction.
    fn restriction_r_user(&self) -> f64 {
        match &self.stepping {
            Stepping::Adaptive(cfg) => cfg.r_user,
            _ => R_USER_DEFAULT,
        }
    }
}

/// Number of levels a uniform run of step `tau` takes to reach `horizon`.
pub fn uniform_level_count(horizon: f64, tau: f64) -> usize {
    ((horizon / tau) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Uniform steps of size `tau`; the last one is shortened to land on `horizon`.
pub fn uniform_mesh(horizon: f64, tau: f64) -> Result<TimeMesh> {
    let n = uniform_level_count(horizon, tau);
    let mut steps = vec![tau; n];
    let last = horizon - tau * (n - 1) as f64;
    steps[n - 1] = last;
    TimeMesh::from_steps(&steps)
}

enum Policy {
    Prescribed { steps: Vec<f64>, index: usize, remaining: f64 },
    Adaptive { cfg: AdaptiveConfig, horizon: f64 },
}

impl Policy {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let prescribed = |mesh: TimeMesh| {
            let steps = mesh.steps().to_vec();
            let remaining = steps[0];
            Policy::Prescribed {
                steps,
                index: 0,
                remaining,
            }
        };
        Ok(match &cfg.stepping {
            Stepping::Uniform { tau } => prescribed(uniform_mesh(cfg.horizon, *tau)?),
            Stepping::RandomMesh { n, seed } => prescribed(random_mesh(*n, cfg.horizon, *seed)?),
            Stepping::MeshFile { path } => prescribed(io::read_mesh(path)?),
            Stepping::Adaptive(a) => Policy::Adaptive {
                cfg: *a,
                horizon: cfg.horizon,
            },
        })
    }

    fn finished(&self, t: f64) -> bool {
        match self {
            Policy::Prescribed { steps, index, .. } => *index >= steps.len(),
            Policy::Adaptive { horizon, .. } => t >= *horizon * (1.0 - 1e-14),
        }
    }

    fn propose(&self, state: &SolverState) -> f64 {
        match self {
            Policy::Prescribed { remaining, .. } => *remaining,
            Policy::Adaptive { cfg, .. } => match &state.phi_prev2 {
                None => cfg.tau_min,
                Some(prev2) => {
                    let tau_n = state.mesh.tau(state.level());
                    next_step(&state.phi_prev, prev2, tau_n, cfg)
                }
            },
        }
    }

    /// Shortens `tau` so it does not overshoot the horizon.
    fn clip(&self, t: f64, tau: f64) -> f64 {
        match self {
            Policy::Prescribed { .. } => tau,
            Policy::Adaptive { horizon, .. } => {
                let left = horizon - t;
                if tau >= left * (1.0 - 1e-12) {
                    left
                } else {
                    tau
                }
            }
        }
    }

    fn min_step(&self) -> f64 {
        match self {
            Policy::Prescribed { .. } => 0.0,
            Policy::Adaptive { cfg, .. } => cfg.tau_min,
        }
    }

    fn accept(&mut self, tau: f64) {
        if let Policy::Prescribed {
            steps,
            index,
            remaining,
        } = self
        {
            if tau >= *remaining {
                *index += 1;
                if *index < steps.len() {
                    *remaining = steps[*index];
                }
            } else {
                *remaining -= tau;
            }
        }
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    pub records: Vec<EnergyReport>,
    pub mesh: TimeMesh,
    pub final_field: GridField,
    pub total_iterations: usize,
    /// Step halvings after nonconvergent solves.
    pub retries: usize,
    pub restriction_violations: usize,
    pub wall_time_s: f64,
}

impl RunOutput {
    pub fn dissipation(&self) -> DissipationReport {
        dissipation_check(&self.records)
    }

    pub fn levels(&self) -> usize {
        self.mesh.len()
    }

    pub fn final_energy(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.energy)
    }

    pub fn final_time(&self) -> f64 {
        self.mesh.time(self.mesh.len())
    }
}

/// Runs one simulation in memory. Use [`write_run_outputs`] to persist it.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let stepper = Stepper::new(cfg.model, cfg.solver)?;
    let grid = stepper.grid().clone();
    let params = cfg.model;
    let phi0 = cfg.initial.build(&grid)?;
    let mass0 = phi0.mass();
    let mass_tol = MASS_TOLERANCE * mass0.abs() + MASS_FLOOR;
    let r_user = cfg.restriction_r_user();
    let scale = restriction_scale(params.epsilon, params.kappa, grid.nu(), params.alpha);

    let mut policy = Policy::new(cfg)?;
    let mut state = SolverState::initial(phi0);
    let e0 = discrete_energy(&grid, &state.phi_prev, &params)?;
    let mut records = vec![EnergyReport {
        step_index: 0,
        t: 0.0,
        tau: 0.0,
        ratio: 0.0,
        mass: mass0,
        energy: e0,
        modified_energy: e0,
        iterations: 0,
        restriction_satisfied: true,
    }];
    // ||d_tau phi^k||^2_{-alpha} of the latest level, used once tau_{k+1} is known
    let mut last_increment = 0.0;
    let mut total_iterations = 0;
    let mut retries = 0;
    let mut violations = 0;

    while !policy.finished(state.time()) {
        let t = state.time();
        let tau_prev = (state.level() > 0).then(|| state.mesh.tau(state.level()));
        let mut tau = policy.propose(&state);
        if cfg.restriction == RestrictionMode::Enforce {
            tau = clamp_to_restriction(tau, tau_prev, r_user, scale).max(policy.min_step().min(tau));
        }
        tau = policy.clip(t, tau);

        let mut attempt = 0;
        let (phi_next, iterations) = loop {
            match stepper.step(&state, tau) {
                Ok(done) => break done,
                Err(Error::NonConvergence { iterations, residual }) => {
                    let floor = policy.min_step();
                    if attempt >= MAX_RETRIES || tau <= floor {
                        return Err(Error::NonConvergence { iterations, residual });
                    }
                    attempt += 1;
                    retries += 1;
                    tau = (0.5 * tau).max(floor);
                    debug!("level {}: nonconvergent solve, retrying with tau = {tau:e}", state.level() + 1);
                }
                Err(other) => return Err(other),
            }
        };
        total_iterations += iterations;
        policy.accept(tau);

        let level = state.level() + 1;
        let mass = phi_next.mass();
        let drift = (mass - mass0).abs();
        if drift > mass_tol || !phi_next.is_finite() {
            return Err(Error::MassDrift {
                step: level,
                drift,
                tolerance: mass_tol,
            });
        }

        // finalize level - 1 now that tau_level is fixed
        if level >= 2 {
            let prev = records.last_mut().expect("previous record");
            prev.modified_energy =
                prev.energy + modified_energy_coefficient(prev.tau, tau, params.kappa) * last_increment;
            let ok = restriction_holds(prev.tau, prev.ratio, tau / prev.tau, &params, grid.nu());
            prev.restriction_satisfied = ok;
            if !ok {
                violations += 1;
                if cfg.restriction == RestrictionMode::Warn && violations == 1 {
                    warn!(
                        "step {} (tau = {:e}, r = {:.3}) violates the energy step restriction",
                        prev.step_index, prev.tau, prev.ratio
                    );
                }
            }
        }

        last_increment = increment_hneg_sq(&grid, &phi_next, &state.phi_prev, tau, params.alpha)?;
        let energy = discrete_energy(&grid, &phi_next, &params)?;
        let ratio = tau_prev.map_or(0.0, |p| tau / p);
        records.push(EnergyReport {
            step_index: level,
            t: t + tau,
            tau,
            ratio,
            mass,
            energy,
            modified_energy: energy,
            iterations,
            restriction_satisfied: true,
        });
        state.advance(phi_next, tau)?;
    }

    // last level: r_{N+1} = 0 closes the modified energy and the restriction
    if let Some(last) = records.last_mut() {
        if last.step_index >= 1 {
            last.modified_energy = last.energy;
            let ok = restriction_holds(last.tau, last.ratio, 0.0, &params, grid.nu());
            last.restriction_satisfied = ok;
            if !ok {
                violations += 1;
            }
        }
    }
    if violations > 0 && cfg.restriction == RestrictionMode::Warn {
        warn!("{violations} of {} steps violate the energy step restriction", state.level());
    }

    Ok(RunOutput {
        config: cfg.clone(),
        records,
        mesh: state.mesh.clone(),
        final_field: state.phi_prev,
        total_iterations,
        retries,
        restriction_violations: violations,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Manifest written next to every run's outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub mesh_seed: Option<u64>,
    pub initial_seed: Option<u64>,
    pub levels: usize,
    pub final_time: f64,
    pub total_iterations: usize,
    pub retries: usize,
    pub restriction_violations: usize,
    pub wall_time_s: f64,
    pub version: String,
}

impl RunManifest {
    pub fn from_output(out: &RunOutput) -> Self {
        let mesh_seed = match out.config.stepping {
            Stepping::RandomMesh { seed, .. } => Some(seed),
            _ => None,
        };
        let initial_seed = match out.config.initial {
            InitialCondition::Random { seed, .. } => Some(seed),
            _ => None,
        };
        RunManifest {
            config: out.config.clone(),
            mesh_seed,
            initial_seed,
            levels: out.levels(),
            final_time: out.final_time(),
            total_iterations: out.total_iterations,
            retries: out.retries,
            restriction_violations: out.restriction_violations,
            wall_time_s: out.wall_time_s,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

pub const SERIES_FILE: &str = "series.csv";
pub const MESH_FILE: &str = "mesh.txt";
pub const SNAPSHOT_STEM: &str = "final";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `series.csv`, `mesh.txt`, `final.bin`/`final.json` and
/// `manifest.json` into `dir`.
pub fn write_run_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    io::ensure_dir(dir)?;
    io::write_series_csv(&dir.join(SERIES_FILE), &out.records)?;
    io::write_mesh(&dir.join(MESH_FILE), &out.mesh)?;
    let m = &out.config.model;
    let meta = io::SnapshotMeta {
        modes: m.modes,
        length: m.length,
        time: out.final_time(),
        alpha: m.alpha,
        epsilon: m.epsilon,
        kappa: m.kappa,
        step_index: out.levels(),
    };
    io::write_snapshot(&dir.join(SNAPSHOT_STEM), &out.final_field, &meta)?;
    io::write_json(&dir.join(MANIFEST_FILE), &RunManifest::from_output(out))
}

/// Runs `cfg` and writes its outputs if `cfg.output` is set.
pub fn run_and_persist(cfg: &RunConfig) -> Result<RunOutput> {
    let out = run_simulation(cfg)?;
    if let Some(dir) = &cfg.output {
        write_run_outputs(dir, &out)?;
    }
    Ok(out)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// One row of a convergence table. `order` compares this row with the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    #[serde(rename = "eN")]
    pub error: f64,
    pub order: Option<f64>,
    pub max_ratio: f64,
    pub max_step: f64,
}

/// `log(e(N) / e(2N)) / log(tau(N) / tau(2N))`.
pub fn convergence_order(e_coarse: f64, e_fine: f64, tau_coarse: f64, tau_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (tau_coarse / tau_fine).ln()
}

#[derive(Clone, Debug)]
pub struct ConvergenceSettings {
    pub ns: Vec<usize>,
    pub ref_tau: f64,
    /// Mesh seed for step count `N` is `base_seed + N`.
    pub base_seed: u64,
    pub workers: usize,
    /// Directory caching reference solutions.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        ConvergenceSettings {
            ns: vec![32, 64, 128, 256],
            ref_tau: 1e-4,
            base_seed: 2024,
            workers: 4,
            cache_dir: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub alpha: f64,
    pub ref_tau: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn csv(&self) -> String {
        let mut out = String::from("N,seed,eN,order,max_ratio,max_step\n");
        for r in &self.rows {
            let order = r.order.map_or(String::new(), |o| format!("{o:.16e}"));
            out.push_str(&format!(
                "{},{},{:.16e},{},{:.16e},{:.16e}\n",
                r.n, r.seed, r.error, order, r.max_ratio, r.max_step
            ));
        }
        out
    }

    pub fn text(&self) -> String {
        let mut out = format!("alpha = {}\n{:>6} {:>12} {:>8} {:>12}\n", self.alpha, "N", "e(N)", "Order", "max r_k");
        for r in &self.rows {
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.2}"));
            out.push_str(&format!("{:>6} {:>12.3e} {:>8} {:>12.2}\n", r.n, r.error, order, r.max_ratio));
        }
        out
    }
}

fn reference_cache_path(dir: &Path, cfg: &RunConfig, ref_tau: f64) -> Option<PathBuf> {
    let init = cfg.initial.cache_key()?;
    let m = &cfg.model;
    let name = format!(
        "ref_M{}_L{:016x}_a{:016x}_e{:016x}_k{:016x}_T{:016x}_dt{:016x}_tol{:016x}_{init}",
        m.modes,
        m.length.to_bits(),
        m.alpha.to_bits(),
        m.epsilon.to_bits(),
        m.kappa.to_bits(),
        cfg.horizon.to_bits(),
        ref_tau.to_bits(),
        cfg.solver.tol.to_bits(),
    );
    Some(dir.join(name))
}

/// Uniform-step reference solution at `cfg.horizon`, read from or stored in
/// `cache_dir` when given.
pub fn reference_solution(cfg: &RunConfig, ref_tau: f64, cache_dir: Option<&Path>) -> Result<GridField> {
    let cache = cache_dir.and_then(|d| reference_cache_path(d, cfg, ref_tau));
    if let Some(path) = &cache {
        if path.with_extension("bin").exists() || io::snapshot_stem(path).exists() {
            if let Ok((_, field)) = io::read_snapshot(path) {
                return Ok(field);
            }
        }
    }
    let mut rcfg = cfg.clone();
    rcfg.stepping = Stepping::Uniform { tau: ref_tau };
    rcfg.output = None;
    let out = run_simulation(&rcfg)?;
    if let (Some(path), Some(dir)) = (&cache, cache_dir) {
        io::ensure_dir(dir)?;
        let m = &cfg.model;
        let meta = io::SnapshotMeta {
            modes: m.modes,
            length: m.length,
            time: out.final_time(),
            alpha: m.alpha,
            epsilon: m.epsilon,
            kappa: m.kappa,
            step_index: out.levels(),
        };
        io::write_snapshot(path, &out.final_field, &meta)?;
    }
    Ok(out.final_field)
}

/// Errors against a uniform reference on fresh random meshes, one per `N`.
pub fn convergence_study(base: &RunConfig, settings: &ConvergenceSettings) -> Result<ConvergenceTable> {
    base.validate()?;
    if settings.ns.is_empty() {
        return Err(Error::Config("convergence study needs at least one N".into()));
    }
    let pool = pool(settings.workers)?;
    let (reference, runs) = pool.install(|| {
        rayon::join(
            || reference_solution(base, settings.ref_tau, settings.cache_dir.as_deref()),
            || {
                settings
                    .ns
                    .par_iter()
                    .map(|&n| {
                        let seed = settings.base_seed.wrapping_add(n as u64);
                        let mut cfg = base.clone();
                        cfg.stepping = Stepping::RandomMesh { n, seed };
                        cfg.output = None;
                        run_simulation(&cfg).map(|out| (n, seed, out))
                    })
                    .collect::<Result<Vec<_>>>()
            },
        )
    });
    let reference = reference?;
    let runs = runs?;
    let mut rows: Vec<ConvergenceRow> = runs
        .iter()
        .map(|(n, seed, out)| ConvergenceRow {
            n: *n,
            seed: *seed,
            error: norm_l2(&out.final_field.sub(&reference)),
            order: None,
            max_ratio: out.mesh.max_ratio(),
            max_step: out.mesh.max_step(),
        })
        .collect();
    rows.sort_by_key(|r| r.n);
    for i in 0..rows.len().saturating_sub(1) {
        let (a, b) = (&rows[i], &rows[i + 1]);
        rows[i].order = Some(convergence_order(a.error, b.error, a.max_step, b.max_step));
    }
    Ok(ConvergenceTable {
        alpha: base.model.alpha,
        ref_tau: settings.ref_tau,
        rows,
    })
}

/// Summary of one energy-study run.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyStudyRow {
    pub alpha: f64,
    pub levels: usize,
    pub final_energy: f64,
    pub final_modified_energy: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub dissipation_flags: usize,
    pub unexplained_flags: usize,
    pub max_mass_drift: f64,
    pub restriction_violations: usize,
    /// First time the energy is within 1% of its final value (relative to
    /// the total drop).
    pub plateau_time: f64,
    #[serde(skip)]
    pub records: Vec<EnergyReport>,
}

fn plateau_time(records: &[EnergyReport]) -> f64 {
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return f64::NAN;
    };
    let drop = first.energy - last.energy;
    if drop <= 0.0 {
        return 0.0;
    }
    records
        .iter()
        .find(|r| r.energy - last.energy <= 0.01 * drop)
        .map_or(last.t, |r| r.t)
}

/// Runs `template` once per `alpha`; with an output directory each run lands
/// in `alpha_<value>/`.
pub fn energy_study(template: &RunConfig, alphas: &[f64], workers: usize) -> Result<Vec<EnergyStudyRow>> {
    let pool = pool(workers)?;
    let mut rows = pool.install(|| {
        alphas
            .par_iter()
            .map(|&alpha| {
                let mut cfg = template.clone();
                cfg.model.alpha = alpha;
                cfg.output = template.output.as_ref().map(|d| d.join(format!("alpha_{alpha}")));
                let out = run_and_persist(&cfg)?;
                let diss = out.dissipation();
                Ok(EnergyStudyRow {
                    alpha,
                    levels: out.levels(),
                    final_energy: out.final_energy(),
                    final_modified_energy: out.records.last().map_or(f64::NAN, |r| r.modified_energy),
                    min_step: out.mesh.steps().iter().cloned().fold(f64::INFINITY, f64::min),
                    max_step: out.mesh.max_step(),
                    dissipation_flags: diss.flags.len(),
                    unexplained_flags: diss.unexplained().count(),
                    max_mass_drift: diss.max_mass_drift,
                    restriction_violations: out.restriction_violations,
                    plateau_time: plateau_time(&out.records),
                    records: out.records,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(rows)
}

pub fn energy_study_text(rows: &[EnergyStudyRow]) -> String {
    let mut out = format!(
        "{:>6} {:>8} {:>14} {:>10} {:>10} {:>7} {:>10}\n",
        "alpha", "levels", "final E", "min tau", "max tau", "flags", "plateau t"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>6} {:>8} {:>14.6e} {:>10.3e} {:>10.3e} {:>7} {:>10.4}\n",
            r.alpha, r.levels, r.final_energy, r.min_step, r.max_step, r.dissipation_flags, r.plateau_time
        ));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct StepCountRow {
    pub label: String,
    pub alpha: f64,
    pub levels: usize,
    pub total_iterations: usize,
    pub final_energy: f64,
    /// Measured, never asserted.
    pub wall_time_s: f64,
}

/// Runs each labelled configuration and reports level counts and timings.
pub fn compare_step_counts(cfgs: &[(String, RunConfig)], workers: usize) -> Result<Vec<StepCountRow>> {
    let pool = pool(workers)?;
    pool.install(|| {
        cfgs.par_iter()
            .map(|(label, cfg)| {
                let out = run_and_persist(cfg)?;
                Ok(StepCountRow {
                    label: label.clone(),
                    alpha: cfg.model.alpha,
                    levels: out.levels(),
                    total_iterations: out.total_iterations,
                    final_energy: out.final_energy(),
                    wall_time_s: out.wall_time_s,
                })
            })
            .collect()
    })
}

pub fn step_count_text(rows: &[StepCountRow]) -> String {
    let mut out = format!(
        "{:<12} {:>6} {:>10} {:>12} {:>14} {:>10}\n",
        "mode", "alpha", "levels", "iterations", "final E", "wall [s]"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>6} {:>10} {:>12} {:>14.6e} {:>10.3}\n",
            r.label, r.alpha, r.levels, r.total_iterations, r.final_energy, r.wall_time_s
        ));
    }
    out
}
