mod settings;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use fch::adaptive::{random_mesh, AdaptiveConfig};
use fch::experiments::{
    compare_step_counts, convergence_study, energy_study, energy_study_text, run_and_persist,
    step_count_text, uniform_level_count, ConvergenceSettings, InitialCondition, RunConfig,
    RunManifest, Stepping,
};
use fch::kernels::{
    doc_kernels, doc_kernels_recursive, orthogonality_residual, ratio_function,
    theta_matrix_checks, THETA_CHECK_MAX_LEVEL,
};
use fch::{io, Error, ModelParams, NonlinearSolveConfig, RestrictionMode, Result, TimeMesh};

use settings::{parse_list, FileValues};

#[derive(Parser)]
#[command(name = "fch", version, about = "Variable-step BDF2 solver for the space fractional Cahn-Hilliard equation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Grid nodes per direction (even).
    #[arg(long = "M", global = true)]
    modes: Option<usize>,
    /// Domain edge length.
    #[arg(long = "L", global = true)]
    length: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Final time.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    /// Fixed-point tolerance (max-norm of successive iterates).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Share of the eps^2 term treated implicitly in the fixed-point solve.
    #[arg(long, global = true)]
    implicit_fraction: Option<f64>,
    /// Linear stabilization of the fixed-point solve.
    #[arg(long, global = true)]
    stabilization: Option<f64>,
    #[arg(long, global = true)]
    restriction: Option<RestrictionMode>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent runs in studies.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args, Default)]
struct AdaptiveArgs {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tau_min: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    r_user: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitKind {
    Sin,
    Random,
    Snapshot,
}

impl std::str::FromStr for InitKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <InitKind as ValueEnum>::from_str(s, true)
    }
}

#[derive(Args, Default)]
struct InitArgs {
    /// Initial condition.
    #[arg(long, value_enum)]
    init: Option<InitKind>,
    /// Lower bound of random initial values.
    #[arg(long)]
    lo: Option<f64>,
    /// Upper bound of random initial values.
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    init_seed: Option<u64>,
    /// Snapshot stem or `.bin` path for `--init snapshot`.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Simulate {
        /// Uniform step size.
        #[arg(long)]
        tau: Option<f64>,
        /// Random mesh with this many steps.
        #[arg(long = "random-n")]
        random_n: Option<usize>,
        /// Random mesh seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Adaptive stepping.
        #[arg(long)]
        adaptive: bool,
        /// Step sizes read from a file.
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[command(flatten)]
        adapt: AdaptiveArgs,
        #[command(flatten)]
        init: InitArgs,
        /// Re-run the configuration stored in a run manifest.
        #[arg(long, conflicts_with_all = ["tau", "random_n", "adaptive", "mesh"])]
        replay: Option<PathBuf>,
    },
    /// Errors and orders on random meshes against a uniform reference.
    Converge {
        /// Comma-separated fractional orders.
        #[arg(long)]
        alphas: Option<String>,
        /// Comma-separated step counts.
        #[arg(long)]
        ns: Option<String>,
        #[arg(long)]
        ref_tau: Option<f64>,
        /// Mesh seed for N is this plus N.
        #[arg(long)]
        seed: Option<u64>,
        /// Reference-solution cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[command(flatten)]
        init: InitArgs,
    },
    /// Adaptive runs for several fractional orders with energy summaries.
    EnergyStudy {
        #[arg(long)]
        alphas: Option<String>,
        #[command(flatten)]
        adapt: AdaptiveArgs,
        #[command(flatten)]
        init: InitArgs,
    },
    /// Time levels and wall time of adaptive against uniform stepping.
    CompareSteps {
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long)]
        uniform_tau: Option<f64>,
        #[command(flatten)]
        adapt: AdaptiveArgs,
        #[command(flatten)]
        init: InitArgs,
    },
    /// DOC kernel tables, orthogonality residuals and Theta checks.
    CheckKernels {
        /// Mesh file; defaults to a random mesh.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Steps of the random mesh.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Level whose DOC row is printed (defaults to the last).
        #[arg(long)]
        level: Option<usize>,
        /// Write the mesh used to this file.
        #[arg(long)]
        export_mesh: Option<PathBuf>,
    },
}

/// Parameter set a subcommand falls back to.
struct Defaults {
    model: ModelParams,
    horizon: f64,
    restriction: RestrictionMode,
    init: InitKind,
    alphas: &'static str,
}

fn example1() -> Defaults {
    Defaults {
        model: ModelParams {
            alpha: 0.4,
            epsilon: 0.1f64.sqrt(),
            kappa: 1.0,
            length: 2.0 * PI,
            modes: 64,
        },
        horizon: 1.0,
        restriction: RestrictionMode::Warn,
        init: InitKind::Sin,
        alphas: "0.05,0.4,0.6,0.95",
    }
}

fn example2() -> Defaults {
    Defaults {
        model: ModelParams {
            alpha: 1.0,
            epsilon: 0.01,
            kappa: 0.01,
            length: 2.0 * PI,
            modes: 64,
        },
        horizon: 1.0,
        restriction: RestrictionMode::Enforce,
        init: InitKind::Random,
        alphas: "0.2,0.4,0.6,0.8,1",
    }
}

struct Common {
    model: ModelParams,
    horizon: f64,
    solver: NonlinearSolveConfig,
    restriction: RestrictionMode,
    out: Option<PathBuf>,
    workers: usize,
}

fn common(g: &GlobalArgs, f: &FileValues, d: &Defaults) -> Result<Common> {
    let model = ModelParams {
        alpha: f.get(g.alpha, "alpha", d.model.alpha)?,
        epsilon: f.get(g.epsilon, "epsilon", d.model.epsilon)?,
        kappa: f.get(g.kappa, "kappa", d.model.kappa)?,
        length: f.get(g.length, "L", d.model.length)?,
        modes: f.get(g.modes, "M", d.model.modes)?,
    };
    let base = NonlinearSolveConfig::default();
    let solver = NonlinearSolveConfig {
        tol: f.get(g.tol, "tol", base.tol)?,
        max_iter: f.get(g.max_iter, "max_iter", base.max_iter)?,
        implicit_fraction: f.get(g.implicit_fraction, "implicit_fraction", base.implicit_fraction)?,
        stabilization: f.get(g.stabilization, "stabilization", base.stabilization)?,
    };
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(Common {
        model,
        horizon: f.get(g.horizon, "T", d.horizon)?,
        solver,
        restriction: f.get(g.restriction, "restriction", d.restriction)?,
        out: f.get_opt(g.out.clone(), "out")?,
        workers: f.get(g.workers, "workers", default_workers)?,
    })
}

fn adaptive_config(a: &AdaptiveArgs, f: &FileValues) -> Result<AdaptiveConfig> {
    let d = AdaptiveConfig::default();
    let cfg = AdaptiveConfig {
        rho: f.get(a.rho, "rho", d.rho)?,
        tau_min: f.get(a.tau_min, "tau_min", d.tau_min)?,
        tau_max: f.get(a.tau_max, "tau_max", d.tau_max)?,
        r_user: f.get(a.r_user, "r_user", d.r_user)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn initial_condition(a: &InitArgs, f: &FileValues, default: InitKind) -> Result<InitialCondition> {
    let kind = f.get(a.init, "init", default)?;
    let lo = f.get(a.lo, "lo", -0.1)?;
    let hi = f.get(a.hi, "hi", 0.1)?;
    let seed = f.get(a.init_seed, "init_seed", 1)?;
    let path: Option<PathBuf> = f.get_opt(a.snapshot.clone(), "snapshot")?;
    Ok(match kind {
        InitKind::Sin => InitialCondition::SinProduct,
        InitKind::Random => InitialCondition::Random { lo, hi, seed },
        InitKind::Snapshot => InitialCondition::Snapshot {
            path: path.ok_or_else(|| Error::Config("--init snapshot needs --snapshot PATH".into()))?,
        },
    })
}

fn alphas(flag: &Option<String>, f: &FileValues, default: &str) -> Result<Vec<f64>> {
    let text = f.get(flag.clone(), "alphas", default.to_string())?;
    let list = parse_list(&text)?;
    if list.is_empty() {
        return Err(Error::Config("empty alpha list".into()));
    }
    Ok(list)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let f = FileValues::load(g.config.as_deref())?;
    match &cli.command {
        Command::Simulate {
            tau,
            random_n,
            seed,
            adaptive,
            mesh,
            adapt,
            init,
            replay,
        } => {
            let cfg = if let Some(path) = replay {
                let manifest: RunManifest = io::read_json(path)?;
                let mut cfg = manifest.config;
                cfg.output = g.out.clone();
                cfg
            } else {
                let d = example1();
                let c = common(g, &f, &d)?;
                let adaptive = f.switch(*adaptive, "adaptive")?;
                let tau = f.get_opt(*tau, "tau")?;
                let random_n = f.get_opt(*random_n, "N")?;
                let seed = f.get(*seed, "seed", 0)?;
                let mesh = f.get_opt(mesh.clone(), "mesh")?;
                let chosen = [tau.is_some(), random_n.is_some(), adaptive, mesh.is_some()]
                    .iter()
                    .filter(|&&b| b)
                    .count();
                if chosen > 1 {
                    return Err(Error::Config(
                        "choose one of --tau, --random-n, --adaptive, --mesh".into(),
                    ));
                }
                let adapt = adaptive_config(adapt, &f)?;
                let stepping = if let Some(n) = random_n {
                    Stepping::RandomMesh { n, seed }
                } else if adaptive {
                    Stepping::Adaptive(adapt)
                } else if let Some(path) = mesh {
                    Stepping::MeshFile { path }
                } else {
                    Stepping::Uniform {
                        tau: tau.unwrap_or(1e-3),
                    }
                };
                RunConfig {
                    model: c.model,
                    stepping,
                    horizon: c.horizon,
                    initial: initial_condition(init, &f, d.init)?,
                    solver: c.solver,
                    restriction: c.restriction,
                    output: c.out,
                }
            };
            f.check_unused()?;
            let out = run_and_persist(&cfg)?;
            let diss = out.dissipation();
            println!("levels            {}", out.levels());
            println!("final time        {}", out.final_time());
            println!("final energy      {:.12e}", out.final_energy());
            println!("max step          {:.6e}", out.mesh.max_step());
            println!("max ratio         {:.4}", out.mesh.max_ratio());
            println!("iterations        {}", out.total_iterations);
            println!("retries           {}", out.retries);
            println!("restriction viol. {}", out.restriction_violations);
            println!(
                "dissipation flags {} ({} at admissible steps)",
                diss.flags.len(),
                diss.unexplained().count()
            );
            println!("max mass drift    {:.3e}", diss.max_mass_drift);
            println!("wall time [s]     {:.3}", out.wall_time_s);
            if let Some(dir) = &cfg.output {
                println!("outputs in        {}", dir.display());
            }
            Ok(())
        }
        Command::Converge {
            alphas: alpha_flag,
            ns,
            ref_tau,
            seed,
            cache,
            init,
        } => {
            let d = example1();
            let c = common(g, &f, &d)?;
            let alpha_list = alphas(alpha_flag, &f, d.alphas)?;
            let ns: Vec<usize> = parse_list(&f.get(ns.clone(), "ns", "32,64,128,256".to_string())?)?;
            let defaults = ConvergenceSettings::default();
            let cache_default = c.out.as_ref().map(|o| o.join("reference_cache"));
            let settings = ConvergenceSettings {
                ns,
                ref_tau: f.get(*ref_tau, "ref_tau", defaults.ref_tau)?,
                base_seed: f.get(*seed, "seed", defaults.base_seed)?,
                workers: c.workers,
                cache_dir: f.get_opt(cache.clone(), "cache")?.or(cache_default),
            };
            let initial = initial_condition(init, &f, d.init)?;
            f.check_unused()?;
            for alpha in alpha_list {
                let mut model = c.model;
                model.alpha = alpha;
                let base = RunConfig {
                    model,
                    stepping: Stepping::Uniform { tau: settings.ref_tau },
                    horizon: c.horizon,
                    initial: initial.clone(),
                    solver: c.solver,
                    restriction: c.restriction,
                    output: None,
                };
                info!("convergence study alpha = {alpha}");
                let table = convergence_study(&base, &settings)?;
                println!("{}", table.text());
                if let Some(dir) = &c.out {
                    io::ensure_dir(dir)?;
                    let path = dir.join(format!("convergence_alpha_{alpha}.csv"));
                    std::fs::write(&path, table.csv()).map_err(|e| Error::io(&path, e))?;
                }
            }
            Ok(())
        }
        Command::EnergyStudy {
            alphas: alpha_flag,
            adapt,
            init,
        } => {
            let d = example2();
            let c = common(g, &f, &d)?;
            let alpha_list = alphas(alpha_flag, &f, d.alphas)?;
            let template = RunConfig {
                model: c.model,
                stepping: Stepping::Adaptive(adaptive_config(adapt, &f)?),
                horizon: c.horizon,
                initial: initial_condition(init, &f, d.init)?,
                solver: c.solver,
                restriction: c.restriction,
                output: c.out.clone(),
            };
            f.check_unused()?;
            let rows = energy_study(&template, &alpha_list, c.workers)?;
            let text = energy_study_text(&rows);
            print!("{text}");
            if let Some(dir) = &c.out {
                let mut csv = String::from(
                    "alpha,levels,final_E,final_E_mod,min_tau,max_tau,dissipation_flags,unexplained_flags,max_mass_drift,restriction_violations,plateau_time\n",
                );
                for r in &rows {
                    let _ = writeln!(
                        csv,
                        "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{},{:.16e}",
                        r.alpha,
                        r.levels,
                        r.final_energy,
                        r.final_modified_energy,
                        r.min_step,
                        r.max_step,
                        r.dissipation_flags,
                        r.unexplained_flags,
                        r.max_mass_drift,
                        r.restriction_violations,
                        r.plateau_time
                    );
                }
                write_text(&dir.join("energy_summary.csv"), &csv)?;
            }
            Ok(())
        }
        Command::CompareSteps {
            alphas: alpha_flag,
            uniform_tau,
            adapt,
            init,
        } => {
            let mut d = example2();
            d.horizon = 10.0;
            d.restriction = RestrictionMode::Warn;
            d.alphas = "1";
            let c = common(g, &f, &d)?;
            let alpha_list = alphas(alpha_flag, &f, d.alphas)?;
            let uniform_tau = f.get(*uniform_tau, "uniform_tau", 1e-3)?;
            let adapt = adaptive_config(adapt, &f)?;
            let initial = initial_condition(init, &f, d.init)?;
            f.check_unused()?;
            let mut cfgs = Vec::new();
            for &alpha in &alpha_list {
                let mut model = c.model;
                model.alpha = alpha;
                for (label, stepping) in [
                    ("uniform", Stepping::Uniform { tau: uniform_tau }),
                    ("adaptive", Stepping::Adaptive(adapt)),
                ] {
                    cfgs.push((
                        label.to_string(),
                        RunConfig {
                            model,
                            stepping,
                            horizon: c.horizon,
                            initial: initial.clone(),
                            solver: c.solver,
                            restriction: c.restriction,
                            output: c.out.as_ref().map(|o| o.join(format!("{label}_alpha_{alpha}"))),
                        },
                    ));
                }
            }
            info!(
                "uniform runs take {} levels each",
                uniform_level_count(c.horizon, uniform_tau)
            );
            let rows = compare_step_counts(&cfgs, c.workers)?;
            print!("{}", step_count_text(&rows));
            if let Some(dir) = &c.out {
                let mut csv = String::from("mode,alpha,levels,iterations,final_E,wall_time_s\n");
                for r in &rows {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{:.16e},{:.6}",
                        r.label, r.alpha, r.levels, r.total_iterations, r.final_energy, r.wall_time_s
                    );
                }
                write_text(&dir.join("compare_steps.csv"), &csv)?;
            }
            Ok(())
        }
        Command::CheckKernels {
            mesh,
            n,
            seed,
            level,
            export_mesh,
        } => {
            let horizon = f.get(g.horizon, "T", 1.0)?;
            let mesh_path = f.get_opt(mesh.clone(), "mesh")?;
            let n = f.get(*n, "N", 16)?;
            let seed = f.get(*seed, "seed", 0)?;
            let level = f.get_opt(*level, "level")?;
            f.check_unused()?;
            let mesh = match mesh_path {
                Some(p) => io::read_mesh(&p)?,
                None => random_mesh(n, horizon, seed)?,
            };
            if let Some(p) = export_mesh {
                io::write_mesh(p, &mesh)?;
            }
            print!("{}", kernel_report(&mesh, level)?);
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        io::ensure_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn kernel_report(mesh: &TimeMesh, level: Option<usize>) -> Result<String> {
    let n = mesh.len();
    if n < 2 {
        return Err(Error::Config("kernel checks need at least 2 steps".into()));
    }
    let level = level.unwrap_or(n);
    let mut out = String::new();
    let _ = writeln!(out, "levels {n}, max ratio {:.4}, max step {:.6e}", mesh.max_ratio(), mesh.max_step());
    let _ = writeln!(out, "DOC row at level {level}");
    let _ = writeln!(out, "{:>6} {:>24} {:>24} {:>10}", "j", "theta (product)", "theta (recursion)", "r_j");
    let product = doc_kernels(mesh, level)?;
    let recursion = doc_kernels_recursive(mesh, level)?;
    for j in 2..=level {
        let _ = writeln!(
            out,
            "{:>6} {:>24.16e} {:>24.16e} {:>10.4}",
            j,
            product[j - 2],
            recursion[j - 2],
            mesh.ratio(j)
        );
    }
    let mut worst_residual = 0.0f64;
    let mut worst_gap = 0.0f64;
    for k in 2..=n {
        worst_residual = worst_residual.max(orthogonality_residual(mesh, k)?);
        let a = doc_kernels(mesh, k)?;
        let b = doc_kernels_recursive(mesh, k)?;
        for (x, y) in a.iter().zip(&b) {
            worst_gap = worst_gap.max((x - y).abs() / x.abs().max(f64::MIN_POSITIVE));
        }
    }
    let _ = writeln!(out, "max orthogonality residual   {worst_residual:.3e}");
    let _ = writeln!(out, "max product/recursion gap    {worst_gap:.3e}");
    let min_r = (2..=n)
        .map(|k| ratio_function(mesh.ratio(k), if k < n { mesh.ratio(k + 1) } else { 0.0 }))
        .fold(f64::INFINITY, f64::min);
    let _ = writeln!(out, "min R(r_k, r_k+1)            {min_r:.6}");
    let theta_level = n.min(THETA_CHECK_MAX_LEVEL);
    let report = theta_matrix_checks(mesh, theta_level)?;
    let _ = writeln!(
        out,
        "Theta (n = {}): eigenvalues [{:.6e}, {:.6e}], scaled min {:.6e}, positive definite {}, inverse residual {:.3e}, ratios admissible {}",
        report.n,
        report.min_eigenvalue,
        report.max_eigenvalue,
        report.min_scaled_eigenvalue,
        report.positive_definite,
        report.inverse_residual,
        report.admissible
    );
    Ok(out)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonConvergence { .. } | Error::MassDrift { .. } => 3,
        Error::Io { .. } | Error::Format { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
