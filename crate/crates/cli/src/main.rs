//! `nscheme` command-line driver.
//!
//! Frequencies on the command line are in MHz and mean the factor that
//! multiplies 2π, exactly as in the config files. Times are in µs.
//! Exit status: 0 on success, 1 for invalid input, 2 when a solver fails.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nscheme::dynamics::{evolve_stepwise, linear_grid, Detection};
use nscheme::liouvillian::{hamiltonian_json, mat4_json, superoperator_json};
use nscheme::mcwf::{basis_state, default_dark_threshold, photon_csv, run_ensemble};
use nscheme::scan::{config_hash, git_describe, run_scan_with_workers, Axis, GammaQMode, Solver, VERSION};
use nscheme::{
    bright_dark_statistics, build_hamiltonian, carrier_superoperator, doppler_rate, evolve, fit_timescales, g2,
    lambda_eigensystem, solve_floquet_auto, steady_state, three_photon_report, DensityMatrix, Error, Level,
    RawConfig, ScanSpec, SystemConfig,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "nscheme", version, about = "Four-level N-scheme atom: steady states, dynamics, jumps, sidebands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration JSON (frequencies in MHz, wavelengths in nm).
    #[arg(long)]
    config: PathBuf,
    /// Output file, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct Sweep {
    /// Scanned field, e.g. `laser_R.detuning`.
    #[arg(long)]
    axis: String,
    /// `start:stop` in MHz.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    range: (f64, f64),
    #[arg(long, default_value_t = 2001)]
    points: usize,
    /// `physical`, or `zero` to drop the decay of Q.
    #[arg(long, default_value = "physical")]
    gamma_q: String,
    /// Worker threads (default: NSCHEME_WORKERS or all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Linear,
    /// 0 followed by geometric spacing from t_max·1e-5 to t_max.
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Steady state of the master equation (JSON).
    Steady {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "physical")]
        gamma_q: String,
        /// Also dump the Hamiltonian parts and the 16×16 generator.
        #[arg(long)]
        dump_operators: bool,
    },
    /// Steady-state populations along one parameter axis.
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Population dynamics from a basis state (CSV, or JSON with timescales).
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "S")]
        initial: Level,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Grid::Linear)]
        grid: Grid,
        /// Use the Runge-Kutta integrator instead of the eigenbasis.
        #[arg(long)]
        stepwise: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Quantum-jump trajectories: photon records (CSV) and bright/dark statistics (JSON).
    Traj {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "S")]
        initial: Level,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 1)]
        trajectories: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gap in µs that ends a bright period (default: 100 bright-state photon intervals).
        #[arg(long)]
        dark_threshold: Option<f64>,
        /// Write bright/dark statistics JSON here.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Normalized photon correlation g²(τ) in the steady state (CSV).
    G2 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tau_max: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        /// `all` or `blue`.
        #[arg(long, default_value = "all")]
        detection: Detection,
    },
    /// Floquet steady state of the moving ion: block dump (JSON) or a sideband scan.
    Floquet {
        #[command(flatten)]
        common: Common,
        /// Starting truncation order; raised until the blocks converge.
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long)]
        axis: Option<String>,
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: Option<(f64, f64)>,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        #[arg(long, default_value = "physical")]
        gamma_q: String,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Dressed-state reports (JSON).
    Dressed {
        #[command(flatten)]
        common: Common,
        /// Also report the three-photon Doppler rate at this speed, m/s.
        #[arg(long)]
        velocity: Option<f64>,
    },
}

enum Failure {
    Input(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Input(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("range `{s}` must look like start:stop"))?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("range bound `{x}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn load(common: &Common) -> Outcome<(RawConfig, SystemConfig)> {
    let raw = RawConfig::from_path(&common.config).map_err(|e| match e {
        Error::Io(io) => Failure::Input(format!("cannot read {}: {io}", common.config.display())),
        other => Failure::Input(other.to_string()),
    })?;
    let config = raw.validate()?;
    Ok((raw, config))
}

fn metadata(raw: &RawConfig) -> Value {
    json!({
        "version": VERSION,
        "git_describe": git_describe(),
        "config_sha256": config_hash(raw),
    })
}

fn log_grid(t_max: f64, points: usize) -> Outcome<Vec<f64>> {
    if points < 3 {
        return Err(Failure::Input("--points must be at least 3 for a log grid".into()));
    }
    let t0 = t_max * 1e-5;
    let ratio = (t_max / t0).powf(1.0 / (points - 2) as f64);
    let mut grid = vec![0.0];
    grid.extend((0..points - 1).map(|i| t0 * ratio.powi(i as i32)));
    grid[points - 1] = t_max;
    Ok(grid)
}

fn emit(out: &str, text: &str) -> Outcome<()> {
    if out == "-" {
        match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(Failure::Solver(format!("cannot write to standard output: {e}")))
            }
            _ => Ok(()),
        }
    } else {
        std::fs::write(out, text).map_err(|e| Failure::Solver(format!("cannot write {out}: {e}")))
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

fn gamma_q_mode(s: &str) -> Outcome<GammaQMode> {
    Ok(s.parse()?)
}

fn positive(name: &str, v: f64) -> Outcome<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Input(format!("--{name} must be a positive number (got {v})")))
    }
}

fn scan_spec(axis: &str, range: (f64, f64), points: usize, solver: Solver, gamma_q: &str) -> Outcome<ScanSpec> {
    let axis: Axis = axis.parse()?;
    Ok(ScanSpec::new(axis, range.0, range.1, points)?
        .with_solver(solver)
        .with_gamma_q_mode(gamma_q_mode(gamma_q)?))
}

fn run_sweep(raw: &RawConfig, spec: &ScanSpec, workers: Option<usize>, format: Format, out: &str) -> Outcome<()> {
    if workers == Some(0) {
        return Err(Failure::Input("--workers must be at least 1".into()));
    }
    let workers = workers.unwrap_or_else(nscheme::scan::default_workers);
    let spectrum = run_scan_with_workers(raw, spec, workers)?;
    let failed = spectrum.points.iter().filter(|p| p.flag.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} points failed and are flagged", spectrum.points.len());
    }
    match format {
        Format::Csv => emit(out, &spectrum.to_csv()),
        Format::Json => emit(out, &pretty(&spectrum.to_json())),
    }
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Steady {
            common,
            gamma_q,
            dump_operators,
        } => {
            let (raw, mut config) = load(&common)?;
            if gamma_q_mode(&gamma_q)? == GammaQMode::Zero {
                config = config.without_q_decay();
            }
            let superop = carrier_superoperator(&config);
            let rho = steady_state(&superop)?;
            let p = rho.populations();
            let mut v = json!({
                "metadata": metadata(&raw),
                "gamma_q_mode": gamma_q,
                "populations": {"P_S": p[0], "P_P": p[1], "P_D": p[2], "P_Q": p[3]},
                "rho": mat4_json(rho.matrix()),
            });
            if dump_operators {
                v["hamiltonian"] = hamiltonian_json(&build_hamiltonian(&config));
                v["superoperator"] = superoperator_json(&superop);
            }
            emit(&common.out, &pretty(&v))
        }
        Command::Scan { common, sweep } => {
            let (raw, _) = load(&common)?;
            let spec = scan_spec(&sweep.axis, sweep.range, sweep.points, Solver::Carrier, &sweep.gamma_q)?;
            run_sweep(&raw, &spec, sweep.workers, sweep.format, &common.out)
        }
        Command::Evolve {
            common,
            initial,
            t_max,
            points,
            grid,
            stepwise,
            format,
        } => {
            let (raw, config) = load(&common)?;
            let t_max = positive("t-max", t_max)?;
            let grid = match grid {
                Grid::Linear => linear_grid(t_max, points),
                Grid::Log => log_grid(t_max, points)?,
            };
            let superop = carrier_superoperator(&config);
            let rho0 = DensityMatrix::pure(initial);
            let trace = if stepwise {
                evolve_stepwise(&superop, &rho0, &grid)?
            } else {
                evolve(&superop, &rho0, &grid)?
            };
            match format {
                Format::Csv => emit(&common.out, &trace.to_csv()),
                Format::Json => {
                    let timescales = match fit_timescales(&trace) {
                        Ok(t) => json!(t),
                        Err(e) => {
                            eprintln!("warning: {e}");
                            Value::Null
                        }
                    };
                    let v = json!({
                        "metadata": metadata(&raw),
                        "initial": initial.to_string(),
                        "timescales_us": timescales,
                        "t_us": trace.times,
                        "populations": trace.populations,
                    });
                    emit(&common.out, &pretty(&v))
                }
            }
        }
        Command::Traj {
            common,
            initial,
            t_max,
            trajectories,
            seed,
            dark_threshold,
            stats,
        } => {
            let (raw, config) = load(&common)?;
            let t_max = positive("t-max", t_max)?;
            if trajectories == 0 {
                return Err(Failure::Input("--trajectories must be at least 1".into()));
            }
            let threshold = match dark_threshold {
                Some(t) => positive("dark-threshold", t)?,
                None => default_dark_threshold(&config)?,
            };
            let records = run_ensemble(&config, &basis_state(initial), t_max, trajectories, seed)?;
            emit(&common.out, &photon_csv(&records))?;
            if let Some(path) = stats {
                let v = json!({
                    "metadata": metadata(&raw),
                    "seed": seed,
                    "trajectories": trajectories,
                    "t_max_us": t_max,
                    "statistics": bright_dark_statistics(&records, threshold)?,
                });
                std::fs::write(&path, pretty(&v))
                    .map_err(|e| Failure::Solver(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(())
        }
        Command::G2 {
            common,
            tau_max,
            points,
            detection,
        } => {
            let (_, config) = load(&common)?;
            let tau = linear_grid(positive("tau-max", tau_max)?, points);
            let superop = carrier_superoperator(&config);
            let rho = steady_state(&superop)?;
            let values = g2(&superop, &config, &rho, &tau, detection)?;
            let mut csv = String::from("tau_us,g2\n");
            for (t, g) in tau.iter().zip(&values) {
                let _ = writeln!(csv, "{t:.11e},{g:.11e}");
            }
            emit(&common.out, &csv)
        }
        Command::Floquet {
            common,
            order,
            axis,
            range,
            points,
            gamma_q,
            workers,
            format,
        } => {
            let (raw, config) = load(&common)?;
            if order == 0 {
                return Err(Failure::Input("--order must be at least 1".into()));
            }
            if !config.motion().enabled {
                return Err(Error::MotionDisabled.into());
            }
            match (axis, range) {
                (Some(axis), Some(range)) => {
                    let spec = scan_spec(&axis, range, points, Solver::Floquet(order), &gamma_q)?;
                    run_sweep(&raw, &spec, workers, format, &common.out)
                }
                (None, None) => {
                    let mut config = config;
                    if gamma_q_mode(&gamma_q)? == GammaQMode::Zero {
                        config = config.without_q_decay();
                    }
                    let blocks = solve_floquet_auto(&config, order)?;
                    let p = blocks.populations();
                    let v = json!({
                        "metadata": metadata(&raw),
                        "populations": {"P_S": p[0], "P_P": p[1], "P_D": p[2], "P_Q": p[3]},
                        "pairing_deviation": blocks.pairing_deviation,
                        "floquet": blocks.to_json(),
                    });
                    emit(&common.out, &pretty(&v))
                }
                _ => Err(Failure::Input("--axis and --range must be given together".into())),
            }
        }
        Command::Dressed { common, velocity } => {
            let (raw, config) = load(&common)?;
            let report = |r: nscheme::Result<Value>| match r {
                Ok(v) => v,
                Err(e) => json!({"error": e.name(), "message": e.to_string()}),
            };
            let mut v = json!({
                "metadata": metadata(&raw),
                "three_photon": report(three_photon_report(&config).map(|r| json!(r))),
                "lambda": report(lambda_eigensystem(&config).map(|r| json!(r))),
            });
            if let Some(speed) = velocity {
                v["doppler_rate_rad_per_us"] = report(doppler_rate(&config, speed).map(|r| json!(r)));
            }
            emit(&common.out, &pretty(&v))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
