//! `mwl`: command-line front end for the Wintgen-ideal toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::commands::Outcome;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Geometric(String),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Geometric(_) => 2,
            CliError::Tolerance(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mwl", version, about = "DDVV gaps, Wintgen certificates and Moebius invariants of submanifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the gallery families and their parameters.
    List,
    /// Scan the DDVV gap over a grid or random sample.
    Gap {
        #[command(flatten)]
        example: ExampleArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[command(flatten)]
        region: RegionArgs,
        /// Certificate and assertion tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Certify Wintgen equality at one chart point.
    Certify {
        #[command(flatten)]
        example: ExampleArgs,
        /// Chart point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Moebius invariants at a point or over a sample.
    Invariants {
        #[command(flatten)]
        example: ExampleArgs,
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["grid", "random"])]
        point: Option<String>,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Homogeneity probe: spread of the invariants at random points.
    Probe {
        #[command(flatten)]
        example: ExampleArgs,
        #[arg(long)]
        random: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Minimality and Wintgen conditions of a Clifford-type surface.
    CliffordCheck {
        /// Radii, comma separated; rescaled to unit sum of squares.
        #[arg(long, allow_hyphen_values = true)]
        r: String,
        /// Angles, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Random surface points used for the geometric cross-check.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Apply a seeded random Moebius transformation.
    Transform {
        #[command(flatten)]
        example: ExampleArgs,
        #[arg(long)]
        moebius_seed: u64,
        /// Compare the invariants before and after at random points.
        #[arg(long)]
        check_invariance: bool,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Sample seed (defaults to the Moebius seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Depth::Form)]
        depth: Depth,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a computation described by a JSON config.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(value_enum)]
        task: Task,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Gap,
    Certify,
    Invariants,
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Depth {
    Jet,
    Form,
    Full,
}

#[derive(Debug, Args)]
struct ExampleArgs {
    /// Gallery family name (see `mwl list`).
    #[arg(long)]
    example: String,
    /// Family parameter, repeatable.
    #[arg(long = "param", value_name = "K=V", allow_hyphen_values = true)]
    params: Vec<String>,
}

#[derive(Debug, Args)]
struct SamplingArgs {
    /// Grid with N cell centres per axis.
    #[arg(long, conflicts_with = "random")]
    grid: Option<usize>,
    /// N uniform random points.
    #[arg(long, requires = "seed")]
    random: Option<usize>,
    #[arg(long, requires = "random")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RegionArgs {
    /// Lower corner of the scanned region, comma separated.
    #[arg(long, allow_hyphen_values = true, requires = "upper")]
    lower: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires = "lower")]
    upper: Option<String>,
}

#[derive(Debug, Args)]
struct FdArgs {
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    fd_richardson: Option<u32>,
    /// Central difference order, 2 or 4.
    #[arg(long)]
    fd_scheme: Option<u32>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the JSON report here and print a summary instead.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
    /// Omit the wall-clock time so reports are byte-reproducible.
    #[arg(long)]
    deterministic: bool,
    /// Exit with status 3 when the computed values miss the tolerances.
    #[arg(long)]
    assert: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("mwl: {e}");
        return ExitCode::from(e.exit_code());
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mwl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MWL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("MWL_THREADS must be an integer >= 1, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(command: Command) -> Result<(), CliError> {
    let start = Instant::now();
    let (outcome, output) = match command {
        Command::List => {
            print!("{}", commands::list());
            return Ok(());
        }
        Command::Gap {
            example,
            sampling,
            region,
            tol,
            output,
        } => {
            let mut cfg = commands::config_for(&example.example, &example.params)?;
            cfg.sampling = Some(sampling_config(&sampling)?.ok_or_else(|| {
                CliError::Usage("gap needs --grid N or --random N --seed S".into())
            })?);
            cfg.region = region_config(&region)?;
            if let Some(t) = tol {
                cfg.tolerances.jet_exact = t;
            }
            cfg.validate()?;
            (commands::run_task(Task::Gap, &cfg, output.assert)?, output)
        }
        Command::Certify {
            example,
            point,
            tol,
            output,
        } => {
            let mut cfg = commands::config_for(&example.example, &example.params)?;
            cfg.point = Some(parse_list("point", &point)?);
            if let Some(t) = tol {
                cfg.tolerances.jet_exact = t;
            }
            cfg.validate()?;
            (commands::run_task(Task::Certify, &cfg, output.assert)?, output)
        }
        Command::Invariants {
            example,
            point,
            sampling,
            region,
            fd,
            output,
        } => {
            let mut cfg = commands::config_for(&example.example, &example.params)?;
            cfg.point = point.map(|p| parse_list("point", &p)).transpose()?;
            cfg.sampling = sampling_config(&sampling)?;
            if cfg.point.is_none() && cfg.sampling.is_none() {
                return Err(CliError::Usage(
                    "invariants needs --point, --grid N or --random N --seed S".into(),
                ));
            }
            cfg.region = region_config(&region)?;
            apply_fd(&mut cfg, &fd)?;
            cfg.validate()?;
            (commands::run_task(Task::Invariants, &cfg, output.assert)?, output)
        }
        Command::Probe {
            example,
            random,
            seed,
            region,
            fd,
            output,
        } => {
            let mut cfg = commands::config_for(&example.example, &example.params)?;
            cfg.sampling = Some(config::SamplingConfig {
                kind: config::SamplingKind::Random,
                n: random,
                seed: Some(seed),
            });
            cfg.region = region_config(&region)?;
            apply_fd(&mut cfg, &fd)?;
            cfg.validate()?;
            (commands::run_task(Task::Probe, &cfg, output.assert)?, output)
        }
        Command::CliffordCheck {
            r,
            theta,
            tol,
            samples,
            seed,
            output,
        } => {
            let radii = parse_list("r", &r)?;
            let angles = parse_list("theta", &theta)?;
            (commands::clifford_check(&radii, &angles, tol, samples, seed, output.assert)?, output)
        }
        Command::Transform {
            example,
            moebius_seed,
            check_invariance,
            samples,
            seed,
            depth,
            fd,
            output,
        } => {
            let mut cfg = commands::config_for(&example.example, &example.params)?;
            apply_fd(&mut cfg, &fd)?;
            cfg.validate()?;
            let opts = commands::TransformOptions {
                moebius_seed,
                check_invariance,
                samples,
                seed: seed.unwrap_or(moebius_seed),
                depth,
            };
            (commands::transform(&cfg, &opts, output.assert)?, output)
        }
        Command::Eval { config, task, mut output } => {
            let cfg = config::Config::from_file(&config)?;
            output.out = output.out.or_else(|| cfg.output.json.clone());
            output.csv = output.csv.or_else(|| cfg.output.csv.clone());
            output.pretty |= cfg.output.pretty;
            (commands::run_task(task, &cfg, output.assert)?, output)
        }
    };
    finish(outcome, &output, start)
}

fn finish(mut outcome: Outcome, output: &OutputArgs, start: Instant) -> Result<(), CliError> {
    if !output.deterministic {
        outcome.report.wall_time = Some(start.elapsed().as_secs_f64());
    }
    let io = |what: &str, e: std::io::Error| CliError::Usage(format!("cannot write {what}: {e}"));
    match &output.out {
        Some(path) => {
            outcome
                .report
                .write_json(path, output.pretty)
                .map_err(|e| io(&path.display().to_string(), e))?;
            print!("{}", outcome.human);
        }
        None => print!("{}", outcome.report.to_json(output.pretty)),
    }
    if let Some(path) = &output.csv {
        outcome
            .report
            .write_csv(path)
            .map_err(|e| io(&path.display().to_string(), e))?;
    }
    match outcome.status {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn parse_list(what: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--{what}: expected comma-separated numbers, got '{text}'")))
}

fn sampling_config(s: &SamplingArgs) -> Result<Option<config::SamplingConfig>, CliError> {
    Ok(match (s.grid, s.random) {
        (Some(n), None) => Some(config::SamplingConfig {
            kind: config::SamplingKind::Grid,
            n,
            seed: None,
        }),
        (None, Some(n)) => Some(config::SamplingConfig {
            kind: config::SamplingKind::Random,
            n,
            seed: s.seed,
        }),
        (None, None) => None,
        (Some(_), Some(_)) => return Err(CliError::Usage("--grid and --random are exclusive".into())),
    })
}

fn region_config(r: &RegionArgs) -> Result<Option<config::RegionConfig>, CliError> {
    match (&r.lower, &r.upper) {
        (Some(lo), Some(hi)) => Ok(Some(config::RegionConfig {
            lower: parse_list("lower", lo)?,
            upper: parse_list("upper", hi)?,
        })),
        _ => Ok(None),
    }
}

fn apply_fd(cfg: &mut config::Config, fd: &FdArgs) -> Result<(), CliError> {
    if let Some(h) = fd.fd_step {
        cfg.fd.step = h;
    }
    if let Some(r) = fd.fd_richardson {
        cfg.fd.richardson = r;
    }
    if let Some(s) = fd.fd_scheme {
        cfg.fd.scheme = mwl_core::jets::FdScheme::from_order(s)
            .ok_or_else(|| CliError::Usage(format!("--fd-scheme must be 2 or 4, got {s}")))?;
    }
    Ok(())
}
