//! `mems`: command-line driver for the nonlocal MEMS solvers.
//!
//! Exit codes: 0 success (converged or timed out), 2 quenched (`run` only),
//! 1 configuration or usage error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, DomainKind, FitModel, InitialData};

#[derive(Parser, Debug)]
#[command(name = "mems", version, about = "Simulate the nonlocal parabolic MEMS equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate in time and classify the outcome.
    Run(RunArgs),
    /// Run a list of voltages and tabulate the probe value over time.
    Sweep(SweepArgs),
    /// Bisect the critical voltage.
    Bisect(BisectArgs),
    /// Solve for the minimal steady state by Newton continuation.
    Steady(SteadyArgs),
    /// Fit the decay rate of the distance to the steady state.
    Rate(RateArgs),
    /// Print the nonexistence bound for a 2D domain.
    Bound(BoundArgs),
    /// List the built-in scenarios, or print one as a config file.
    Presets(PresetsArgs),
}

/// Options shared by every simulation command. Flags override the config
/// file, which overrides the preset.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Built-in scenario to start from.
    #[arg(long, short = 'p')]
    preset: Option<String>,
    /// Output directory (default: $MEMS_OUT_DIR or ./mems-out).
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[arg(long, short = 'l', allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    quench_eps: Option<f64>,
    #[arg(long, value_enum)]
    domain: Option<DomainKind>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    lx: Option<f64>,
    #[arg(long)]
    ly: Option<f64>,
    /// Nodes per axis.
    #[arg(long, short = 'n')]
    n: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt_max: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    /// Re-evaluate the reaction once per step.
    #[arg(long)]
    picard: bool,
    #[arg(long, value_enum)]
    initial: Option<InitialData>,
    /// Concurrent simulations for sweep and bisect.
    #[arg(long, short = 'j')]
    jobs: Option<usize>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<Config> {
        let mut c = match &self.preset {
            Some(name) => Config::from_preset(name)?,
            None => Config::default(),
        };
        if let Some(path) = &self.config {
            if self.preset.is_some() {
                anyhow::bail!("--config and --preset are mutually exclusive");
            }
            c = Config::load(path)?;
        }
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        set!(self.lambda => c.equation.lambda);
        set!(self.alpha => c.equation.alpha);
        set!(self.quench_eps => c.equation.quench_eps);
        set!(self.domain => c.domain.kind);
        set!(self.length => c.domain.length);
        set!(self.radius => c.domain.radius);
        set!(self.lx => c.domain.lx);
        set!(self.ly => c.domain.ly);
        set!(self.n => c.domain.n);
        set!(self.t_max => c.integrator.t_max);
        set!(self.dt_max => c.integrator.dt_max);
        set!(self.record_every => c.integrator.record_every);
        set!(self.initial => c.integrator.initial);
        set!(self.jobs => c.search.jobs);
        if self.picard {
            c.integrator.picard = true;
        }
        if self.t_max.is_some() {
            let t_max = c.integrator.t_max;
            c.integrator.snapshot_times.retain(|&t| t <= t_max);
        }
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated voltages.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct BisectArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SteadyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated continuation targets (default: just --lambda).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct RateArgs {
    #[command(flatten)]
    common: Common,
    /// Integration horizon for the decay record.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    window_start: Option<f64>,
    #[arg(long)]
    window_end: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<FitModel>,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[command(flatten)]
    common: Common,
    /// Star-shape constant; derived automatically for disks.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
struct PresetsArgs {
    /// Print this preset as a TOML config instead of listing all.
    #[arg(long)]
    dump: Option<String>,
}

fn dispatch(cli: Cli) -> Result<ExitCode, commands::Failure> {
    use commands::Failure;
    match cli.command {
        Command::Run(a) => commands::run(&a.common),
        Command::Sweep(a) => {
            let mut c = a.common.resolve().map_err(Failure::Config)?;
            if let Some(l) = a.lambdas {
                c.sweep.lambdas = l;
            }
            commands::sweep(&a.common, c)
        }
        Command::Bisect(a) => {
            let mut c = a.common.resolve().map_err(Failure::Config)?;
            if let Some(v) = a.lo {
                c.search.lo = v;
            }
            if let Some(v) = a.hi {
                c.search.hi = v;
            }
            if let Some(v) = a.tol {
                c.search.tol = v;
            }
            commands::bisect(&a.common, c)
        }
        Command::Steady(a) => {
            let mut c = a.common.resolve().map_err(Failure::Config)?;
            if let Some(t) = a.targets {
                c.newton.targets = t;
            }
            commands::steady(&a.common, c)
        }
        Command::Rate(a) => {
            let mut c = a.common.resolve().map_err(Failure::Config)?;
            if let Some(v) = a.horizon {
                c.rate.t_max = v;
            }
            if a.window_start.is_some() {
                c.rate.window_start = a.window_start;
            }
            if a.window_end.is_some() {
                c.rate.window_end = a.window_end;
            }
            if let Some(m) = a.model {
                c.rate.model = m;
            }
            commands::rate(&a.common, c)
        }
        Command::Bound(a) => {
            let mut c = a.common.resolve().map_err(Failure::Config)?;
            if a.beta.is_some() {
                c.bound.beta = a.beta;
            }
            commands::bound(&a.common, c)
        }
        Command::Presets(a) => commands::presets(a.dump.as_deref()),
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
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
