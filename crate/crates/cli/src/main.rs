//! `hbnqm`: quantum-memory simulations, constant extraction and defect
//! screening from the command line.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hbn_qmem::defectdb::DbFormat;
use hbn_qmem::dynamics::InitialCondition;
use hbn_qmem::fom::CapPolicy;

use commands::{BandwidthFlags, DbFlags, Global, KappaFlags, PulseFlags, ScreenFlags, SimulateFlags, TargetFlags};
use config::{OutputFormat, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "hbnqm", version, about = "Raman quantum-memory figures of merit for solid-state color centers")]
struct Cli {
    /// JSON run configuration (default: $HBNQM_CONFIG, else built-in defaults).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Tabular output format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Record the wall-clock time in every artifact.
    #[arg(long, global = true)]
    timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the master equation for one storage run.
    Simulate(SimulateArgs),
    /// Largest cavity decay keeping the dark-state survival above a threshold.
    Kappa(KappaArgs),
    /// Efficiency against one-photon detuning and its half width.
    Bandwidth(BandwidthArgs),
    /// Figure-of-merit table for a defect database.
    Fom(DbArgs),
    /// Validate and normalize a defect database.
    Ingest(DbArgs),
    /// Pair defect ZPLs with target quantum systems.
    Match(MatchArgs),
    /// Split defects into memory candidates and rejections.
    Screen(ScreenArgs),
    /// Everything above in one run, plus plot data.
    Report(ReportArgs),
}

#[derive(Args)]
struct PulseArgs {
    /// Peak control Rabi frequency, units of g_c.
    #[arg(long, allow_negative_numbers = true)]
    omega0: Option<f64>,
    /// Pulse turn-off time scale, units of 1/g_c.
    #[arg(long = "T", allow_negative_numbers = true)]
    t_char: Option<f64>,
    /// Atom-cavity coupling, units of g_c.
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
}

impl PulseArgs {
    fn flags(&self) -> PulseFlags {
        PulseFlags { omega0: self.omega0, t_char: self.t_char, g: self.g }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Initial {
    GroundPhoton,
    DarkState,
}

impl From<Initial> for InitialCondition {
    fn from(i: Initial) -> Self {
        match i {
            Initial::GroundPhoton => InitialCondition::GroundPhoton,
            Initial::DarkState => InitialCondition::DarkState,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    /// Cavity decay rate, units of g_c.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    kappa: f64,
    /// One-photon detuning.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta: f64,
    /// Two-photon detuning.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta2: f64,
    #[arg(long, value_enum, default_value = "ground-photon")]
    initial: Initial,
    /// Override the window start.
    #[arg(long, allow_negative_numbers = true)]
    t_start: Option<f64>,
    /// Override the window end.
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
}

#[derive(Args)]
struct KappaArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    /// Survival the dark state must keep at the end of the window.
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Dark-state population at the window start.
    #[arg(long, allow_negative_numbers = true)]
    p0: Option<f64>,
}

#[derive(Args)]
struct BandwidthArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    /// Cavity decay (default: the configured κ̂).
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Largest |Δ| on the grid.
    #[arg(long, allow_negative_numbers = true)]
    max: Option<f64>,
    /// Grid spacing.
    #[arg(long, allow_negative_numbers = true)]
    step: Option<f64>,
    #[arg(long, value_enum, default_value = "ground-photon")]
    initial: Initial,
}

#[derive(Clone, Copy, ValueEnum)]
enum DbFormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct DbArgs {
    /// Defect database (default: the bundled seed table).
    #[arg(long, value_name = "FILE")]
    db: Option<PathBuf>,
    /// Database format when the extension does not tell.
    #[arg(long, value_enum)]
    db_format: Option<DbFormatArg>,
}

impl DbArgs {
    fn flags(&self) -> DbFlags {
        DbFlags {
            db: self.db.clone(),
            db_format: self.db_format.map(|f| match f {
                DbFormatArg::Csv => DbFormat::Csv,
                DbFormatArg::Json => DbFormat::Json,
            }),
        }
    }
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    db: DbArgs,
    /// Target list JSON (default: bundled list).
    #[arg(long, value_name = "FILE")]
    targets: Option<PathBuf>,
    /// Matching window in nm.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Strict,
    OrderOfMagnitude,
}

#[derive(Args)]
struct ScreenArgs {
    #[command(flatten)]
    db: DbArgs,
    /// Quality-factor cap, or `none`.
    #[arg(long, value_parser = parse_qmax, allow_negative_numbers = true)]
    qmax: Option<QMax>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long, value_name = "FILE")]
    targets: Option<PathBuf>,
    /// Leave out the detuning sweep.
    #[arg(long)]
    skip_sweep: bool,
}

#[derive(Clone, Copy, Debug)]
struct QMax(Option<f64>);

fn parse_qmax(s: &str) -> Result<QMax, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(QMax(None));
    }
    s.parse::<f64>().map(|v| QMax(Some(v))).map_err(|e| format!("{s:?}: {e}"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let loaded = RunConfig::load(cli.config.as_deref())?;
    let mut cfg = loaded.config.clone();
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(f) = cli.format {
        cfg.output_format = f;
    }
    let global = Global { loaded, timestamp: cli.timestamp };
    match cli.command {
        Command::Simulate(a) => commands::simulate(
            &global,
            cfg,
            &SimulateFlags {
                pulse: a.pulse.flags(),
                kappa: a.kappa,
                delta: a.delta,
                delta2: a.delta2,
                initial: a.initial.into(),
                t_start: a.t_start,
                t_end: a.t_end,
            },
        ),
        Command::Kappa(a) => {
            commands::kappa(&global, cfg, &KappaFlags { pulse: a.pulse.flags(), threshold: a.threshold, p0: a.p0 })
        }
        Command::Bandwidth(a) => commands::bandwidth(
            &global,
            cfg,
            &BandwidthFlags {
                pulse: a.pulse.flags(),
                kappa: a.kappa,
                max: a.max,
                step: a.step,
                initial: a.initial.into(),
            },
        ),
        Command::Fom(a) => commands::fom(&global, cfg, &a.flags()),
        Command::Ingest(a) => commands::ingest(&global, cfg, &a.flags()),
        Command::Match(a) => commands::matches(&global, cfg, &a.db.flags(), &TargetFlags { targets: a.targets }, a.tol),
        Command::Screen(a) => commands::screen_cmd(
            &global,
            cfg,
            &a.db.flags(),
            &ScreenFlags {
                qmax: a.qmax.map(|q| q.0),
                policy: a.policy.map(|p| match p {
                    PolicyArg::Strict => CapPolicy::Strict,
                    PolicyArg::OrderOfMagnitude => CapPolicy::OrderOfMagnitude,
                }),
            },
        ),
        Command::Report(a) => {
            commands::report(&global, cfg, &a.db.flags(), &TargetFlags { targets: a.targets }, a.skip_sweep)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hbnqm: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
