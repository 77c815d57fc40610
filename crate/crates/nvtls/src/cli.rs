//! Command-line interface. Precedence, lowest first: built-in defaults,
//! `--config` file, `--set` overrides, global flags, command flags.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use nvtls_core::spectra::LevelSelector;

use crate::commands::{self, BlochFrame, Outcome, PhaseMode, RabiModel};
use crate::config::{parse_number, RunConfig};
use crate::error::{CliError, CliResult};
use crate::sweep::with_threads;

#[derive(Parser, Debug)]
#[command(name = "nvtls", version, about = "NV-13C level anti-crossing two-level system: levels, Rabi and Ramsey data as CSV")]
pub struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed of the random drive phases.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Override one config key, e.g. `--set field.B=20`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectArg {
    /// The six m_s = +-1, 13C-down levels carrying the anti-crossings.
    Lac,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Lab,
    Rotating,
    Counter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Tls,
    #[value(name = "tls-2")]
    Tls2,
    #[value(name = "full-18")]
    Full18,
}

fn angle(s: &str) -> Result<f64, String> {
    parse_number(s)
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tracked level energies versus the field polar angle.
    Levels {
        #[arg(long, default_value_t = 30.0)]
        theta_min: f64,
        #[arg(long, default_value_t = 46.0)]
        theta_max: f64,
        #[arg(long, default_value_t = 161)]
        steps: usize,
        #[arg(long, value_enum, default_value = "lac")]
        select: SelectArg,
    },
    /// Locate the anti-crossing and report the two-level system.
    Lac {
        #[arg(long, default_value_t = commands::LAC_WINDOW.0)]
        window_min: f64,
        #[arg(long, default_value_t = commands::LAC_WINDOW.1)]
        window_max: f64,
    },
    /// Bloch trajectory of the driven two-level system from |+x>.
    Bloch {
        #[arg(long)]
        omega1: Option<f64>,
        #[arg(long, value_parser = angle)]
        phase: Option<f64>,
        /// us
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        /// us
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, value_enum, default_value = "rotating")]
        frame: FrameArg,
    },
    /// Rabi traces and spectra for a list of drive amplitudes.
    Rabi {
        /// Comma-separated amplitudes, MHz (default: drive.omega1).
        #[arg(long, value_delimiter = ',')]
        omega1: Vec<f64>,
        #[arg(long, value_enum, default_value = "tls")]
        mode: ModeArg,
        /// Fixed drive phase, rad (default: drive.phase).
        #[arg(long, value_parser = angle, conflicts_with = "average")]
        phase: Option<f64>,
        /// Average over this many random phases in [0, pi] drawn with --seed.
        #[arg(long)]
        average: Option<usize>,
        /// Sample spacing, us.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Run sequence modes at the computed anti-crossing angle.
        #[arg(long)]
        at_lac: bool,
    },
    /// Ramsey fringes, spectrum and labelled peak list.
    Ramsey {
        /// Artificial detuning, MHz.
        #[arg(long)]
        nu_d: Option<f64>,
        /// Pulse flip angle, e.g. 0.5pi.
        #[arg(long, value_parser = angle)]
        flip: Option<f64>,
        /// MHz
        #[arg(long)]
        carrier: Option<f64>,
        /// Unit-moment MW Rabi frequency, MHz.
        #[arg(long)]
        mw_rabi: Option<f64>,
        /// Delay step, us.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        at_lac: bool,
    },
    /// Run a schedule file, optionally sweeping one placeholder.
    Sequence {
        #[arg(long)]
        schedule: PathBuf,
        /// `name=start:step:count` or `name=v1,v2,...`.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        at_lac: bool,
    },
}

/// Parses `name=start:step:count` or `name=v1,v2,...`.
pub fn parse_sweep(s: &str) -> CliResult<(String, Vec<f64>)> {
    let bad = |m: &str| CliError::usage(format!("--sweep '{s}': {m}"));
    let (name, spec) = s.split_once('=').ok_or_else(|| bad("expected name=values"))?;
    let num = |t: &str| parse_number(t).map_err(|m| bad(&m));
    let values = match spec.split(':').collect::<Vec<_>>()[..] {
        [start, step, count] => {
            let (start, step) = (num(start)?, num(step)?);
            let count: usize = count.trim().parse().map_err(|_| bad("count must be an integer"))?;
            (0..count).map(|k| start + step * k as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<CliResult<Vec<_>>>()?,
        _ => return Err(bad("expected start:step:count or a comma list")),
    };
    Ok((name.trim().to_string(), values))
}

/// Configuration after file, `--set` and global flags.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::usage(format!("--set '{kv}': expected KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(d) = &cli.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    let mut cfg = resolve_config(cli)?;
    with_threads(cli.threads, || dispatch(&mut cfg, &cli.command))?
}

fn dispatch(cfg: &mut RunConfig, command: &Command) -> CliResult<Outcome> {
    match command {
        Command::Levels { theta_min, theta_max, steps, select } => {
            let selector = match select {
                SelectArg::Lac => LevelSelector::LacManifold,
                SelectArg::All => LevelSelector::All,
            };
            commands::cmd_levels(cfg, *theta_min, *theta_max, *steps, selector)
        }
        Command::Lac { window_min, window_max } => commands::cmd_lac(cfg, (*window_min, *window_max)),
        Command::Bloch { omega1, phase, duration, dt, frame } => {
            cfg.drive.omega1 = omega1.unwrap_or(cfg.drive.omega1);
            cfg.drive.phase_d = phase.unwrap_or(cfg.drive.phase_d);
            let frame = match frame {
                FrameArg::Lab => BlochFrame::Lab,
                FrameArg::Rotating => BlochFrame::Rotating,
                FrameArg::Counter => BlochFrame::CounterRotating,
            };
            commands::cmd_bloch(cfg, *duration, *dt, frame)
        }
        Command::Rabi { omega1, mode, phase, average, dt, samples, at_lac } => {
            let e = &mut cfg.experiment;
            e.rabi_dt = dt.unwrap_or(e.rabi_dt);
            e.rabi_samples = samples.unwrap_or(e.rabi_samples);
            e.at_lac |= at_lac;
            let list = if omega1.is_empty() { vec![cfg.drive.omega1] } else { omega1.clone() };
            let model = match mode {
                ModeArg::Tls => RabiModel::Tls,
                ModeArg::Tls2 => RabiModel::Tls2,
                ModeArg::Full18 => RabiModel::Full18,
            };
            let phase = match average {
                Some(n) => PhaseMode::Average { n: *n, seed: cfg.seed },
                None => PhaseMode::Fixed(phase.unwrap_or(cfg.drive.phase_d)),
            };
            commands::cmd_rabi(cfg, &list, model, phase)
        }
        Command::Ramsey { nu_d, flip, carrier, mw_rabi, dt, samples, at_lac } => {
            let e = &mut cfg.experiment;
            e.nu_d = nu_d.unwrap_or(e.nu_d);
            e.flip = flip.unwrap_or(e.flip);
            e.carrier = carrier.unwrap_or(e.carrier);
            e.mw_rabi = mw_rabi.unwrap_or(e.mw_rabi);
            e.ramsey_dt = dt.unwrap_or(e.ramsey_dt);
            e.ramsey_samples = samples.unwrap_or(e.ramsey_samples);
            e.at_lac |= at_lac;
            commands::cmd_ramsey(cfg)
        }
        Command::Sequence { schedule, sweep, at_lac } => {
            cfg.experiment.at_lac |= at_lac;
            let text = std::fs::read_to_string(schedule).map_err(|err| CliError::io(schedule, err))?;
            let sweep = sweep.as_deref().map(parse_sweep).transpose()?;
            commands::cmd_sequence(cfg, &text, sweep.as_ref().map(|(n, v)| (n.as_str(), v.as_slice())))
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            for w in &out.warnings {
                log::warn!("{w}");
            }
            print!("{}", out.report);
            0
        }
        Err(e) => {
            eprintln!("nvtls: {e}");
            e.exit_code()
        }
    }
}
