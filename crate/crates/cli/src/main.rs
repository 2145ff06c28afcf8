use std::path::PathBuf;
use std::process::ExitCode;

use airmix::experiments::StudyConfig;
use airmix::io::ColumnMap;
use airmix::EventKind;
use airmix_cli::{exit_code, parse_time};
use clap::{Parser, Subcommand, ValueEnum};

/// Worker threads for batch commands; defaults to one per core.
const WORKERS_ENV: &str = "AIRMIX_WORKERS";

#[derive(Parser)]
#[command(
    name = "airmix",
    version,
    about = "Mixing-air building model load-shifting experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file: baseline, event, traces and a metrics row.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's time step, s.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, value_enum, default_value_t = Window::Full)]
        window: Window,
        /// Seconds between rows in the trace files.
        #[arg(long, default_value_t = 1.0)]
        trace_every: f64,
        /// Retune the second-half setpoint move of an open-loop event until it
        /// is energy neutral.
        #[arg(long)]
        tune: bool,
    },
    /// Closed-loop events over a grid of mixing parameters.
    SweepMixing {
        /// `start:end:step` or a comma-separated list.
        #[arg(long, default_value = "0.1:1.0:0.1")]
        r_grid: String,
        #[arg(long, default_value = "0.1")]
        c_grid: String,
        #[arg(long, value_enum, default_value_t = KindArg::Both)]
        kind: KindArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
    },
    /// Unforced, forced and outdoor-change cases at r = 0.5, c = 0.3.
    ForcedSettling {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        /// Length of the outdoor temperature change from the event start, s.
        #[arg(
            long,
            default_value_t = 3600.0,
            conflicts_with = "outdoor_change_permanent"
        )]
        outdoor_change_duration: f64,
        /// Keep the outdoor change until the end of the run.
        #[arg(long)]
        outdoor_change_permanent: bool,
        /// Hand control back without re-seeding the temperature integrator.
        #[arg(long)]
        no_bumpless: bool,
        #[arg(long, default_value_t = 60.0)]
        trace_every: f64,
    },
    /// Normalized open-loop fan power of the fully mixed and mixing-zone models.
    CompareModels {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[arg(long, default_value_t = 0.3)]
        r: f64,
        #[arg(long, default_value_t = 0.1)]
        c: f64,
        /// Measured CSV to overlay.
        #[arg(long, requires_all = ["column_map", "event_start"])]
        measured: Option<PathBuf>,
        /// e.g. `time=Timestamp,power=Fan:kW,zone_temp=Zone:F`.
        #[arg(long)]
        column_map: Option<String>,
        /// Start of the measured event (ISO-8601 or seconds).
        #[arg(long)]
        event_start: Option<String>,
        /// Resampling step for measured data, s.
        #[arg(long, default_value_t = 60.0)]
        measured_dt: f64,
    },
    /// Metrics of a measured event against a linear baseline.
    AnalyzeMeasured {
        #[arg(long)]
        measured: PathBuf,
        #[arg(long)]
        column_map: String,
        #[arg(long)]
        event_start: String,
        #[arg(long)]
        event_end: String,
        /// Settling horizon from the event start, h.
        #[arg(long, default_value_t = 2.0)]
        settle_hours: f64,
        #[arg(long, default_value_t = 60.0)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Window {
    /// Scenario settling horizon.
    Full,
    #[value(name = "2h")]
    TwoHours,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    UpDown,
    DownUp,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<EventKind> {
        match self {
            KindArg::UpDown => vec![EventKind::UpDown],
            KindArg::DownUp => vec![EventKind::DownUp],
            KindArg::Both => vec![EventKind::UpDown, EventKind::DownUp],
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(command: Command) -> airmix::Result<()> {
    match command {
        Command::Simulate {
            config,
            out,
            dt,
            window,
            trace_every,
            tune,
        } => airmix_cli::simulate(
            &config,
            &out,
            dt,
            matches!(window, Window::TwoHours),
            trace_every,
            tune,
        ),
        Command::SweepMixing {
            r_grid,
            c_grid,
            kind,
            out,
            dt,
        } => airmix_cli::sweep_mixing(&r_grid, &c_grid, &kind.kinds(), &out, dt),
        Command::ForcedSettling {
            out,
            dt,
            outdoor_change_duration,
            outdoor_change_permanent,
            no_bumpless,
            trace_every,
        } => {
            let cfg = StudyConfig {
                dt,
                outdoor_change_duration: (!outdoor_change_permanent)
                    .then_some(outdoor_change_duration),
                bumpless_handback: !no_bumpless,
                ..StudyConfig::default()
            };
            airmix_cli::forced_settling(&cfg, &out, trace_every)
        }
        Command::CompareModels {
            out,
            dt,
            r,
            c,
            measured,
            column_map,
            event_start,
            measured_dt,
        } => {
            let overlay = match (measured, column_map, event_start) {
                (Some(p), Some(m), Some(s)) => Some((p, m.parse::<ColumnMap>()?, parse_time(&s)?)),
                _ => None,
            };
            let overlay = overlay.as_ref().map(|(p, m, s)| (p.as_path(), m, *s));
            airmix_cli::compare_models(&out, dt, (r, c), overlay, measured_dt)
        }
        Command::AnalyzeMeasured {
            measured,
            column_map,
            event_start,
            event_end,
            settle_hours,
            dt,
            out,
        } => airmix_cli::analyze_measured(
            &measured,
            &column_map.parse()?,
            parse_time(&event_start)?,
            parse_time(&event_end)?,
            settle_hours * 3600.0,
            dt,
            &out,
        ),
    }
}
