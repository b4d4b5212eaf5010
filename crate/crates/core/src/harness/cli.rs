//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dynamics::{ContactKind, SimState, Simulation};
use crate::error::{Error, Result};
use crate::exec::{configure_threads, Execution};
use crate::harness::config::{load, InitialState, RunConfig};
use crate::harness::report::{ExperimentReport, Table};
use crate::harness::{drift, endurance, hold, sweep};
use crate::model::{DeviceConfig, Side};

#[derive(Debug, Parser)]
#[command(name = "mirrorsim", version, about = "Torsional micro-mirror experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slow triangular sweep; extracts V_pi and V_m per period.
    Sweep(Common),
    /// Accelerated DC cycling; tracks V_pi and V_m drift.
    Drift(Common),
    /// Bipolar hold with grounding snapshots and a DC control arm.
    Hold(Common),
    /// Side-to-side toggling; times every commutation.
    Endurance(Common),
    /// Run the `drive` section of the config and write the trace.
    Simulate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file. Defaults to the reference mirror.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
    /// Dot-path override, e.g. `charge.k_inj=0`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for data-parallel parts. Sequential when omitted.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

fn simulate(device: &DeviceConfig, cfg: &RunConfig) -> Result<ExperimentReport> {
    let drive = cfg.drive.clone().unwrap_or_default();
    let schedule = drive.schedule()?;
    let s = cfg.experiment.simulate;
    let duration = s.duration_s.unwrap_or(schedule.total_duration);
    let initial = match s.initial {
        InitialState::Rest => SimState::at_rest(),
        InitialState::Left => SimState::landed_on(Side::Left, device),
        InitialState::Right => SimState::landed_on(Side::Right, device),
    };
    let trace = Simulation::new(device, &schedule, s.sample_dt_s).initial(initial).run(duration)?;
    let mut events = Table::new(&["event_index", "t_s", "side", "release"]);
    for (i, e) in trace.events.iter().enumerate() {
        events.push(vec![
            i.into(),
            e.t.into(),
            e.side.sign().into(),
            (e.kind == ContactKind::Release).into(),
        ]);
    }
    let mut report = ExperimentReport::new(
        "simulate",
        serde_json::json!({ "device": device, "drive": drive, "settings": s }),
        events,
    );
    report.note("summary_columns", "contact events: side -1 left / +1 right, release 1 / landing 0");
    report.traces.push(("trace".into(), trace));
    Ok(report)
}

fn execute(cmd: &Command, common: &Common) -> Result<(ExperimentReport, Vec<PathBuf>)> {
    let cfg = load(common.config.as_deref(), &common.overrides)?;
    let device = cfg.device_config()?;
    let exec = match common.jobs {
        None => Execution::Sequential,
        Some(0) => return Err(Error::config("--jobs", "must be >= 1")),
        Some(n) => {
            configure_threads(n);
            Execution::Parallel
        }
    };
    let ex = &cfg.experiment;
    let mut report = match cmd {
        Command::Sweep(_) => sweep::exp_triangular_sweep(&device, &ex.sweep, exec)?.report,
        Command::Drift(_) => drift::exp_dc_drift(&device, &ex.drift)?.report,
        Command::Hold(_) => hold::exp_bipolar_hold(&device, &ex.hold, exec)?.report,
        Command::Endurance(_) => endurance::exp_endurance(&device, &ex.endurance)?.report,
        Command::Simulate(_) => simulate(&device, &cfg)?,
    };
    report.input = Some(cfg.to_value());
    let files = report.write(&common.out, common.plot)?;
    Ok((report, files))
}

/// Run the CLI on `args` (program name first). Returns the process exit
/// code: 0 success, 1 configuration or usage error, 2 numerical failure,
/// 3 experiment failure.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let common = match &cli.command {
        Command::Sweep(c) | Command::Drift(c) | Command::Hold(c) | Command::Endurance(c) | Command::Simulate(c) => c,
    };
    let source = common
        .config
        .as_ref()
        .map_or_else(|| "(built-in defaults)".to_string(), |p| p.display().to_string());
    let _ = writeln!(out, "config: {source}");
    match execute(&cli.command, common) {
        Ok((report, files)) => {
            if let Some(w) = report.metadata.get("warning") {
                let _ = writeln!(err, "warning: {}", w.as_str().unwrap_or_default());
            }
            for f in files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
