//! `cislp`: run precoding experiments from scenario files.
//!
//! Exit codes: 0 success, 1 validation failure, 2 bad input, 3 solver
//! failure (divergence or an uncertified reference solve).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cislp::ci_model::CiSystem;
use cislp::constellation::ConstellationSpec;
use cislp::pif::{default_config, solve_pm_with, Mode, SlackRule, TraceRow};
use cislp::sim::scenario::SolverOverrides;
use cislp::sim::{
    convergence_csv, db_to_linear, run_convergence, run_pm_sweep, run_sb_sweep, slot_system,
    Realization, RunOptions, Scenario,
};
use cislp::validate::run_invariant_suite;
use cislp::Error;

#[derive(Parser)]
#[command(name = "cislp", version, about = "Constructive-interference symbol-level precoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average transmit power versus SINR threshold.
    PmSweep(SweepArgs),
    /// BER versus SNR under a power budget.
    SbSweep(SweepArgs),
    /// Per-iteration trace of the ADMM solver.
    Convergence(ConvergenceArgs),
    /// Run the built-in invariant suite.
    Validate,
    /// Write the CI system of one slot as a text fixture.
    DumpSystem(DumpArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a scenario key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_kv)]
    set: Vec<(String, String)>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Fill the wallMillis column.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// CI system fixture to trace instead of a scenario.
    #[arg(long, conflicts_with = "scenario")]
    system: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    common: Common,
    /// Channel realization index.
    #[arg(long, default_value_t = 0)]
    channel: usize,
    /// Symbol slot within the frame.
    #[arg(long, default_value_t = 0)]
    slot: usize,
    /// Index into the sweep list.
    #[arg(long, default_value_t = 0)]
    point: usize,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))
}

enum Failure {
    Validation,
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load(common: &Common) -> Result<Scenario, Error> {
    let path = common
        .scenario
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("--scenario is required".into()))?;
    Scenario::load(path, &common.set)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::from(e).context(format!("writing {}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep(args: &SweepArgs, mode: Mode) -> Result<(), Failure> {
    let scenario = load(&args.common)?;
    let opts = RunOptions {
        jobs: args.jobs,
        timing: args.timing,
    };
    let result = match mode {
        Mode::Pm => run_pm_sweep(&scenario, opts)?,
        Mode::Sb => run_sb_sweep(&scenario, opts)?,
    };
    emit(args.common.out.as_deref(), &result.to_csv())?;
    Ok(())
}

fn convergence(args: &ConvergenceArgs) -> Result<(), Failure> {
    let text = match &args.system {
        Some(path) => {
            let system = CiSystem::read(path).map_err(|e| e.context(format!("reading {}", path.display())))?;
            let spec = ConstellationSpec::from_name(system.modulation())?;
            let mut overrides = SolverOverrides::default();
            for (k, v) in &args.common.set {
                if !overrides.set(k, v)? {
                    return Err(Error::InvalidParameter(format!("'{k}' is not a solver key")).into());
                }
            }
            let cfg = overrides.apply(default_config(system.users(), system.antennas(), &spec, Mode::Pm).config);
            let sol = solve_pm_with(&system, &cfg, SlackRule::Masked, true)?;
            let mut out = String::from(TraceRow::CSV_HEADER);
            out.push('\n');
            for row in &sol.trace {
                out.push_str(&row.to_csv());
                out.push('\n');
            }
            out
        }
        None => {
            let scenario = load(&args.common)?;
            let rows = run_convergence(
                &scenario,
                RunOptions {
                    jobs: args.jobs,
                    timing: false,
                },
            )?;
            convergence_csv(&rows)
        }
    };
    emit(args.common.out.as_deref(), &text)?;
    Ok(())
}

fn validate() -> Result<(), Failure> {
    let checks = run_invariant_suite();
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        Err(Failure::Validation)
    } else {
        Ok(())
    }
}

fn dump_system(args: &DumpArgs) -> Result<(), Failure> {
    let scenario = load(&args.common)?;
    if args.channel >= scenario.channels {
        return Err(Error::InvalidParameter(format!("channel {} out of range", args.channel)).into());
    }
    let value = *scenario
        .sweep
        .get(args.point)
        .ok_or_else(|| Error::InvalidParameter(format!("sweep point {} out of range", args.point)))?;
    let real = Realization::draw(&scenario, args.channel)?;
    let system = slot_system(&scenario, &real, args.slot, db_to_linear(value))?;
    match &args.common.out {
        Some(p) => system.write(p)?,
        None => print!("{}", system.to_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::PmSweep(a) => sweep(a, Mode::Pm),
        Command::SbSweep(a) => sweep(a, Mode::Sb),
        Command::Convergence(a) => convergence(a),
        Command::Validate => validate(),
        Command::DumpSystem(a) => dump_system(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
