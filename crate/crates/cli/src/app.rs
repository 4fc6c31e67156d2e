use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{self, AnalyzeArgs, Artifact, Destination, TfRange};
use crate::config::{Overrides, RunConfig, ShotsSpec};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sqisw",
    version,
    about = "Simulate and characterize a sqrt(iSWAP) gate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration (MHz and ns)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Shot count per setting, or "exact" for exact probabilities
    #[arg(long, global = true, value_name = "N|exact", value_parser = ShotsSpec::parse)]
    shots: Option<ShotsSpec>,

    /// Apply readout-calibration inversion
    #[arg(long, global = true, overrides_with = "no_calibrate")]
    calibrate: bool,

    #[arg(long, global = true, overrides_with = "calibrate")]
    no_calibrate: bool,

    /// Clip reconstructed states to the nearest physical density matrix
    #[arg(long, global = true)]
    project_physical: bool,

    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads; output does not depend on this
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Swap oscillations over a detuning and interaction-time grid (CSV)
    SwapScan {
        /// Interaction times in ns as start:stop:step
        #[arg(long, default_value = "0:400:0.25", value_parser = TfRange::parse)]
        tf: TfRange,
        /// Comma-separated detunings Δ/2π in MHz
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        delta: Option<Vec<f64>>,
    },
    /// State tomography of one input after a gate
    Qst {
        /// "01" style basis label or per-qubit labels such as "0+i1,0+1"
        #[arg(long, default_value = "01")]
        input: String,
        /// none, sqisw, iswap or cnot
        #[arg(long, default_value = "none")]
        gate: String,
    },
    /// 16-input process tomography, calibrated and uncalibrated
    Qpt {
        #[arg(long, default_value = "sqisw")]
        gate: String,
    },
    /// Estimate the readout model from simulated calibration runs
    Calibrate,
    /// T2, κ and flagged elements of a χ matrix file
    Analyze {
        chi: PathBuf,
        /// Coupling g/2π in MHz (defaults to the config value)
        #[arg(long)]
        g_mhz: Option<f64>,
        /// Gate whose ideal χ the elements are compared against
        #[arg(long, default_value = "sqisw")]
        gate: String,
        #[arg(long, default_value_t = 0.01)]
        threshold: f64,
        /// Attribute flagged elements to relaxation or dephasing by simulation
        #[arg(long)]
        classify: bool,
    },
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            return report(&CliError::config(first_line(&e)));
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn first_line(e: &clap::Error) -> String {
    e.to_string()
        .lines()
        .next()
        .unwrap_or_default()
        .trim_start_matches("error: ")
        .to_string()
}

fn report(e: &CliError) -> i32 {
    eprintln!("{}", e.to_json_line());
    e.kind.exit_code()
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        shots: cli.shots.clone(),
        calibrate: match (cli.calibrate, cli.no_calibrate) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        },
        project_physical: cli.project_physical,
        out: cli.out.clone(),
    });
    cfg.resolve()?;

    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::config("--jobs must be at least 1")),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))?;

    let artifacts = pool.install(|| dispatch(&cli.command, &cfg))?;
    for a in artifacts {
        write_artifact(&a)?;
    }
    Ok(())
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    Ok(match cmd {
        Command::SwapScan { tf, delta } => commands::swap_scan(cfg, *tf, delta.clone())?,
        Command::Qst { input, gate } => vec![commands::qst(cfg, input, gate)?],
        Command::Qpt { gate } => vec![commands::qpt(cfg, gate)?],
        Command::Calibrate => vec![commands::calibrate(cfg)?],
        Command::Analyze {
            chi,
            g_mhz,
            gate,
            threshold,
            classify,
        } => vec![commands::analyze(
            cfg,
            &AnalyzeArgs {
                chi: chi.clone(),
                g_mhz: *g_mhz,
                gate: gate.clone(),
                threshold: *threshold,
                classify: *classify,
            },
        )?],
    })
}

fn write_artifact(a: &Artifact) -> Result<(), CliError> {
    match &a.dest {
        Destination::Stdout => {
            let mut out = std::io::stdout().lock();
            out.write_all(a.contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::config(format!("cannot write to stdout: {e}")))
        }
        Destination::File(path) => std::fs::write(path, &a.contents)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display()))),
    }
}
