use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homodyne::cli::{self, diff::Tolerances, Experiment, ExperimentPlan, PlanOptions};
use homodyne::Error;

/// Balanced homodyne detector simulator and characterization pipeline.
#[derive(Parser)]
#[command(name = "homodyne", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an experiment and write spectra, tables and a manifest.
    Simulate {
        #[command(flatten)]
        plan: PlanArgs,
        /// dc-sweep, gain-spectrum, power-sweep, cmrr or full-characterize.
        #[arg(long)]
        experiment: Option<Experiment>,
        /// Also write this many leading samples of each AC trace.
        #[arg(long)]
        traces: Option<usize>,
    },
    /// Characterize from a simulation or an ingested measurement directory.
    Characterize {
        #[command(flatten)]
        plan: PlanArgs,
        /// Analyze the measurement files in this directory instead of simulating.
        #[arg(long)]
        ingest: Option<PathBuf>,
    },
    /// Compare two reports field by field; B is the reference.
    ReportDiff {
        a: PathBuf,
        b: PathBuf,
        /// field=abs or field=pct%; '*' sets the default. Repeatable.
        #[arg(long = "tol")]
        tolerances: Vec<String>,
    },
    /// List presets, or print one as a config file.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "homodyne-out")]
    out: PathBuf,
    /// Resolution bandwidth, Hz.
    #[arg(long)]
    rbw: Option<f64>,
    /// Video bandwidth, Hz.
    #[arg(long)]
    vbw: Option<f64>,
    /// Analysis band as LO:HI in Hz.
    #[arg(long, value_parser = parse_band)]
    band: Option<(f64, f64)>,
    /// Clearance frequency, Hz.
    #[arg(long)]
    clearance_freq: Option<f64>,
}

impl PlanArgs {
    fn options(&self, trace_samples: Option<usize>) -> PlanOptions {
        PlanOptions {
            config: self.config.clone(),
            preset: self.preset.clone(),
            seed: self.seed,
            rbw: self.rbw,
            vbw: self.vbw,
            band: self.band,
            clearance_freq: self.clearance_freq,
            trace_samples,
        }
    }
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Simulate { plan, experiment, traces } => {
            let plan = ExperimentPlan::resolve(&plan.options(traces), experiment, &plan.out)?;
            let data = cli::cmd_simulate(&plan)?;
            eprintln!(
                "{}: {} sweep spectra, {} DC points written to {}",
                plan.experiment,
                data.sweep.len(),
                data.dc_plus.len() + data.dc_minus.len(),
                plan.output_dir.display()
            );
        }
        Command::Characterize { plan, ingest } => {
            let plan = ExperimentPlan::resolve(&plan.options(None), None, &plan.out)?;
            let run = cli::cmd_characterize(&plan, ingest.as_deref())?;
            for w in &run.report.warnings {
                eprintln!("warning: {w}");
            }
            run.report.write_flat(std::io::stdout().lock())?;
        }
        Command::ReportDiff { a, b, tolerances } => {
            let tol = Tolerances::parse(tolerances.iter().map(String::as_str))?;
            let summary = cli::cmd_report_diff(&a, &b, &tol)?;
            println!("{summary}");
            if !summary.passed() {
                return Ok(cli::EXIT_DIFF_FAILED);
            }
        }
        Command::Presets { name: None } => {
            for name in cli::preset_names() {
                println!("{name}");
            }
        }
        Command::Presets { name: Some(name) } => print!("{}", cli::preset_config(&name)?),
    }
    Ok(cli::EXIT_OK)
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
