use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lrclt_cli::config::Task;
use lrclt_cli::{emit_plot_data, load, run, CliError, PlotKind};

#[derive(Parser)]
#[command(
    name = "lrclt",
    version,
    about = "Exact and Monte Carlo checks of the high-temperature expansion and local CLT for long-range lattice spin systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task listed in the configuration.
    Run(Common),
    /// Factorization identity and truncated cluster series.
    VerifyExpansion(Common),
    /// Convergence constants, thresholds and the pinned polymer sum.
    Bounds(Common),
    /// ICLT and LCLT discrepancies with the integral majorant.
    Lclt(Common),
    /// Characteristic-function bounds at high temperature.
    Charfn(Common),
    /// Sublattice decimation experiment.
    Decimate(Common),
    /// Metropolis estimate of the law of S_k.
    Mc(Common),
    /// Plot-ready CSV from a JSON report.
    EmitPlotData {
        #[arg(long)]
        report: PathBuf,
        /// One of charfn, lclt, decimation, mc.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the configuration schema.
    Schema,
}

fn threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("threads: {e}")))?;
    }
    Ok(())
}

fn execute(common: Common, tasks: Option<Vec<Task>>) -> Result<i32, CliError> {
    threads(common.threads)?;
    let resolved = load(&common.config, common.seed)?;
    let tasks = tasks.unwrap_or_else(|| resolved.config.tasks.clone());
    let (manifest, code) = run(&resolved, &tasks, &common.out)?;
    for t in &manifest.tasks {
        println!("{:<17} {:?}", t.task, t.status);
        for n in &t.notes {
            println!("    {n}");
        }
    }
    println!("manifest: {}", common.out.join("manifest.json").display());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => execute(c, None),
        Command::VerifyExpansion(c) => execute(c, Some(vec![Task::VerifyExpansion])),
        Command::Bounds(c) => execute(c, Some(vec![Task::Bounds])),
        Command::Lclt(c) => execute(c, Some(vec![Task::Lclt])),
        Command::Charfn(c) => execute(c, Some(vec![Task::Charfn])),
        Command::Decimate(c) => execute(c, Some(vec![Task::Decimate])),
        Command::Mc(c) => execute(c, Some(vec![Task::Mc])),
        Command::EmitPlotData { report, kind, out } => kind
            .parse::<PlotKind>()
            .and_then(|k| emit_plot_data(&report, k, &out))
            .map(|files| {
                for f in files {
                    println!("{}", out.join(f).display());
                }
                0
            }),
        Command::Schema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&lrclt_cli::schema::experiment_schema()).unwrap()
            );
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("lrclt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
