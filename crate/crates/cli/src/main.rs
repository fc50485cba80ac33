use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use splitfem_core::cli_io::{self, bench, commands, RunConfig};
use splitfem_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "splitfem-rsw",
    version,
    about = "Split P0/P1 finite elements for the rotating shallow-water slice model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Dotted override, e.g. `--set mesh.n=129`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured test case and write diagnostics and fields.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Steady-state convergence sweep for the configured closure.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated resolutions.
        #[arg(long, value_delimiter = ',', default_values_t = commands::DEFAULT_CONVERGE_N)]
        n_list: Vec<usize>,
        /// Simulated cycles per run (default: time.t_end_cycles).
        #[arg(long)]
        cycles: Option<f64>,
    },
    /// Measured dispersion relations on the configured mesh.
    Dispersion {
        #[command(flatten)]
        common: Common,
        /// Comma-separated closure specs, e.g. `gp1-gp1,avg-avg`.
        #[arg(long)]
        specs: Option<String>,
    },
    /// Time the closure stage and the full step against the averaged closure.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = bench::DEFAULT_BENCH_N)]
        n: usize,
        #[arg(long, default_value_t = bench::DEFAULT_BENCH_STEPS)]
        steps: usize,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    RunConfig::load(&common.config, &common.set)
}

fn execute(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Run { common } => {
            let cfg = load(&common)?;
            let s = cli_io::cmd_run(&cfg)?;
            Ok(serde_json::json!({
                "diag": s.diag_path,
                "meta": s.meta_path,
                "fields": s.field_paths.len(),
                "steps": s.steps,
                "dt": s.dt,
            }))
        }
        Command::Converge { common, n_list, cycles } => {
            let cfg = load(&common)?;
            let (path, rows) = cli_io::cmd_converge(&cfg, &n_list, cycles)?;
            Ok(serde_json::json!({ "table": path, "rows": rows }))
        }
        Command::Dispersion { common, specs } => {
            let cfg = load(&common)?;
            let specs = match specs {
                Some(list) => commands::parse_specs(&list)?,
                None => commands::default_dispersion_specs(cfg.mesh.n),
            };
            if specs.is_empty() {
                return Err(Error::Config("no closure specs given".into()));
            }
            let (path, table) = cli_io::cmd_dispersion(&cfg, &specs)?;
            Ok(serde_json::json!({ "table": path, "modes": table.len() }))
        }
        Command::Bench { common, n, steps } => {
            let cfg = load(&common)?;
            let (path, report) = cli_io::cmd_bench(&cfg, n, steps)?;
            Ok(serde_json::json!({
                "report": path,
                "step_speedup": report.step_speedup,
                "closure_speedup": report.closure_speedup,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", cli_io::error_report(&e));
            ExitCode::from(cli_io::exit_code(&e) as u8)
        }
    }
}
