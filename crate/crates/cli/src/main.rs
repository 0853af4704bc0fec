use std::path::PathBuf;
use std::process::ExitCode;

use bergman_lab::par;
use bergman_lab_cli::{emit, run, sweep, CliError, ExperimentConfig, Format};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bergman-lab", version, about = "Run bergman-lab experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// output directory; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment
    Run(Common),
    /// Run an experiment for each value of one config field
    Sweep {
        #[command(flatten)]
        common: Common,
        /// config field to vary
        #[arg(long)]
        axis: String,
        /// comma-separated TOML literals
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<String>,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&c.config)?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (report, common, stem) = match cli.command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            let report = par::with_workers(common.workers, || run(&cfg))?;
            let stem = cfg.experiment.clone();
            (report, common, stem)
        }
        Command::Sweep { common, axis, values } => {
            let cfg = load(&common)?;
            let values: Vec<String> = values.into_iter().filter(|v| !v.trim().is_empty()).collect();
            let report = sweep(&cfg, &axis, &values, common.workers)?;
            let stem = format!("{}-sweep-{axis}", cfg.experiment);
            (report, common, stem)
        }
    };
    if let Some(path) = emit(&report, common.format, common.out.as_deref(), &stem)? {
        eprintln!("wrote {}", path.display());
    }
    if !report.pass {
        eprintln!("contract failed; see the rows and the `pass` header");
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
