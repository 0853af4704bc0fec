//! Experiment runner for `bergman-lab`: one experiment per TOML file,
//! deterministic CSV/JSON output, and sweeps over any config field.

pub mod config;
pub mod experiments;
pub mod table;

use std::path::{Path, PathBuf};

use bergman_lab::{par, LabError};
use thiserror::Error;

pub use config::{ExperimentConfig, EXPERIMENTS};
pub use table::{Cell, Report, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error(transparent)]
    Numerical(#[from] LabError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for usage and configuration errors, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) => 2,
            CliError::Numerical(LabError::Config { .. }) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Csv(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    pub fn render(self, report: &Report) -> Result<String, CliError> {
        match self {
            Format::Csv => report.to_csv(),
            Format::Json => Ok(report.to_json()),
        }
    }
}

/// Runs one experiment. The header echoes the resolved configuration, the
/// contract and the verdict.
pub fn run(config: &ExperimentConfig) -> Result<Report, CliError> {
    let cfg = config.resolve()?;
    let out = experiments::dispatch(&cfg)?;
    let mut header = cfg.echo();
    header.extend(out.notes);
    header.push(format!("pass = {}", out.pass));
    Ok(Report { header, table: out.table, pass: out.pass })
}

/// Runs `config` once per value of `axis` (up to `workers` at a time) and
/// merges the tables in value order, appending the axis column.
pub fn sweep(config: &ExperimentConfig, axis: &str, values: &[String], workers: usize) -> Result<Report, CliError> {
    let configs: Vec<ExperimentConfig> =
        values.iter().map(|v| config.with_field(axis, v)).collect::<Result<_, _>>()?;
    let base = config.resolve()?;
    let reports: Vec<Result<Report, CliError>> = par::with_workers(workers, || par::map_slice(&configs, run));
    let mut header = base.echo();
    header.push(format!("sweep_axis = {axis}"));
    header.push(format!("sweep_values = [{}]", values.join(", ")));
    let mut table = Table::default();
    let mut pass = true;
    for (v, r) in values.iter().zip(reports) {
        let r = r?;
        if table.columns.is_empty() {
            table.columns = r.table.columns.clone();
            table.columns.push(axis.to_string());
        }
        pass &= r.pass;
        header.push(format!("pass[{axis} = {v}] = {}", r.pass));
        for mut row in r.table.rows {
            row.push(Cell::S(v.clone()));
            table.rows.push(row);
        }
    }
    if table.columns.is_empty() {
        table.columns.push(axis.to_string());
    }
    header.push(format!("pass = {pass}"));
    Ok(Report { header, table, pass })
}

/// Writes `report` to `<dir>/<stem>.<ext>`, or returns the text when `dir`
/// is `None`.
pub fn emit(report: &Report, format: Format, dir: Option<&Path>, stem: &str) -> Result<Option<PathBuf>, CliError> {
    let text = format.render(report)?;
    match dir {
        None => {
            print!("{text}");
            Ok(None)
        }
        Some(d) => {
            std::fs::create_dir_all(d)?;
            let path = d.join(format!("{stem}.{}", format.extension()));
            std::fs::write(&path, text)?;
            Ok(Some(path))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn forelli_rudin_trivial_weight_passes() {
        let r = run(&cfg("experiment = \"forelli-rudin\"\nbeta = 0.5\na = 2.0")).unwrap();
        assert!(r.pass);
        assert!(r.table.floats("rel_err").iter().all(|e| *e <= 1e-6));
        assert!(r.header.iter().any(|h| h == "pass = true"));
    }

    #[test]
    fn empty_sweep_is_empty() {
        let r = sweep(&cfg("experiment = \"interval-mass\""), "k", &[], 1).unwrap();
        assert!(r.pass);
        assert!(r.table.rows.is_empty());
        assert_eq!(r.table.columns, vec!["k"]);
    }

    #[test]
    fn sweep_appends_axis_in_value_order() {
        let values: Vec<String> = ["1", "-1", "0"].iter().map(|s| s.to_string()).collect();
        let base = cfg("experiment = \"interval-mass\"\neps1 = 1\neps2 = 1\ngrid_lo = -2\ngrid_hi = 2");
        let r = sweep(&base, "k", &values, 2).unwrap();
        assert_eq!(r.table.columns.last().unwrap(), "k");
        assert_eq!(r.table.rows.len(), 15);
        let axis = r.table.column("k").unwrap();
        assert_eq!(axis[0].text(), "1");
        assert_eq!(axis[5].text(), "-1");
        assert_eq!(axis[14].text(), "0");
    }

    #[test]
    fn errors_map_to_exit_codes() {
        let e = run(&cfg("experiment = \"interval-mass\"\nbeta = -2")).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        let e = run(&cfg("experiment = \"interval-mass\"\nfamily = \"cubic\"")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
