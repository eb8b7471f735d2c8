//! `tl2`: simulate, fit, select, probe and ingest from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod ingest;
mod table;

use config::RunConfig;
use error::CliResult;

#[derive(Parser)]
#[command(name = "tl2", version, about = "Tessellation-localized transfer learning for regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Median error reduction over the configured experiment grid.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Fit the cellwise transfer model on a given tessellation.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Tessellation record to fit on.
        #[arg(long)]
        tessellation: Option<PathBuf>,
        /// Saved model to predict with instead of fitting.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Choose a tessellation on held-out target data.
    Select {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// `erm`, `mom` or `mom:<blocks>`.
        #[arg(long)]
        method: Option<String>,
    },
    /// Risk scaling along one sample-size axis.
    Probe {
        #[command(flatten)]
        common: Common,
        /// `n_t-parametric`, `n_s-plugin`, `l-bias` or `nw`.
        #[arg(long)]
        axis: Option<String>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Rescale a raw table and split it into source and target samples.
    Ingest {
        #[command(flatten)]
        common: Common,
        input: Option<PathBuf>,
        #[arg(long)]
        response: Option<String>,
        #[arg(long)]
        group: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set synth.dim=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    predict: Option<PathBuf>,
}

/// Quote a value as a TOML string.
fn quoted(v: impl std::fmt::Display) -> String {
    toml::Value::String(v.to_string()).to_string()
}

fn path(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| quoted(p.display()))
}

impl Common {
    fn load(&self, extra: Vec<(&str, Option<String>)>) -> CliResult<RunConfig> {
        let mut overrides = self.overrides.clone();
        let flags = [("seed", self.seed.map(|s| s.to_string())), ("output.dir", path(&self.out))];
        for (key, value) in flags.into_iter().chain(extra) {
            if let Some(v) = value {
                overrides.push(format!("{key}={v}"));
            }
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

impl DataArgs {
    fn overrides(&self) -> Vec<(&'static str, Option<String>)> {
        vec![("data.source", path(&self.source)), ("data.target", path(&self.target)), ("data.predict", path(&self.predict))]
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { common, replications } => {
            let cfg = common.load(vec![("simulate.replications", replications.map(|r| r.to_string()))])?;
            commands::simulate(&cfg)
        }
        Command::Fit { common, data, tessellation, model } => {
            let mut extra = data.overrides();
            extra.push(("fit.tessellation", path(&tessellation)));
            extra.push(("fit.model", path(&model)));
            commands::fit(&common.load(extra)?)
        }
        Command::Select { common, data, method } => {
            let mut extra = data.overrides();
            extra.push(("selection.method", method.map(quoted)));
            commands::select(&common.load(extra)?)
        }
        Command::Probe { common, axis, sizes, replications } => {
            let sizes = sizes.map(|s| format!("{s:?}"));
            let cfg = common.load(vec![
                ("probe.axis", axis.map(quoted)),
                ("probe.sizes", sizes),
                ("probe.replications", replications.map(|r| r.to_string())),
            ])?;
            commands::probe(&cfg)
        }
        Command::Ingest { common, input, response, group } => {
            let cfg = common.load(vec![
                ("ingest.input", path(&input)),
                ("ingest.response", response.map(quoted)),
                ("ingest.group", group.map(quoted)),
            ])?;
            commands::ingest_cmd(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tl2: {e}");
            e.exit_code()
        }
    }
}
