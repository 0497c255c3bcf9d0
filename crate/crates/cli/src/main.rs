mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

/// Structural anomaly detection for NUTS2 regions.
#[derive(Debug, Parser)]
#[command(name = "regionscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: GlobalOpts,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download the four indicators (or copy a fixture) into OUT/data/merged.csv.
    Fetch,
    /// Run the five detectors and the vote; writes report.json, flags.csv, scores.csv and figures.
    Detect {
        /// Merged CSV to analyse; defaults to the fixture or OUT/data/merged.csv.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print the summary table and regenerate figures from a saved report.
    Report {
        /// Report to read; defaults to OUT/report.json.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Never touch the network; requests must be served from the cache.
    #[arg(long, global = true)]
    offline: bool,
    /// Use a bundled dataset instead of fetched data (appendix_a1).
    #[arg(long, global = true)]
    fixture: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    year: Option<u16>,
    #[arg(long, global = true)]
    contamination: Option<f64>,
    /// LOF neighbourhood size.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Isolation Forest tree count.
    #[arg(long, global = true)]
    trees: Option<usize>,
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// `scale` or a positive number.
    #[arg(long, global = true)]
    gamma: Option<String>,
    #[arg(long, global = true)]
    zscore_c: Option<f64>,
    /// `percentile:P` or `chi2:ALPHA`.
    #[arg(long, global = true)]
    mahalanobis: Option<String>,
    #[arg(long, global = true)]
    vote_threshold: Option<u32>,
    /// Any config key, as KEY=VALUE; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl GlobalOpts {
    /// Defaults, then the config file, then the environment, then `--set`, then flags.
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.load_file(path)?;
        }
        c.apply_env();
        c.apply_overrides(&self.set)?;
        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut push = |key, v: Option<String>| {
            if let Some(v) = v {
                flags.push((key, v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("year", self.year.map(|v| v.to_string()));
        push("contamination", self.contamination.map(|v| v.to_string()));
        push("lof.k", self.k.map(|v| v.to_string()));
        push("iforest.trees", self.trees.map(|v| v.to_string()));
        push("ocsvm.nu", self.nu.map(|v| v.to_string()));
        push("ocsvm.gamma", self.gamma.clone());
        push("zscore.c", self.zscore_c.map(|v| v.to_string()));
        push("mahalanobis", self.mahalanobis.clone());
        push("vote_threshold", self.vote_threshold.map(|v| v.to_string()));
        push("fixture", self.fixture.clone());
        for (key, value) in flags {
            c.set(key, &value)?;
        }
        if let Some(out) = &self.out {
            c.out_dir = out.clone();
        }
        if let Some(dir) = &self.cache_dir {
            c.cache_dir = dir.clone();
        }
        if self.offline {
            c.offline = true;
        }
        c.finish()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.opts.resolve()?;
    match cli.command {
        Command::Fetch => commands::fetch(&config),
        Command::Detect { input } => commands::detect(&config, input.as_deref()).map(|_| ()),
        Command::Report { report } => commands::report(&config, report.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
