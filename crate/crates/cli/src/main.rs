// Copyright 2026 The Velocity Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use velocity_cli::{execute, Command, RunConfig};
use velocity_core::cohorts::{CategoryFilter, CohortAttribute};
use velocity_core::flowtrace::Formulation;
use velocity_core::window::TimeGrain;
use velocity_core::Amount;

/// Held-duration extraction and velocity-of-money estimation for
/// transaction ledgers.
#[derive(Debug, Parser)]
#[command(name = "velocity", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Normalize raw CSV exports into a sorted ledger plus rejection report.
    Ingest(Flags),
    /// Trace funds through the ledger and write held durations.
    Extract(Flags),
    /// Write per-cell velocity estimates and the hourly balance series.
    Estimate(Flags),
    /// Write density curves, the summary table and τ-floor sensitivity.
    Report(Flags),
    /// Generate a synthetic ledger with known ground truth.
    Synth(Flags),
}

/// Overrides for [`RunConfig`]. The config file overrides defaults and
/// flags override the config file.
#[derive(Debug, Args)]
struct Flags {
    /// TOML run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    transactions: Option<PathBuf>,
    #[arg(long)]
    accounts: Option<PathBuf>,
    /// TOML column map for the raw files.
    #[arg(long)]
    columns: Option<PathBuf>,
    /// Held-durations CSV to estimate from.
    #[arg(long)]
    durations: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Window start: epoch seconds or ISO 8601.
    #[arg(long)]
    start: Option<String>,
    /// Window end, exclusive.
    #[arg(long)]
    end: Option<String>,
    #[arg(long)]
    cutoff: Option<Amount>,
    /// `absent` or `present`.
    #[arg(long)]
    formulation: Option<Formulation>,
    #[arg(long)]
    tau_floor: Option<f64>,
    #[arg(long)]
    quad_tol: Option<f64>,
    /// Fixed bandwidth in log-seconds instead of Scott's rule.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// `full`, `weekly` or `monthly`.
    #[arg(long)]
    time_grain: Option<TimeGrain>,
    /// `none`, `area_type`, `area_name` or `business_type`.
    #[arg(long)]
    cohort: Option<CohortAttribute>,
    /// `all`, `circulating` or a comma-separated category list.
    #[arg(long)]
    categories: Option<CategoryFilter>,
    /// Synthetic ledger spec (TOML).
    #[arg(long)]
    synth: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Flags {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { c.$field = v; }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() { c.$field = self.$field; }
            )*};
        }
        set!(cutoff, formulation, tau_floor, quad_tol, time_grain, cohort, categories);
        set_opt!(transactions, accounts, columns, durations, output, start, end, bandwidth, synth, seed);
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Ingest(f) => (Command::Ingest, f),
        Sub::Extract(f) => (Command::Extract, f),
        Sub::Estimate(f) => (Command::Estimate, f),
        Sub::Report(f) => (Command::Report, f),
        Sub::Synth(f) => (Command::Synth, f),
    };
    let config = match flags.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("velocity: {e:#}");
            return ExitCode::from(2);
        }
    };
    match execute(command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("velocity {}: {e:#}", command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
