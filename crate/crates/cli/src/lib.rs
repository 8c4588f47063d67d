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

//! Pipeline driver behind the `velocity` binary.
//!
//! Every command takes a [`RunConfig`], writes its artifacts into
//! `config.output` and echoes the resolved config there as
//! `run_config.toml`, so the same numbers can be regenerated with
//! `velocity <command> --config <output>/run_config.toml`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use velocity_core::balance::{build_balance_series, time_average_balance, write_balance_csv};
use velocity_core::cohorts::{estimate_by_group, partition_durations, CategoryFilter, CohortAttribute, CohortSpec};
use velocity_core::density::{fit_with, Bandwidth, CURVE_POINTS, DEFAULT_QUAD_TOL, DEFAULT_TAU_FLOOR};
use velocity_core::estimators::{distributional_estimate, total_flow, write_estimates_csv, KdeOptions};
use velocity_core::flowtrace::{
    extract_held_durations, read_held_durations, write_held_durations, ExtractConfig, Formulation, HeldDuration,
    DEFAULT_CUTOFF,
};
use velocity_core::ledger::{
    parse_accounts, parse_timestamp, parse_transactions, write_accounts_csv, write_rejections_csv,
    write_transactions_csv, ColumnMap, TimestampFormat,
};
use velocity_core::synthgen::{generate, GroundTruth, SynthSpec};
use velocity_core::window::{format_date, TimeGrain};
use velocity_core::{Amount, Ledger, Timestamp, Window};

pub const CONFIG_ECHO: &str = "run_config.toml";

/// Floors reported in the `τ_floor` sensitivity table, in seconds.
pub const SENSITIVITY_FLOORS: [f64; 3] = [0.1, 1.0, 60.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Extract,
    Estimate,
    Report,
    Synth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Extract => "extract",
            Command::Estimate => "estimate",
            Command::Report => "report",
            Command::Synth => "synth",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// The config does not supply what the command needs.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Fatal(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Fatal(_) => 1,
        }
    }
}

/// Everything a run depends on. Unset fields take library defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub transactions: Option<PathBuf>,
    pub accounts: Option<PathBuf>,
    /// Column map for the raw files; the normalized layout when unset.
    pub columns: Option<PathBuf>,
    /// Held-durations CSV to estimate from instead of re-extracting.
    pub durations: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Window start, inclusive: epoch seconds or an ISO 8601 date/time.
    pub start: Option<String>,
    /// Window end, exclusive.
    pub end: Option<String>,
    pub cutoff: Amount,
    pub formulation: Formulation,
    pub tau_floor: f64,
    pub quad_tol: f64,
    /// Fixed log-space bandwidth; Scott's rule when unset.
    pub bandwidth: Option<f64>,
    pub time_grain: TimeGrain,
    pub cohort: CohortAttribute,
    pub categories: CategoryFilter,
    /// Synthetic ledger spec for `synth`.
    pub synth: Option<PathBuf>,
    /// Overrides the seed in the synth spec.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            transactions: None,
            accounts: None,
            columns: None,
            durations: None,
            output: None,
            start: None,
            end: None,
            cutoff: DEFAULT_CUTOFF,
            formulation: Formulation::default(),
            tau_floor: DEFAULT_TAU_FLOOR,
            quad_tol: DEFAULT_QUAD_TOL,
            bandwidth: None,
            time_grain: TimeGrain::default(),
            cohort: CohortAttribute::default(),
            categories: CategoryFilter::default(),
            synth: None,
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn extract_config(&self) -> ExtractConfig {
        ExtractConfig { cutoff: self.cutoff, formulation: self.formulation }
    }

    pub fn kde_options(&self) -> KdeOptions {
        KdeOptions {
            tau_floor: self.tau_floor,
            quad_tol: self.quad_tol,
            bandwidth: self.bandwidth.map_or(Bandwidth::Scott, Bandwidth::Fixed),
        }
    }

    pub fn cohort_spec(&self) -> CohortSpec {
        CohortSpec { time_grain: self.time_grain, attribute: self.cohort, categories: self.categories.clone() }
    }

    fn output_dir(&self) -> Result<&Path, CliError> {
        self.output.as_deref().ok_or_else(|| CliError::Usage("an output directory is required".into()))
    }

    fn required<'a>(&self, field: &'a Option<PathBuf>, name: &str, command: Command) -> Result<&'a Path, CliError> {
        field.as_deref().ok_or_else(|| CliError::Usage(format!("`{}` needs `{name}`", command.name())))
    }

    fn bound(&self, raw: &Option<String>, name: &str) -> Result<Option<Timestamp>, CliError> {
        raw.as_deref()
            .map(|s| {
                s.trim()
                    .parse::<Timestamp>()
                    .or_else(|_| parse_timestamp(s, TimestampFormat::Iso8601))
                    .map_err(|e| CliError::Usage(format!("invalid {name} `{s}`: {e}")))
            })
            .transpose()
    }
}

/// Runs `command`, writing its artifacts and the config echo.
pub fn execute(command: Command, config: &RunConfig) -> Result<(), CliError> {
    let out = config.output_dir()?.to_path_buf();
    match command {
        Command::Ingest => ingest(config, &out)?,
        Command::Extract => extract(config, &out)?,
        Command::Estimate => estimate(config, &out)?,
        Command::Report => report(config, &out)?,
        Command::Synth => synth(config, &out)?,
    }
    write_file(&out.join(CONFIG_ECHO), config.to_toml_string().as_bytes())?;
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)?;
    Ok(w.flush()?)
}

fn column_map(config: &RunConfig) -> anyhow::Result<ColumnMap> {
    Ok(match &config.columns {
        Some(path) => ColumnMap::load(path)?,
        None => ColumnMap::normalized(),
    })
}

struct Loaded {
    ledger: Ledger,
    rejected_transactions: Vec<velocity_core::ledger::Rejection>,
    rejected_accounts: Vec<velocity_core::ledger::Rejection>,
}

fn load_ledger(config: &RunConfig, command: Command) -> Result<Loaded, CliError> {
    let tx_path = config.required(&config.transactions, "transactions", command)?;
    let start = config.bound(&config.start, "start")?;
    let end = config.bound(&config.end, "end")?;
    let map = column_map(config)?;
    let (txs, tx_report) = parse_transactions(tx_path, &map).context("reading transactions")?;
    let (accounts, acc_report) = match &config.accounts {
        Some(path) => {
            let (a, r) = parse_accounts(path, &map).context("reading accounts")?;
            (a, r.rejected)
        }
        None => Default::default(),
    };
    let mut ledger = Ledger::with_spanning_window(txs, accounts).context("building ledger")?;
    if start.is_some() || end.is_some() {
        let span = ledger.window().clone();
        let window = Window::new(start.unwrap_or(span.start), end.unwrap_or(span.end), "full")
            .map_err(|e| CliError::Usage(format!("invalid window: {e}")))?;
        ledger = ledger.with_window(window);
    }
    Ok(Loaded { ledger, rejected_transactions: tx_report.rejected, rejected_accounts: acc_report })
}

fn durations_for(config: &RunConfig, ledger: &Ledger) -> anyhow::Result<Vec<HeldDuration>> {
    match &config.durations {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_held_durations(file).with_context(|| format!("reading {}", path.display()))
        }
        None => Ok(extract_held_durations(ledger, config.extract_config())?.durations),
    }
}

fn ingest(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let loaded = load_ledger(config, Command::Ingest)?;
    let ledger = &loaded.ledger;
    let mut w = create(&out.join("ledger.csv"))?;
    write_transactions_csv(&mut w, ledger.transactions()).context("writing ledger")?;
    w.flush().context("writing ledger")?;
    let mut w = create(&out.join("accounts.csv"))?;
    write_accounts_csv(&mut w, ledger.accounts().values()).context("writing accounts")?;
    w.flush().context("writing accounts")?;
    let mut w = create(&out.join("rejections.csv"))?;
    write_rejections_csv(&mut w, &loaded.rejected_transactions).context("writing rejections")?;
    w.flush().context("writing rejections")?;
    let mut w = create(&out.join("account_rejections.csv"))?;
    write_rejections_csv(&mut w, &loaded.rejected_accounts).context("writing rejections")?;
    w.flush().context("writing rejections")?;
    Ok(())
}

fn extract(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let loaded = load_ledger(config, Command::Extract)?;
    let extraction = extract_held_durations(&loaded.ledger, config.extract_config()).context("extracting")?;
    let mut w = create(&out.join("held_durations.csv"))?;
    write_held_durations(&mut w, &extraction.durations).context("writing held durations")?;
    w.flush().context("writing held durations")?;
    Ok(())
}

fn estimate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let ledger = load_ledger(config, Command::Estimate)?.ledger;
    let durations = durations_for(config, &ledger)?;
    let spec = config.cohort_spec();
    let cells = partition_durations(&durations, ledger.accounts(), ledger.window(), &spec);
    let series = build_balance_series(&ledger);
    let estimates = estimate_by_group(&cells, &ledger, &series, &spec, &config.kde_options()).context("estimating")?;
    let mut w = create(&out.join("estimates.csv"))?;
    write_estimates_csv(&mut w, &estimates).context("writing estimates")?;
    w.flush().context("writing estimates")?;
    let mut w = create(&out.join("balance.csv"))?;
    write_balance_csv(&mut w, &series).context("writing balance series")?;
    w.flush().context("writing balance series")?;
    Ok(())
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.digits$}"))
}

fn report(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let ledger = load_ledger(config, Command::Report)?.ledger;
    let durations = durations_for(config, &ledger)?;
    let opts = config.kde_options();
    let spec = config.cohort_spec();

    let cells = partition_durations(&durations, ledger.accounts(), ledger.window(), &spec);
    for ((window, cohort), dist) in &cells {
        if dist.is_empty() {
            continue;
        }
        let name = format!("density/{}_{}.csv", file_stem(&window.label), file_stem(cohort));
        match fit_with(dist, opts.tau_floor, opts.bandwidth) {
            Ok(model) => {
                let mut w = create(&out.join(name))?;
                velocity_core::density::write_density_curve(&mut w, &model.curve(CURVE_POINTS))
                    .context("writing density curve")?;
                w.flush().context("writing density curve")?;
            }
            Err(velocity_core::density::KdeError::Degenerate { .. }) => {}
            Err(e) => return Err(anyhow::Error::from(e).context("fitting density").into()),
        }
    }

    let window = ledger.window().clone();
    let full = CohortSpec { time_grain: TimeGrain::Full, attribute: CohortAttribute::None, ..spec };
    let pooled =
        partition_durations(&durations, ledger.accounts(), &window, &full).into_values().next().unwrap_or_default();
    let flow = total_flow(&ledger, &window);
    let series = build_balance_series(&ledger);
    let m_avg = time_average_balance(&series, &window).context("averaging balance")?;
    let v_conv = velocity_core::estimators::conventional_velocity(flow, m_avg, &window).context("estimating")?;
    let dist_est = |opts: &KdeOptions| -> anyhow::Result<_> {
        match distributional_estimate(&pooled, &window, flow, opts) {
            Err(velocity_core::estimators::EstimateError::Kde(velocity_core::density::KdeError::Degenerate {
                ..
            })) => Ok(None),
            other => Ok(other?),
        }
    };
    let main = dist_est(&opts).context("estimating")?;
    let static_share = main.as_ref().filter(|_| m_avg > 0.0).map(|d| 1.0 - d.m_t / m_avg);

    let mut summary = String::from(
        "window_start,window_end,categories,F_T,M_avg,V_conv_per_week,tau_bar_seconds,V_T_per_week,M_T,static_share\n",
    );
    summary.push_str(&format!(
        "{},{},{},{},{:.2},{},{},{},{},{}\n",
        format_date(window.start),
        format_date(window.end),
        full.categories,
        flow,
        m_avg,
        fixed(v_conv, 2),
        fixed(main.as_ref().map(|d| d.tau_bar), 0),
        fixed(main.as_ref().map(|d| d.v_t), 2),
        fixed(main.as_ref().map(|d| d.m_t), 2),
        fixed(static_share, 2),
    ));
    write_file(&out.join("summary.csv"), summary.as_bytes())?;

    let mut sensitivity = String::from("tau_floor_seconds,tau_bar_seconds,V_T_per_week,M_T\n");
    for floor in SENSITIVITY_FLOORS {
        let d = dist_est(&KdeOptions { tau_floor: floor, ..opts }).context("estimating")?;
        sensitivity.push_str(&format!(
            "{floor},{},{},{}\n",
            fixed(d.as_ref().map(|d| d.tau_bar), 0),
            fixed(d.as_ref().map(|d| d.v_t), 2),
            fixed(d.as_ref().map(|d| d.m_t), 2),
        ));
    }
    write_file(&out.join("tau_floor_sensitivity.csv"), sensitivity.as_bytes())?;
    Ok(())
}

/// Ground truth plus the generated window, for `ground_truth.toml`.
#[derive(Debug, Serialize)]
struct SynthTruth<'a> {
    window_start: Timestamp,
    window_end: Timestamp,
    #[serde(flatten)]
    truth: &'a GroundTruth,
}

fn synth(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let path = config.required(&config.synth, "synth", Command::Synth)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec = SynthSpec::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(seed) = config.seed {
        spec.seed = seed;
    }
    let synth = generate(&spec).context("generating")?;
    let ledger = &synth.ledger;
    let mut w = create(&out.join("transactions.csv"))?;
    write_transactions_csv(&mut w, ledger.transactions()).context("writing transactions")?;
    w.flush().context("writing transactions")?;
    let mut w = create(&out.join("accounts.csv"))?;
    write_accounts_csv(&mut w, ledger.accounts().values()).context("writing accounts")?;
    w.flush().context("writing accounts")?;
    write_file(&out.join("columns.toml"), ColumnMap::normalized().to_toml_string().as_bytes())?;
    write_file(&out.join("synth_spec.toml"), spec.to_toml_string().as_bytes())?;
    let truth =
        SynthTruth { window_start: ledger.window().start, window_end: ledger.window().end, truth: &synth.truth };
    let truth = toml::to_string(&truth).context("serializing ground truth")?;
    write_file(&out.join("ground_truth.toml"), truth.as_bytes())?;
    Ok(())
}
