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

//! Synthetic ledgers with known ground truth.
//!
//! The stationary model disburses a fixed balance to every account at the
//! start. Each initial balance then travels as an indivisible packet: its
//! holder waits a random time and passes it whole to a uniformly chosen
//! other account. An account holding one packet spends its entire balance.
//! With several packets on hand the well-mixed rule drains every fragment at
//! the same per-unit rate, so for exponential waits the flow-weighted mean
//! held duration is `1/λ` and the true velocity is `λ`. Packets never merge,
//! so the transfer count stays near `n·λ·horizon`.
//!
//! Randomness comes from `ChaCha8Rng` seeded with `SynthSpec::seed`, so a
//! spec always produces the same ledger.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::ledger::{sort_transactions, Account, AreaType, Ledger, LedgerError, Transaction, TransferKind};
use crate::window::{Timestamp, Window, SECONDS_PER_WEEK};

/// Source of disbursements and target of reclamations.
pub const MINT: &str = "mint";
/// Sunday 2020-02-02T00:00:00Z.
pub const DEFAULT_START: Timestamp = 1_580_601_600;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DurationModel {
    Exponential {
        rate_per_week: f64,
    },
    /// Waits with `ln(wait in weeks) ~ N(mu, sigma²)`.
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    /// Even-numbered accounts are urban, odd ones rural.
    TwoGroup {
        urban_rate_per_week: f64,
        rural_rate_per_week: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdminAction {
    /// Disburse `amount_each` to each of `accounts` fresh accounts that
    /// never spend.
    DisburseStatic {
        accounts: usize,
        amount_each: Amount,
    },
    DisburseTo {
        account: String,
        amount: Amount,
    },
    /// Reclaim the whole balance of every account with no activity in the
    /// preceding `idle_weeks`.
    ReclaimIdle {
        idle_weeks: f64,
    },
    /// Reclaim up to `amount` from one account.
    ReclaimFrom {
        account: String,
        amount: Amount,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdminOp {
    /// Weeks after the start of the ledger.
    pub at_week: f64,
    pub action: AdminAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_accounts: usize,
    pub initial_balance: Amount,
    pub duration_model: DurationModel,
    pub horizon_weeks: f64,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: Timestamp,
    #[serde(default)]
    pub admin_ops: Vec<AdminOp>,
}

fn default_start() -> Timestamp {
    DEFAULT_START
}

impl SynthSpec {
    pub fn exponential(n_accounts: usize, rate_per_week: f64, horizon_weeks: f64, seed: u64) -> Self {
        SynthSpec {
            n_accounts,
            initial_balance: Amount::from_units(100),
            duration_model: DurationModel::Exponential { rate_per_week },
            horizon_weeks,
            seed,
            start: DEFAULT_START,
            admin_ops: Vec::new(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec = toml::from_str(s).map_err(|e| SynthError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("synth spec serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SynthError::Spec(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if self.n_accounts == 0 {
            return Err(SynthError::Spec("n_accounts must be at least 1".into()));
        }
        if !self.initial_balance.is_positive() {
            return Err(SynthError::Spec("initial_balance must be positive".into()));
        }
        positive("horizon_weeks", self.horizon_weeks)?;
        match self.duration_model {
            DurationModel::Exponential { rate_per_week } => positive("rate_per_week", rate_per_week)?,
            DurationModel::Lognormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(SynthError::Spec(format!("mu must be finite, got {mu}")));
                }
                positive("sigma", sigma)?
            }
            DurationModel::TwoGroup { urban_rate_per_week, rural_rate_per_week } => {
                positive("urban_rate_per_week", urban_rate_per_week)?;
                positive("rural_rate_per_week", rural_rate_per_week)?
            }
        }
        for op in &self.admin_ops {
            if !(op.at_week >= 0.0 && op.at_week <= self.horizon_weeks) {
                return Err(SynthError::Spec(format!("admin op at week {} outside horizon", op.at_week)));
            }
        }
        Ok(())
    }

    fn end(&self) -> Timestamp {
        self.start + (self.horizon_weeks * SECONDS_PER_WEEK as f64).round() as Timestamp
    }

    /// Expected number of spends per account over the horizon.
    fn expected_spends(&self) -> f64 {
        let slowest_rate = match self.duration_model {
            DurationModel::Exponential { rate_per_week } => rate_per_week,
            DurationModel::Lognormal { mu, sigma } => 1.0 / (mu + 0.5 * sigma * sigma).exp(),
            DurationModel::TwoGroup { urban_rate_per_week, rural_rate_per_week } => {
                urban_rate_per_week.min(rural_rate_per_week)
            }
        };
        slowest_rate * self.horizon_weeks
    }
}

/// What the generator knows to be true about its ledger.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// System velocity per week, when the model fixes one.
    pub velocity_per_week: Option<f64>,
    /// Per-cohort (area type) velocity per week.
    pub cohort_velocity_per_week: BTreeMap<String, f64>,
    /// Balance taking part in the stationary process.
    pub circulating_mass: Amount,
    /// Disbursed balance that never moves.
    pub static_mass: Amount,
    pub reclaimed: Amount,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthLedger {
    pub ledger: Ledger,
    pub truth: GroundTruth,
}

fn account_id(i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("a{i:0width$}")
}

fn weeks_to_seconds(weeks: f64) -> i64 {
    ((weeks * SECONDS_PER_WEEK as f64).round() as i64).max(1)
}

enum Waits {
    Single(Exp<f64>),
    LogNormal(LogNormal<f64>),
    Grouped(Exp<f64>, Exp<f64>),
}

impl Waits {
    fn new(model: &DurationModel) -> Result<Self, SynthError> {
        let bad = |e: &dyn std::fmt::Display| SynthError::Spec(e.to_string());
        Ok(match *model {
            DurationModel::Exponential { rate_per_week } => {
                Waits::Single(Exp::new(rate_per_week).map_err(|e| bad(&e))?)
            }
            DurationModel::Lognormal { mu, sigma } => Waits::LogNormal(LogNormal::new(mu, sigma).map_err(|e| bad(&e))?),
            DurationModel::TwoGroup { urban_rate_per_week, rural_rate_per_week } => Waits::Grouped(
                Exp::new(urban_rate_per_week).map_err(|e| bad(&e))?,
                Exp::new(rural_rate_per_week).map_err(|e| bad(&e))?,
            ),
        })
    }

    /// Wait in seconds before account `i` passes a packet on.
    fn draw(&self, i: usize, rng: &mut ChaCha8Rng) -> i64 {
        let weeks = match self {
            Waits::Single(d) => d.sample(rng),
            Waits::LogNormal(d) => d.sample(rng),
            Waits::Grouped(u, r) => {
                if i.is_multiple_of(2) {
                    u.sample(rng)
                } else {
                    r.sample(rng)
                }
            }
        };
        weeks_to_seconds(weeks)
    }
}

/// Generates the stationary packet re-spending ledger, then applies
/// `spec.admin_ops`.
pub fn generate(spec: &SynthSpec) -> Result<SynthLedger, SynthError> {
    let base = generate_stationary(spec)?;
    inject_admin_ops(base, &spec.admin_ops)
}

/// The stationary ledger alone; `spec.admin_ops` is ignored.
pub fn generate_stationary(spec: &SynthSpec) -> Result<SynthLedger, SynthError> {
    spec.validate()?;
    let n = spec.n_accounts;
    let end = spec.end();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let waits = Waits::new(&spec.duration_model)?;
    let ids: Vec<String> = (0..n).map(|i| account_id(i, n)).collect();

    let mut truth = GroundTruth::default();
    let two_group = matches!(spec.duration_model, DurationModel::TwoGroup { .. });
    let accounts: BTreeMap<String, Account> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut a = Account::unknown(id.clone());
            a.business_type = "synthetic".into();
            if two_group {
                a.area_type = if i % 2 == 0 { AreaType::Urban } else { AreaType::Rural };
            }
            (id.clone(), a)
        })
        .collect();
    match spec.duration_model {
        DurationModel::Exponential { rate_per_week } => truth.velocity_per_week = Some(rate_per_week),
        DurationModel::TwoGroup { urban_rate_per_week, rural_rate_per_week } => {
            truth.cohort_velocity_per_week.insert("urban".into(), urban_rate_per_week);
            truth.cohort_velocity_per_week.insert("rural".into(), rural_rate_per_week);
        }
        DurationModel::Lognormal { .. } => {}
    }
    if spec.expected_spends() < 1.0 {
        truth
            .warnings
            .push(format!("horizon of {} weeks allows fewer than one expected spend per account", spec.horizon_weeks));
    }

    let mut transactions = Vec::new();
    let mut next_id = 0usize;
    let mut push = |transactions: &mut Vec<Transaction>, t, source: &str, target: &str, amount, kind| {
        transactions.push(Transaction {
            id: format!("s{next_id}"),
            timestamp: t,
            source: source.to_string(),
            target: target.to_string(),
            amount,
            kind,
        });
        next_id += 1;
    };

    for id in &ids {
        push(&mut transactions, spec.start, MINT, id, spec.initial_balance, TransferKind::Disbursement);
    }
    truth.circulating_mass = Amount::from_minor(spec.initial_balance.minor() * n as i64);

    // Each initial balance moves as one packet, re-spent whole after a wait
    // drawn for the account currently holding it.
    let mut holder: Vec<usize> = (0..n).collect();
    let mut queue: BinaryHeap<Reverse<(Timestamp, usize)>> =
        (0..n).map(|p| Reverse((spec.start + waits.draw(p, &mut rng), p))).collect();
    while let Some(Reverse((t, p))) = queue.pop() {
        if t >= end {
            break;
        }
        let i = holder[p];
        let j = if n == 1 {
            0
        } else {
            let r = rng.random_range(0..n - 1);
            if r >= i {
                r + 1
            } else {
                r
            }
        };
        push(&mut transactions, t, &ids[i], &ids[j], spec.initial_balance, TransferKind::TransferStandard);
        holder[p] = j;
        queue.push(Reverse((t + waits.draw(j, &mut rng), p)));
    }

    let window = Window::new(spec.start, end, "full").map_err(LedgerError::from)?;
    Ok(SynthLedger { ledger: Ledger::new(transactions, accounts, window)?, truth })
}

/// Disbursed amount that makes `share` of the total balance static when
/// `circulating` is already in circulation.
pub fn static_mass_for_share(circulating: Amount, share: f64) -> Amount {
    assert!((0.0..1.0).contains(&share), "share must be in [0, 1)");
    let minor = (circulating.minor() as f64 * share / (1.0 - share)).round() as i64;
    Amount::from_minor(minor)
}

/// Balance and last activity per account over a sorted transaction list,
/// counting transactions at or before `at`.
fn state_at(transactions: &[Transaction], at: Timestamp) -> HashMap<&str, (Amount, Timestamp)> {
    let mut state: HashMap<&str, (Amount, Timestamp)> = HashMap::new();
    for tx in transactions.iter().take_while(|t| t.timestamp <= at) {
        if tx.kind != TransferKind::Disbursement {
            let e = state.entry(tx.source.as_str()).or_insert((Amount::ZERO, tx.timestamp));
            e.0 -= tx.amount;
            e.1 = tx.timestamp;
        }
        if tx.kind != TransferKind::Reclamation {
            let e = state.entry(tx.target.as_str()).or_insert((Amount::ZERO, tx.timestamp));
            e.0 += tx.amount;
            e.1 = tx.timestamp;
        }
    }
    state
}

/// Inserts disbursements and reclamations. Each operation sees the ledger
/// as left by the operations before it; an operation at time `t` lands
/// after every existing transaction at `t`. Over-large reclamations are
/// truncated to the account balance with a warning.
pub fn inject_admin_ops(synth: SynthLedger, ops: &[AdminOp]) -> Result<SynthLedger, SynthError> {
    if ops.is_empty() {
        return Ok(synth);
    }
    let SynthLedger { ledger, mut truth } = synth;
    let start = ledger.window().start;
    let (mut transactions, mut accounts, window) = ledger.into_parts();

    let mut ordered: Vec<&AdminOp> = ops.iter().collect();
    ordered.sort_by(|a, b| a.at_week.total_cmp(&b.at_week));
    let mut static_count = accounts.keys().filter(|k| k.starts_with("static-")).count();

    for (k, op) in ordered.into_iter().enumerate() {
        let t = start + (op.at_week * SECONDS_PER_WEEK as f64).round() as Timestamp;
        let mut inserted = Vec::new();
        let mk = |n: usize, source: &str, target: &str, amount: Amount, kind| Transaction {
            id: format!("op{k}-{n}"),
            timestamp: t,
            source: source.to_string(),
            target: target.to_string(),
            amount,
            kind,
        };
        match &op.action {
            AdminAction::DisburseStatic { accounts: count, amount_each } => {
                for n in 0..*count {
                    let id = format!("static-{static_count:05}");
                    static_count += 1;
                    let mut a = Account::unknown(id.clone());
                    a.business_type = "static".into();
                    accounts.insert(id.clone(), a);
                    inserted.push(mk(n, MINT, &id, *amount_each, TransferKind::Disbursement));
                    truth.static_mass += *amount_each;
                }
            }
            AdminAction::DisburseTo { account, amount } => {
                accounts.entry(account.clone()).or_insert_with(|| Account::unknown(account.clone()));
                inserted.push(mk(0, MINT, account, *amount, TransferKind::Disbursement));
            }
            AdminAction::ReclaimIdle { idle_weeks } => {
                let cutoff = t - (idle_weeks * SECONDS_PER_WEEK as f64).round() as Timestamp;
                let state = state_at(&transactions, t);
                let mut idle: Vec<_> = state
                    .into_iter()
                    .filter(|(id, (bal, last))| *id != MINT && bal.is_positive() && *last < cutoff)
                    .collect();
                idle.sort_by(|a, b| a.0.cmp(b.0));
                for (n, (id, (bal, _))) in idle.into_iter().enumerate() {
                    inserted.push(mk(n, id, MINT, bal, TransferKind::Reclamation));
                    truth.reclaimed += bal;
                }
            }
            AdminAction::ReclaimFrom { account, amount } => {
                let held = state_at(&transactions, t).get(account.as_str()).map_or(Amount::ZERO, |s| s.0);
                let take = (*amount).min(held.max(Amount::ZERO));
                if take < *amount {
                    truth.warnings.push(format!(
                        "reclaim of {amount} from `{account}` at week {} truncated to {take}",
                        op.at_week
                    ));
                }
                if take.is_positive() {
                    inserted.push(mk(0, account, MINT, take, TransferKind::Reclamation));
                    truth.reclaimed += take;
                }
            }
        }
        let at = transactions.partition_point(|x| x.timestamp <= t);
        transactions.splice(at..at, inserted);
    }
    sort_transactions(&mut transactions);
    Ok(SynthLedger { ledger: Ledger::new(transactions, accounts, window)?, truth })
}
