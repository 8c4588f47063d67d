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

//! Pairwise trajectory extraction under the well-mixed heuristic.
//!
//! Every transaction first settles at its source account, drawing on the
//! account's pool of incoming fragments in proportion to their share of the
//! balance, and then deposits a fresh fragment at its target. Each
//! (fragment, outgoing transaction) pair with a non-zero allocation yields a
//! [`HeldDuration`]. Disbursements create funds and are never settled at
//! their source; reclamations dissolve funds and never deposit.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::ledger::{Ledger, Transaction, TransferKind};
use crate::window::Timestamp;

pub const DEFAULT_CUTOFF: Amount = Amount::from_minor(10);

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("negative outgoing amount {0}")]
    NegativeAmount(Amount),
    #[error("outgoing transaction at {out_time} precedes fragment entry at {entry_time} in account `{account}`")]
    Ordering { account: String, entry_time: Timestamp, out_time: Timestamp },
    #[error("transactions out of time order at position {0}")]
    Unsorted(usize),
    #[error("held-durations line {line}: {reason}")]
    Format { line: u64, reason: String },
    #[error("csv error")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowCategory {
    /// Disbursed funds transferred for the first time.
    Entering,
    /// Transfer followed by transfer.
    Remaining,
    /// Transfer followed by reclamation.
    Removed,
    /// Disbursement followed directly by reclamation.
    NeverCirculated,
    /// Any pair involving an unclassified kind; excluded from analysis subsets.
    Other,
}

impl FlowCategory {
    pub const CLASSIFIED: [FlowCategory; 4] =
        [FlowCategory::Entering, FlowCategory::Remaining, FlowCategory::Removed, FlowCategory::NeverCirculated];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowCategory::Entering => "ENTERING",
            FlowCategory::Remaining => "REMAINING",
            FlowCategory::Removed => "REMOVED",
            FlowCategory::NeverCirculated => "NEVER_CIRCULATED",
            FlowCategory::Other => "OTHER",
        }
    }
}

impl fmt::Display for FlowCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ENTERING" => Ok(FlowCategory::Entering),
            "REMAINING" => Ok(FlowCategory::Remaining),
            "REMOVED" => Ok(FlowCategory::Removed),
            "NEVER_CIRCULATED" => Ok(FlowCategory::NeverCirculated),
            "OTHER" => Ok(FlowCategory::Other),
            other => Err(format!("unknown flow category `{other}`")),
        }
    }
}

pub fn categorize_flow(in_kind: TransferKind, out_kind: TransferKind) -> FlowCategory {
    use TransferKind::*;
    match (in_kind, out_kind) {
        (Disbursement, o) if o.is_transfer() => FlowCategory::Entering,
        (Disbursement, Reclamation) => FlowCategory::NeverCirculated,
        (i, o) if i.is_transfer() && o.is_transfer() => FlowCategory::Remaining,
        (i, Reclamation) if i.is_transfer() => FlowCategory::Removed,
        _ => FlowCategory::Other,
    }
}

/// How unobserved (untracked) mass enters later allocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Untracked mass is left out of the balance that fragments are shared
    /// against, and is drawn on only once every fragment is exhausted.
    #[default]
    Absent,
    /// Untracked mass is one more proportional share of the balance.
    Present,
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "absent" => Ok(Formulation::Absent),
            "present" => Ok(Formulation::Present),
            other => Err(format!("unknown formulation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fragment {
    pub entry_time: Timestamp,
    pub amount: Amount,
    pub source_kind: TransferKind,
    pub observed_entry: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountPool {
    pub account_id: String,
    pub fragments: Vec<Fragment>,
    /// Mass below the cutoff; carried for conservation, never traced.
    pub untracked: Amount,
}

impl AccountPool {
    pub fn new(account_id: impl Into<String>) -> Self {
        AccountPool { account_id: account_id.into(), fragments: Vec::new(), untracked: Amount::ZERO }
    }

    pub fn tracked(&self) -> Amount {
        self.fragments.iter().map(|f| f.amount).sum()
    }

    pub fn total(&self) -> Amount {
        self.tracked() + self.untracked
    }

    /// Adds a fragment, or sends its mass to `untracked` when below `cutoff`.
    pub fn deposit(&mut self, fragment: Fragment, cutoff: Amount) {
        if fragment.amount < cutoff {
            self.untracked += fragment.amount;
        } else if fragment.amount.is_positive() {
            self.fragments.push(fragment);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeldDuration {
    pub end_time: Timestamp,
    pub tau: i64,
    pub weight: Amount,
    pub account_id: String,
    pub category: FlowCategory,
    pub observed_entry: bool,
}

/// Result of settling one outgoing amount against a pool.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Allocation {
    pub durations: Vec<HeldDuration>,
    /// Drawn from untracked mass; emits no duration.
    pub untracked: Amount,
    /// Deficit beyond the pool balance, inferred as an unobserved inflow at
    /// the outgoing time and spent immediately.
    pub inferred: Amount,
}

/// Splits `total` minor units across `shares` in proportion to each share
/// of `denominator`, rounding by largest remainder. Ties go to the earlier
/// share. Requires `total <= denominator` and `denominator == Σ shares`.
fn largest_remainder(total: i64, shares: &[i64], denominator: i64) -> Vec<i64> {
    debug_assert!(0 <= total && total <= denominator);
    let mut parts = Vec::with_capacity(shares.len());
    let mut remainders = Vec::with_capacity(shares.len());
    let mut assigned = 0i64;
    for (i, &s) in shares.iter().enumerate() {
        let num = total as i128 * s as i128;
        let q = (num / denominator as i128) as i64;
        parts.push(q);
        remainders.push((num % denominator as i128, i));
        assigned += q;
    }
    let leftover = (total - assigned) as usize;
    if leftover > 0 {
        remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in remainders.iter().take(leftover) {
            parts[i] += 1;
        }
    }
    parts
}

/// Settles an outgoing amount against `pool` using the well-mixed rule.
///
/// Emitted weights, the untracked draw and the inferred deficit sum to
/// `out_amount` exactly. Fragments left below `cutoff` move to untracked.
pub fn allocate_well_mixed(
    pool: &mut AccountPool,
    out_amount: Amount,
    out_time: Timestamp,
    out_kind: TransferKind,
    cutoff: Amount,
    formulation: Formulation,
) -> Result<Allocation, FlowError> {
    if out_amount.is_negative() {
        return Err(FlowError::NegativeAmount(out_amount));
    }
    if let Some(f) = pool.fragments.iter().find(|f| f.entry_time > out_time) {
        return Err(FlowError::Ordering { account: pool.account_id.clone(), entry_time: f.entry_time, out_time });
    }
    let out = out_amount.minor();
    let tracked = pool.tracked().minor();
    let untracked = pool.untracked.minor();

    let mut shares: Vec<i64> = pool.fragments.iter().map(|f| f.amount.minor()).collect();
    let (fragment_parts, untracked_part, inferred) = match formulation {
        Formulation::Present => {
            let balance = tracked + untracked;
            if out >= balance {
                (shares, untracked, out - balance)
            } else {
                shares.push(untracked);
                let mut parts = largest_remainder(out, &shares, balance);
                let u = parts.pop().unwrap_or(0);
                (parts, u, 0)
            }
        }
        Formulation::Absent => {
            if out >= tracked {
                let from_untracked = (out - tracked).min(untracked);
                (shares, from_untracked, out - tracked - from_untracked)
            } else {
                (largest_remainder(out, &shares, tracked), 0, 0)
            }
        }
    };

    let mut durations = Vec::new();
    let mut residue = 0i64;
    let mut kept = Vec::with_capacity(pool.fragments.len());
    for (frag, part) in pool.fragments.iter().zip(fragment_parts) {
        if part > 0 {
            durations.push(HeldDuration {
                end_time: out_time,
                tau: out_time - frag.entry_time,
                weight: Amount::from_minor(part),
                account_id: pool.account_id.clone(),
                category: categorize_flow(frag.source_kind, out_kind),
                observed_entry: frag.observed_entry,
            });
        }
        let left = Amount::from_minor(frag.amount.minor() - part);
        if left >= cutoff && left.is_positive() {
            kept.push(Fragment { amount: left, ..*frag });
        } else {
            residue += left.minor();
        }
    }
    pool.fragments = kept;
    pool.untracked = Amount::from_minor(untracked - untracked_part + residue);

    Ok(Allocation { durations, untracked: Amount::from_minor(untracked_part), inferred: Amount::from_minor(inferred) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub cutoff: Amount,
    pub formulation: Formulation,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { cutoff: DEFAULT_CUTOFF, formulation: Formulation::Absent }
    }
}

/// Per-transaction outcome from [`Extractor::process`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settlement {
    /// `None` for disbursements, which are not settled at their source.
    pub allocation: Option<Allocation>,
    pub deposited: bool,
}

/// Streaming state: one pool per account, fed transactions in time order.
#[derive(Debug, Clone, Default)]
pub struct Extractor {
    config: ExtractConfig,
    pools: HashMap<String, AccountPool>,
    last_time: Option<Timestamp>,
    position: usize,
}

impl Extractor {
    pub fn new(config: ExtractConfig) -> Self {
        Extractor { config, ..Default::default() }
    }

    pub fn config(&self) -> ExtractConfig {
        self.config
    }

    pub fn pool(&self, account: &str) -> Option<&AccountPool> {
        self.pools.get(account)
    }

    pub fn pools(&self) -> impl Iterator<Item = &AccountPool> {
        self.pools.values()
    }

    pub fn process(&mut self, tx: &Transaction) -> Result<Settlement, FlowError> {
        if self.last_time.is_some_and(|t| tx.timestamp < t) {
            return Err(FlowError::Unsorted(self.position));
        }
        self.last_time = Some(tx.timestamp);
        self.position += 1;

        let mut settlement = Settlement::default();
        if tx.kind != TransferKind::Disbursement {
            let pool = self.pools.entry(tx.source.clone()).or_insert_with(|| AccountPool::new(tx.source.clone()));
            settlement.allocation = Some(allocate_well_mixed(
                pool,
                tx.amount,
                tx.timestamp,
                tx.kind,
                self.config.cutoff,
                self.config.formulation,
            )?);
        }
        if tx.kind != TransferKind::Reclamation {
            let pool = self.pools.entry(tx.target.clone()).or_insert_with(|| AccountPool::new(tx.target.clone()));
            pool.deposit(
                Fragment { entry_time: tx.timestamp, amount: tx.amount, source_kind: tx.kind, observed_entry: true },
                self.config.cutoff,
            );
            settlement.deposited = true;
        }
        Ok(settlement)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionSummary {
    pub transactions: usize,
    pub durations: usize,
    pub emitted_weight: Amount,
    /// Weight of durations at administrative accounts, not emitted.
    pub admin_weight: Amount,
    /// Weight of durations ending outside the analysis window.
    pub out_of_window_weight: Amount,
    pub untracked_weight: Amount,
    pub inferred_weight: Amount,
    pub inferred_events: usize,
    pub self_transfers: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub durations: Vec<HeldDuration>,
    pub summary: ExtractionSummary,
}

/// Single pass over the ledger. Emits durations ending inside the ledger
/// window at non-administrative accounts, ordered by end time then ledger
/// order.
pub fn extract_held_durations(ledger: &Ledger, config: ExtractConfig) -> Result<Extraction, FlowError> {
    let window = ledger.window();
    let mut extractor = Extractor::new(config);
    let mut out = Extraction::default();
    let s = &mut out.summary;
    for tx in ledger.transactions() {
        s.transactions += 1;
        if tx.source == tx.target {
            s.self_transfers += 1;
        }
        let Some(alloc) = extractor.process(tx)?.allocation else { continue };
        s.untracked_weight += alloc.untracked;
        if alloc.inferred.is_positive() {
            s.inferred_weight += alloc.inferred;
            s.inferred_events += 1;
        }
        let weight: Amount = alloc.durations.iter().map(|d| d.weight).sum();
        if ledger.is_admin(&tx.source) {
            s.admin_weight += weight;
        } else if !window.contains(tx.timestamp) {
            s.out_of_window_weight += weight;
        } else {
            s.emitted_weight += weight;
            out.durations.extend(alloc.durations);
        }
    }
    s.durations = out.durations.len();
    Ok(out)
}

const HEADER: [&str; 6] = ["end_time", "tau_seconds", "weight", "account_id", "category", "observed_entry"];

pub fn write_held_durations<W: Write>(writer: W, durations: &[HeldDuration]) -> Result<(), FlowError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for d in durations {
        w.write_record([
            d.end_time.to_string().as_str(),
            &d.tau.to_string(),
            &d.weight.to_string(),
            &d.account_id,
            d.category.as_str(),
            if d.observed_entry { "true" } else { "false" },
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads the interchange file written by [`write_held_durations`]. Any
/// malformed row is an error.
pub fn read_held_durations<R: Read>(reader: R) -> Result<Vec<HeldDuration>, FlowError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(FlowError::Format { line: 1, reason: format!("unexpected header {headers:?}") });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| FlowError::Format { line, reason };
        let end_time = rec[0].parse::<i64>().map_err(|e| bad(format!("end_time: {e}")))?;
        let tau = rec[1].parse::<i64>().map_err(|e| bad(format!("tau_seconds: {e}")))?;
        if tau < 0 {
            return Err(bad(format!("negative tau {tau}")));
        }
        let weight: Amount = rec[2].parse().map_err(|e| bad(format!("weight: {e}")))?;
        if !weight.is_positive() {
            return Err(bad(format!("non-positive weight {weight}")));
        }
        let category = rec[4].parse().map_err(bad)?;
        let observed_entry = match &rec[5] {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("observed_entry `{other}`"))),
        };
        out.push(HeldDuration { end_time, tau, weight, account_id: rec[3].to_string(), category, observed_entry });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Account, AreaType};
    use std::collections::BTreeMap;

    fn units(u: i64) -> Amount {
        Amount::from_units(u)
    }

    fn frag(t: Timestamp, amount: i64) -> Fragment {
        Fragment {
            entry_time: t,
            amount: units(amount),
            source_kind: TransferKind::TransferStandard,
            observed_entry: true,
        }
    }

    fn pool(frags: &[(Timestamp, i64)]) -> AccountPool {
        let mut p = AccountPool::new("A");
        p.fragments = frags.iter().map(|&(t, a)| frag(t, a)).collect();
        p
    }

    fn alloc(p: &mut AccountPool, amount: Amount, t: Timestamp) -> Allocation {
        allocate_well_mixed(p, amount, t, TransferKind::TransferStandard, DEFAULT_CUTOFF, Formulation::Absent).unwrap()
    }

    fn pairs(a: &Allocation) -> Vec<(i64, Amount)> {
        a.durations.iter().map(|d| (d.tau, d.weight)).collect()
    }

    #[test]
    fn single_fragment_proportionality() {
        let mut p = pool(&[(0, 100)]);
        let a = alloc(&mut p, units(40), 3600);
        assert_eq!(pairs(&a), [(3600, units(40))]);
        assert_eq!(p.fragments[0].amount, units(60));
    }

    #[test]
    fn two_fragments_split() {
        let mut p = pool(&[(0, 30), (100, 70)]);
        let a = alloc(&mut p, units(50), 200);
        assert_eq!(pairs(&a), [(200, units(15)), (100, units(35))]);
    }

    #[test]
    fn deficit_is_inferred() {
        let mut p = pool(&[(0, 10)]);
        let a = alloc(&mut p, units(25), 50);
        assert_eq!(pairs(&a), [(50, units(10))]);
        assert_eq!(a.inferred, units(15));
        assert!(p.fragments.is_empty());
        assert_eq!(p.total(), Amount::ZERO);
    }

    #[test]
    fn largest_remainder_keeps_totals() {
        // 1.00 across three equal shares: 0.34, 0.33, 0.33
        let mut p = pool(&[(0, 1), (1, 1), (2, 1)]);
        let a = alloc(&mut p, units(1), 10);
        let w: Vec<_> = a.durations.iter().map(|d| d.weight.minor()).collect();
        assert_eq!(w, [34, 33, 33]);
        assert_eq!(p.total(), units(2));
    }

    #[test]
    fn residue_below_cutoff_becomes_untracked() {
        let mut p = pool(&[(0, 10)]);
        let a = alloc(&mut p, Amount::from_minor(995), 5);
        assert_eq!(a.durations[0].weight, Amount::from_minor(995));
        assert!(p.fragments.is_empty());
        assert_eq!(p.untracked, Amount::from_minor(5));
    }

    #[test]
    fn formulations_treat_untracked_differently() {
        let mut base = pool(&[(0, 90)]);
        base.untracked = units(10);

        let mut present = base.clone();
        let a = allocate_well_mixed(
            &mut present,
            units(50),
            1,
            TransferKind::TransferStandard,
            DEFAULT_CUTOFF,
            Formulation::Present,
        )
        .unwrap();
        assert_eq!(pairs(&a), [(1, units(45))]);
        assert_eq!(a.untracked, units(5));

        let mut absent = base.clone();
        let a = alloc(&mut absent, units(50), 1);
        assert_eq!(pairs(&a), [(1, units(50))]);
        assert_eq!(a.untracked, Amount::ZERO);

        let mut absent = base;
        let a = alloc(&mut absent, units(95), 1);
        assert_eq!(pairs(&a), [(1, units(90))]);
        assert_eq!((a.untracked, a.inferred), (units(5), Amount::ZERO));
    }

    #[test]
    fn small_deposits_never_become_fragments() {
        let mut p = AccountPool::new("A");
        p.deposit(Fragment { amount: Amount::from_minor(9), ..frag(0, 0) }, DEFAULT_CUTOFF);
        p.deposit(Fragment { amount: Amount::from_minor(10), ..frag(0, 0) }, DEFAULT_CUTOFF);
        assert_eq!(p.fragments.len(), 1);
        assert_eq!(p.untracked, Amount::from_minor(9));
    }

    #[test]
    fn allocation_errors() {
        let mut p = pool(&[(100, 10)]);
        assert!(matches!(
            allocate_well_mixed(
                &mut p,
                units(-1),
                200,
                TransferKind::TransferStandard,
                DEFAULT_CUTOFF,
                Formulation::Absent
            ),
            Err(FlowError::NegativeAmount(_))
        ));
        assert!(matches!(
            allocate_well_mixed(
                &mut p,
                units(1),
                50,
                TransferKind::TransferStandard,
                DEFAULT_CUTOFF,
                Formulation::Absent
            ),
            Err(FlowError::Ordering { .. })
        ));
    }

    #[test]
    fn category_mapping() {
        use TransferKind::*;
        assert_eq!(categorize_flow(Disbursement, TransferStandard), FlowCategory::Entering);
        assert_eq!(categorize_flow(TransferStandard, TransferAgentOut), FlowCategory::Remaining);
        assert_eq!(categorize_flow(TransferAgentOut, Reclamation), FlowCategory::Removed);
        assert_eq!(categorize_flow(Disbursement, Reclamation), FlowCategory::NeverCirculated);
        assert_eq!(categorize_flow(Other, TransferStandard), FlowCategory::Other);
        assert_eq!(categorize_flow(TransferStandard, Other), FlowCategory::Other);
    }

    fn tx(t: Timestamp, source: &str, target: &str, amount: i64, kind: TransferKind) -> Transaction {
        Transaction {
            id: format!("{t}"),
            timestamp: t,
            source: source.into(),
            target: target.into(),
            amount: units(amount),
            kind,
        }
    }

    fn ledger(txs: Vec<Transaction>, accounts: Vec<Account>) -> Ledger {
        let accounts = accounts.into_iter().map(|a| (a.id.clone(), a)).collect::<BTreeMap<_, _>>();
        Ledger::with_spanning_window(txs, accounts).unwrap()
    }

    #[test]
    fn one_hop_chain() {
        let l = ledger(
            vec![
                tx(0, "mint", "A", 100, TransferKind::Disbursement),
                tx(86_400, "A", "B", 100, TransferKind::TransferStandard),
            ],
            vec![],
        );
        let ex = extract_held_durations(&l, ExtractConfig::default()).unwrap();
        assert_eq!(ex.durations.len(), 1);
        let d = &ex.durations[0];
        assert_eq!((d.tau, d.weight, d.category), (86_400, units(100), FlowCategory::Entering));
        assert_eq!(d.account_id, "A");
    }

    #[test]
    fn pairwise_reset_at_each_hop() {
        let l = ledger(
            vec![
                tx(0, "mint", "A", 100, TransferKind::Disbursement),
                tx(10, "A", "B", 100, TransferKind::TransferStandard),
                tx(30, "B", "mint", 100, TransferKind::Reclamation),
            ],
            vec![],
        );
        let ex = extract_held_durations(&l, ExtractConfig::default()).unwrap();
        let got: Vec<_> = ex.durations.iter().map(|d| (d.account_id.as_str(), d.tau, d.weight, d.category)).collect();
        assert_eq!(got, [("A", 10, units(100), FlowCategory::Entering), ("B", 20, units(100), FlowCategory::Removed),]);
    }

    #[test]
    fn admin_accounts_emit_nothing_but_still_deposit() {
        let mut admin = Account::unknown("A");
        admin.business_type = "system".into();
        admin.area_type = AreaType::Unknown;
        let l = ledger(
            vec![
                tx(0, "mint", "A", 100, TransferKind::Disbursement),
                tx(10, "A", "B", 100, TransferKind::TransferStandard),
                tx(50, "B", "C", 60, TransferKind::TransferStandard),
            ],
            vec![admin],
        );
        let ex = extract_held_durations(&l, ExtractConfig::default()).unwrap();
        assert_eq!(ex.durations.len(), 1);
        assert_eq!(ex.durations[0].account_id, "B");
        assert_eq!((ex.durations[0].tau, ex.durations[0].weight), (40, units(60)));
        assert_eq!(ex.summary.admin_weight, units(100));
    }

    #[test]
    fn self_transfer_settles_then_redeposits() {
        let l = ledger(
            vec![
                tx(0, "mint", "A", 100, TransferKind::Disbursement),
                tx(10, "A", "A", 100, TransferKind::TransferStandard),
                tx(25, "A", "B", 100, TransferKind::TransferStandard),
            ],
            vec![],
        );
        let ex = extract_held_durations(&l, ExtractConfig::default()).unwrap();
        let taus: Vec<_> = ex.durations.iter().map(|d| d.tau).collect();
        assert_eq!(taus, [10, 15]);
        assert_eq!(ex.summary.self_transfers, 1);
    }

    #[test]
    fn durations_outside_window_are_dropped() {
        let l = ledger(
            vec![
                tx(0, "mint", "A", 100, TransferKind::Disbursement),
                tx(10, "A", "B", 50, TransferKind::TransferStandard),
                tx(20, "A", "B", 50, TransferKind::TransferStandard),
            ],
            vec![],
        )
        .with_window(crate::window::Window::new(0, 20, "w").unwrap());
        let ex = extract_held_durations(&l, ExtractConfig::default()).unwrap();
        assert_eq!(ex.durations.len(), 1);
        assert_eq!(ex.summary.out_of_window_weight, units(50));
    }

    #[test]
    fn unsorted_stream_is_fatal() {
        let mut e = Extractor::new(ExtractConfig::default());
        e.process(&tx(10, "mint", "A", 1, TransferKind::Disbursement)).unwrap();
        assert!(matches!(e.process(&tx(5, "mint", "A", 1, TransferKind::Disbursement)), Err(FlowError::Unsorted(1))));
    }

    #[test]
    fn held_durations_file_roundtrip() {
        let durations = vec![
            HeldDuration {
                end_time: 10,
                tau: 0,
                weight: Amount::from_minor(1),
                account_id: "a,b".into(),
                category: FlowCategory::NeverCirculated,
                observed_entry: true,
            },
            HeldDuration {
                end_time: 11,
                tau: 7,
                weight: units(3),
                account_id: "c".into(),
                category: FlowCategory::Other,
                observed_entry: false,
            },
        ];
        let mut buf = Vec::new();
        write_held_durations(&mut buf, &durations).unwrap();
        assert_eq!(read_held_durations(buf.as_slice()).unwrap(), durations);
    }

    #[test]
    fn held_durations_file_rejects_bad_rows() {
        let head = "end_time,tau_seconds,weight,account_id,category,observed_entry\n";
        for row in ["1,-1,1.00,a,ENTERING,true", "1,1,0,a,ENTERING,true", "1,1,1,a,FOO,true", "1,1,1,a,ENTERING,yes"] {
            assert!(read_held_durations(format!("{head}{row}\n").as_bytes()).is_err(), "{row}");
        }
        assert!(read_held_durations("a,b\n".as_bytes()).is_err());
    }
}
