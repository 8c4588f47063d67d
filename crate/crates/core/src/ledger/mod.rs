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

//! Transaction and account records, the analysis window, and the set of
//! administrative accounts whose activity is excluded from estimation.

mod columns;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::window::{Timestamp, Window, WindowError};

pub use columns::{AccountColumns, ColumnMap, TimestampFormat, TransactionColumns};
pub use parse::{
    parse_accounts, parse_accounts_from_reader, parse_timestamp, parse_transactions, parse_transactions_from_reader,
    write_accounts_csv, write_rejections_csv, write_transactions_csv, AccountReport, ParseReport, Rejection,
};

pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error")]
    Csv(#[from] csv::Error),
    #[error("column `{column}` mapped for `{field}` is missing from the header")]
    MissingColumn { field: &'static str, column: String },
    #[error("invalid column map: {0}")]
    Config(String),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("transactions are not sorted by timestamp at position {0}")]
    Unsorted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransferKind {
    Disbursement,
    Reclamation,
    TransferStandard,
    TransferAgentOut,
    Other,
}

impl TransferKind {
    /// Maps a raw subtype string. Unrecognized subtypes become `Other`.
    pub fn from_subtype(raw: &str) -> Self {
        let s = raw.trim();
        let eq = |name: &str| s.eq_ignore_ascii_case(name);
        if eq("DISBURSEMENT") {
            TransferKind::Disbursement
        } else if eq("RECLAMATION") {
            TransferKind::Reclamation
        } else if eq("STANDARD") || eq("TRANSFER_STANDARD") {
            TransferKind::TransferStandard
        } else if eq("AGENT_OUT") || eq("TRANSFER_AGENT_OUT") {
            TransferKind::TransferAgentOut
        } else {
            TransferKind::Other
        }
    }

    /// Subtype string written to normalized dumps; parses back to `self`.
    pub fn as_subtype(self) -> &'static str {
        match self {
            TransferKind::Disbursement => "DISBURSEMENT",
            TransferKind::Reclamation => "RECLAMATION",
            TransferKind::TransferStandard => "STANDARD",
            TransferKind::TransferAgentOut => "AGENT_OUT",
            TransferKind::Other => "OTHER",
        }
    }

    /// STANDARD and AGENT_OUT; the only kinds counted as transfer flow.
    pub fn is_transfer(self) -> bool {
        matches!(self, TransferKind::TransferStandard | TransferKind::TransferAgentOut)
    }
}

impl fmt::Display for TransferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_subtype())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub id: String,
    pub timestamp: Timestamp,
    pub source: String,
    pub target: String,
    pub amount: Amount,
    pub kind: TransferKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaType {
    Urban,
    Periurban,
    Rural,
    Unknown,
}

impl AreaType {
    pub fn parse(raw: &str) -> Self {
        let s: String =
            raw.trim().chars().filter(|c| !matches!(c, '-' | ' ' | '_')).collect::<String>().to_ascii_lowercase();
        match s.as_str() {
            "urban" => AreaType::Urban,
            "periurban" => AreaType::Periurban,
            "rural" => AreaType::Rural,
            _ => AreaType::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AreaType::Urban => "urban",
            AreaType::Periurban => "periurban",
            AreaType::Rural => "rural",
            AreaType::Unknown => UNKNOWN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    pub id: String,
    pub business_type: String,
    pub area_name: String,
    pub area_type: AreaType,
    pub held_roles: BTreeSet<String>,
}

impl Account {
    /// An account with every attribute unknown.
    pub fn unknown(id: impl Into<String>) -> Self {
        Account {
            id: id.into(),
            business_type: UNKNOWN.to_string(),
            area_name: UNKNOWN.to_string(),
            area_type: AreaType::Unknown,
            held_roles: BTreeSet::new(),
        }
    }

    pub fn is_admin(&self) -> bool {
        self.business_type.eq_ignore_ascii_case("system")
            || self.held_roles.iter().any(|r| r.eq_ignore_ascii_case("VENDOR"))
    }
}

/// Ids of accounts used for currency management: business type `system`
/// or holding the `VENDOR` role.
pub fn select_admin_accounts(accounts: &BTreeMap<String, Account>) -> BTreeSet<String> {
    accounts.values().filter(|a| a.is_admin()).map(|a| a.id.clone()).collect()
}

/// A time-sorted ledger with its account table and analysis window.
#[derive(Debug, Clone)]
pub struct Ledger {
    transactions: Vec<Transaction>,
    accounts: BTreeMap<String, Account>,
    window: Window,
    admin_ids: BTreeSet<String>,
}

impl Ledger {
    /// Fails if `transactions` is not sorted by timestamp.
    pub fn new(
        transactions: Vec<Transaction>,
        accounts: BTreeMap<String, Account>,
        window: Window,
    ) -> Result<Self, LedgerError> {
        if let Some(i) = transactions.windows(2).position(|p| p[0].timestamp > p[1].timestamp) {
            return Err(LedgerError::Unsorted(i + 1));
        }
        let admin_ids = select_admin_accounts(&accounts);
        Ok(Ledger { transactions, accounts, window, admin_ids })
    }

    /// Window spanning every transaction, `[first, last + 1)`.
    pub fn with_spanning_window(
        transactions: Vec<Transaction>,
        accounts: BTreeMap<String, Account>,
    ) -> Result<Self, LedgerError> {
        let start = transactions.iter().map(|t| t.timestamp).min().unwrap_or(0);
        let end = transactions.iter().map(|t| t.timestamp).max().map_or(1, |t| t + 1);
        Ledger::new(transactions, accounts, Window::new(start, end, "full")?)
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn accounts(&self) -> &BTreeMap<String, Account> {
        &self.accounts
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn admin_ids(&self) -> &BTreeSet<String> {
        &self.admin_ids
    }

    pub fn is_admin(&self, id: &str) -> bool {
        self.admin_ids.contains(id)
    }

    pub fn account(&self, id: &str) -> Option<&Account> {
        self.accounts.get(id)
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn into_parts(self) -> (Vec<Transaction>, BTreeMap<String, Account>, Window) {
        (self.transactions, self.accounts, self.window)
    }
}

/// Stable sort by timestamp; equal timestamps keep input order.
pub fn sort_transactions(transactions: &mut [Transaction]) {
    transactions.sort_by_key(|t| t.timestamp);
}
