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

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LedgerError;
use crate::window::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampFormat {
    /// Integer seconds since the Unix epoch.
    #[default]
    Epoch,
    /// RFC 3339, or `YYYY-MM-DD[ T]HH:MM:SS[.f]` read as UTC.
    Iso8601,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransactionColumns {
    pub id: String,
    pub timestamp: String,
    pub source: String,
    pub target: String,
    pub amount: String,
    pub subtype: String,
}

impl Default for TransactionColumns {
    fn default() -> Self {
        TransactionColumns {
            id: "id".into(),
            timestamp: "timestamp".into(),
            source: "source".into(),
            target: "target".into(),
            amount: "amount".into(),
            subtype: "subtype".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccountColumns {
    pub id: String,
    pub business_type: String,
    pub area_name: String,
    pub area_type: String,
    pub held_roles: String,
}

impl Default for AccountColumns {
    fn default() -> Self {
        AccountColumns {
            id: "id".into(),
            business_type: "business_type".into(),
            area_name: "area_name".into(),
            area_type: "area_type".into(),
            held_roles: "held_roles".into(),
        }
    }
}

/// Maps input CSV headers onto ledger fields. The defaults match the
/// normalized dumps written by this crate.
///
/// ```toml
/// timestamp_format = "iso8601"
/// boundary_accounts = ["0xBB"]
///
/// [transactions]
/// id = "id"
/// timestamp = "timeset"
/// source = "source"
/// target = "target"
/// amount = "weight"
/// subtype = "transfer_subtype"
///
/// [accounts]
/// id = "xDAI_blockchain_address"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub timestamp_format: TimestampFormat,
    /// Accounts outside the system. When non-empty, disbursements must
    /// originate here and reclamations must terminate here.
    pub boundary_accounts: BTreeSet<String>,
    pub min_timestamp: Option<Timestamp>,
    pub max_timestamp: Option<Timestamp>,
    pub transactions: TransactionColumns,
    pub accounts: AccountColumns,
}

impl ColumnMap {
    pub fn normalized() -> Self {
        ColumnMap::default()
    }

    pub fn from_toml_str(s: &str) -> Result<Self, LedgerError> {
        let map: ColumnMap = toml::from_str(s).map_err(|e| LedgerError::Config(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, LedgerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LedgerError::Io { path: path.display().to_string(), source })?;
        ColumnMap::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("column map serializes")
    }

    fn validate(&self) -> Result<(), LedgerError> {
        if let (Some(lo), Some(hi)) = (self.min_timestamp, self.max_timestamp) {
            if lo > hi {
                return Err(LedgerError::Config(format!("min_timestamp {lo} exceeds max_timestamp {hi}")));
            }
        }
        Ok(())
    }

    pub(crate) fn plausible(&self, t: Timestamp) -> bool {
        self.min_timestamp.is_none_or(|lo| t >= lo) && self.max_timestamp.is_none_or(|hi| t <= hi)
    }
}
