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

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::{
    sort_transactions, Account, AreaType, ColumnMap, LedgerError, TimestampFormat, Transaction, TransferKind, UNKNOWN,
};
use crate::amount::Amount;
use crate::window::Timestamp;

/// A rejected input row: line number in the source file and the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub row: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub rows: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    /// Accepted rows whose amount carried more than two fractional digits.
    pub rounded_amounts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccountReport {
    pub rows: usize,
    pub accounts: usize,
    pub duplicates: usize,
    pub rejected: Vec<Rejection>,
}

fn open(path: &Path) -> Result<File, LedgerError> {
    File::open(path).map_err(|source| LedgerError::Io { path: path.display().to_string(), source })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader)
}

fn column_index(headers: &csv::StringRecord, field: &'static str, column: &str) -> Result<usize, LedgerError> {
    headers
        .iter()
        .position(|h| h.trim_start_matches('\u{feff}').trim() == column)
        .ok_or_else(|| LedgerError::MissingColumn { field, column: column.to_string() })
}

/// Parses a timestamp into epoch seconds. Fractional seconds are truncated.
pub fn parse_timestamp(raw: &str, format: TimestampFormat) -> Result<Timestamp, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Err("empty timestamp".into());
    }
    match format {
        TimestampFormat::Epoch => s.parse::<i64>().map_err(|_| format!("invalid epoch timestamp `{s}`")),
        TimestampFormat::Iso8601 => {
            if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
                return Ok(dt.timestamp());
            }
            for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
                if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                    return Ok(dt.and_utc().timestamp());
                }
            }
            if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
                return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
            }
            Err(format!("invalid ISO-8601 timestamp `{s}`"))
        }
    }
}

pub fn parse_transactions(path: &Path, map: &ColumnMap) -> Result<(Vec<Transaction>, ParseReport), LedgerError> {
    parse_transactions_from_reader(open(path)?, map)
}

/// Reads every row, rejecting the malformed ones, and returns the accepted
/// transactions sorted by timestamp with input order breaking ties.
pub fn parse_transactions_from_reader<R: Read>(
    reader: R,
    map: &ColumnMap,
) -> Result<(Vec<Transaction>, ParseReport), LedgerError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = &map.transactions;
    let idx = [
        column_index(&headers, "id", &cols.id)?,
        column_index(&headers, "timestamp", &cols.timestamp)?,
        column_index(&headers, "source", &cols.source)?,
        column_index(&headers, "target", &cols.target)?,
        column_index(&headers, "amount", &cols.amount)?,
        column_index(&headers, "subtype", &cols.subtype)?,
    ];

    let mut report = ParseReport::default();
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() + 1;
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                report.rows += 1;
                let line = record.position().map_or(line, |p| p.line());
                match transaction_from_record(&record, &idx, map) {
                    Ok((tx, rounded)) => {
                        report.rounded_amounts += rounded as usize;
                        out.push(tx);
                    }
                    Err(reason) => report.rejected.push(Rejection { row: line, reason }),
                }
            }
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                report.rows += 1;
                let row = e.position().map_or(line, |p| p.line());
                report.rejected.push(Rejection { row, reason: e.to_string() });
            }
        }
    }
    report.accepted = out.len();
    sort_transactions(&mut out);
    Ok((out, report))
}

fn transaction_from_record(
    record: &csv::StringRecord,
    idx: &[usize; 6],
    map: &ColumnMap,
) -> Result<(Transaction, bool), String> {
    let field = |i: usize, name: &str| record.get(idx[i]).ok_or_else(|| format!("missing field `{name}`"));
    let id = field(0, "id")?.trim().to_string();
    let timestamp = parse_timestamp(field(1, "timestamp")?, map.timestamp_format)?;
    if !map.plausible(timestamp) {
        return Err(format!("timestamp {timestamp} outside plausibility bounds"));
    }
    let source = field(2, "source")?.trim().to_string();
    let target = field(3, "target")?.trim().to_string();
    if source.is_empty() || target.is_empty() {
        return Err("empty source or target".into());
    }
    let (amount, rounded) = Amount::parse_rounding(field(4, "amount")?).map_err(|e| e.to_string())?;
    if amount.is_negative() {
        return Err(format!("negative amount {amount}"));
    }
    let kind = TransferKind::from_subtype(field(5, "subtype")?);
    if !map.boundary_accounts.is_empty() {
        if kind == TransferKind::Disbursement && !map.boundary_accounts.contains(&source) {
            return Err(format!("disbursement source `{source}` is not a boundary account"));
        }
        if kind == TransferKind::Reclamation && !map.boundary_accounts.contains(&target) {
            return Err(format!("reclamation target `{target}` is not a boundary account"));
        }
    }
    Ok((Transaction { id, timestamp, source, target, amount, kind }, rounded))
}

pub fn parse_accounts(path: &Path, map: &ColumnMap) -> Result<(BTreeMap<String, Account>, AccountReport), LedgerError> {
    parse_accounts_from_reader(open(path)?, map)
}

fn attribute(raw: Option<&str>) -> String {
    match raw.map(str::trim) {
        Some(s) if !s.is_empty() => s.to_string(),
        _ => UNKNOWN.to_string(),
    }
}

/// One account per id; a repeated id replaces the earlier record and is
/// counted as a duplicate.
pub fn parse_accounts_from_reader<R: Read>(
    reader: R,
    map: &ColumnMap,
) -> Result<(BTreeMap<String, Account>, AccountReport), LedgerError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = &map.accounts;
    let id_ix = column_index(&headers, "id", &cols.id)?;
    let bt_ix = column_index(&headers, "business_type", &cols.business_type)?;
    let an_ix = column_index(&headers, "area_name", &cols.area_name)?;
    let at_ix = column_index(&headers, "area_type", &cols.area_type)?;
    let hr_ix = column_index(&headers, "held_roles", &cols.held_roles)?;

    let mut report = AccountReport::default();
    let mut accounts = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() + 1;
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                report.rows += 1;
                let id = record.get(id_ix).map(str::trim).unwrap_or_default();
                if id.is_empty() {
                    let row = record.position().map_or(line, |p| p.line());
                    report.rejected.push(Rejection { row, reason: "empty account id".into() });
                    continue;
                }
                let held_roles = record
                    .get(hr_ix)
                    .unwrap_or_default()
                    .split([';', '|', ','])
                    .map(|r| r.trim().to_ascii_uppercase())
                    .filter(|r| !r.is_empty())
                    .collect();
                let account = Account {
                    id: id.to_string(),
                    business_type: attribute(record.get(bt_ix)),
                    area_name: attribute(record.get(an_ix)),
                    area_type: AreaType::parse(record.get(at_ix).unwrap_or_default()),
                    held_roles,
                };
                if accounts.insert(account.id.clone(), account).is_some() {
                    report.duplicates += 1;
                }
            }
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                report.rows += 1;
                let row = e.position().map_or(line, |p| p.line());
                report.rejected.push(Rejection { row, reason: e.to_string() });
            }
        }
    }
    report.accounts = accounts.len();
    Ok((accounts, report))
}

/// Writes transactions in the normalized schema read by
/// [`ColumnMap::normalized`].
pub fn write_transactions_csv<W: Write>(writer: W, transactions: &[Transaction]) -> Result<(), LedgerError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "timestamp", "source", "target", "amount", "subtype"])?;
    for tx in transactions {
        w.write_record([
            tx.id.as_str(),
            &tx.timestamp.to_string(),
            &tx.source,
            &tx.target,
            &tx.amount.to_string(),
            tx.kind.as_subtype(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_accounts_csv<'a, W: Write>(
    writer: W,
    accounts: impl IntoIterator<Item = &'a Account>,
) -> Result<(), LedgerError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "business_type", "area_name", "area_type", "held_roles"])?;
    for a in accounts {
        let roles = a.held_roles.iter().cloned().collect::<Vec<_>>().join(";");
        w.write_record([a.id.as_str(), &a.business_type, &a.area_name, a.area_type.as_str(), &roles])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_rejections_csv<W: Write>(writer: W, rejected: &[Rejection]) -> Result<(), LedgerError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "reason"])?;
    for r in rejected {
        w.write_record([r.row.to_string().as_str(), &r.reason])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
