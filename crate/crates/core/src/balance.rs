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

//! Hourly system balance outside administrative accounts.

use std::io::Write;

use thiserror::Error;

use crate::amount::Amount;
use crate::ledger::{Ledger, Transaction, TransferKind};
use crate::window::{Timestamp, Window, SECONDS_PER_HOUR};

#[derive(Debug, Error)]
pub enum BalanceError {
    #[error("window [{start}, {end}) has no positive length")]
    EmptyWindow { start: Timestamp, end: Timestamp },
    #[error("window [{start}, {end}) is not covered by the series [{first}, {last})")]
    NotCovered { start: Timestamp, end: Timestamp, first: Timestamp, last: Timestamp },
    #[error("csv error")]
    Csv(#[from] csv::Error),
}

/// Balance sampled at every whole hour; each sample holds until the next.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceSeries {
    pub samples: Vec<(Timestamp, Amount)>,
    pub window: Window,
    /// Samples where the balance went negative (mis-recorded data).
    pub negative_samples: usize,
}

fn floor_hour(t: Timestamp) -> Timestamp {
    t.div_euclid(SECONDS_PER_HOUR) * SECONDS_PER_HOUR
}

/// Change in circulating system balance caused by one transaction.
fn balance_delta(tx: &Transaction, ledger: &Ledger) -> i64 {
    let a = tx.amount.minor();
    let system = match tx.kind {
        TransferKind::Disbursement => a,
        TransferKind::Reclamation => -a,
        _ => 0,
    };
    let mut admin = 0;
    if tx.kind != TransferKind::Reclamation && ledger.is_admin(&tx.target) {
        admin += a;
    }
    if tx.kind != TransferKind::Disbursement && ledger.is_admin(&tx.source) {
        admin -= a;
    }
    system - admin
}

/// Disbursed minus reclaimed funds, less the running balance held by
/// administrative accounts, sampled at each whole hour from the hour
/// containing the window start through the window end. A sample at hour
/// `h` reflects every transaction with timestamp `<= h`.
pub fn build_balance_series(ledger: &Ledger) -> BalanceSeries {
    let window = ledger.window().clone();
    let txs = ledger.transactions();
    let mut samples = Vec::new();
    let mut running = 0i64;
    let mut next = 0usize;
    let mut negative_samples = 0;
    let mut h = floor_hour(window.start);
    while h <= window.end {
        while next < txs.len() && txs[next].timestamp <= h {
            running += balance_delta(&txs[next], ledger);
            next += 1;
        }
        if running < 0 {
            negative_samples += 1;
        }
        samples.push((h, Amount::from_minor(running)));
        h += SECONDS_PER_HOUR;
    }
    BalanceSeries { samples, window, negative_samples }
}

/// Integral of the hourly step function over `window`, divided by its
/// length, in currency units.
pub fn time_average_balance(series: &BalanceSeries, window: &Window) -> Result<f64, BalanceError> {
    if window.end <= window.start {
        return Err(BalanceError::EmptyWindow { start: window.start, end: window.end });
    }
    let (first, last) = match (series.samples.first(), series.samples.last()) {
        (Some(f), Some(l)) => (f.0, l.0 + SECONDS_PER_HOUR),
        _ => (0, 0),
    };
    if window.start < first || window.end > last {
        return Err(BalanceError::NotCovered { start: window.start, end: window.end, first, last });
    }
    let mut integral = 0i128;
    for &(h, balance) in &series.samples {
        let lo = h.max(window.start);
        let hi = (h + SECONDS_PER_HOUR).min(window.end);
        if hi > lo {
            integral += balance.minor() as i128 * (hi - lo) as i128;
        }
    }
    Ok(integral as f64 / window.seconds() as f64 / crate::amount::SCALE as f64)
}

/// Writes `hour,balance`; negative values are clamped to zero here only.
pub fn write_balance_csv<W: Write>(writer: W, series: &BalanceSeries) -> Result<(), BalanceError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hour", "balance"])?;
    for &(h, b) in &series.samples {
        w.write_record([h.to_string(), b.max(Amount::ZERO).to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
