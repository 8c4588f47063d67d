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

//! Shared helpers for integration tests: random small ledgers and an
//! independent re-implementation of well-mixed allocation.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use velocity_core::{Amount, Ledger, Transaction, TransferKind};

pub const MINT: &str = "mint";

/// Up to `max_tx` transactions among 2–6 accounts with ties, self
/// transfers, sub-cutoff amounts, unclassified kinds and overdrafts.
pub fn random_transactions(seed: u64, max_tx: usize) -> Vec<Transaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_accounts = rng.random_range(2..=6);
    let ids: Vec<String> = (0..n_accounts).map(|i| format!("u{i}")).collect();
    let n_tx = rng.random_range(1..=max_tx);
    let mut balance: HashMap<&str, i64> = HashMap::new();
    let mut t = 0i64;
    let mut out = Vec::with_capacity(n_tx);
    for k in 0..n_tx {
        t += match rng.random_range(0..4) {
            0 => 0,
            1 => rng.random_range(1..60),
            2 => rng.random_range(60..86_400),
            _ => rng.random_range(86_400..864_000),
        };
        let a = &ids[rng.random_range(0..n_accounts)];
        let b = if rng.random_bool(0.1) { a } else { &ids[rng.random_range(0..n_accounts)] };
        let roll = rng.random_range(0..100);
        let kind = match roll {
            0..25 => TransferKind::Disbursement,
            25..35 => TransferKind::Reclamation,
            35..80 => TransferKind::TransferStandard,
            80..95 => TransferKind::TransferAgentOut,
            _ => TransferKind::Other,
        };
        let (source, target) = match kind {
            TransferKind::Disbursement => (MINT, b.as_str()),
            TransferKind::Reclamation => (a.as_str(), MINT),
            _ => (a.as_str(), b.as_str()),
        };
        let held = balance.get(source).copied().unwrap_or(0);
        let cents = if kind != TransferKind::Disbursement && held > 0 && rng.random_bool(0.7) {
            rng.random_range(1..=held)
        } else if rng.random_bool(0.2) {
            rng.random_range(0..30)
        } else {
            rng.random_range(1..200_000)
        };
        if kind != TransferKind::Disbursement {
            *balance.entry(source).or_default() -= cents;
        }
        if kind != TransferKind::Reclamation {
            *balance.entry(target).or_default() += cents;
        }
        out.push(Transaction {
            id: format!("r{k}"),
            timestamp: t,
            source: source.to_string(),
            target: target.to_string(),
            amount: Amount::from_minor(cents),
            kind,
        });
    }
    out
}

pub fn random_ledger(seed: u64, max_tx: usize) -> Ledger {
    Ledger::with_spanning_window(random_transactions(seed, max_tx), BTreeMap::new()).unwrap()
}

#[derive(Clone)]
struct Piece {
    entry: i64,
    cents: i64,
}

#[derive(Clone, Default)]
struct Holdings {
    pieces: Vec<Piece>,
    loose: i64,
}

/// Proportional integer split by largest remainder, computed with exact
/// rationals. Ties go to the lower index.
fn split_exact(total: i64, parts: &[i64]) -> Vec<i64> {
    let denom: i64 = parts.iter().sum();
    let exact: Vec<BigRational> =
        parts.iter().map(|&p| BigRational::new(BigInt::from(total) * BigInt::from(p), BigInt::from(denom))).collect();
    let mut out: Vec<i64> = exact.iter().map(|q| q.floor().to_integer().to_i64().unwrap()).collect();
    let leftover = total - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = &exact[i] - exact[i].floor();
        let fj = &exact[j] - exact[j].floor();
        fj.cmp(&fi)
    });
    for &i in order.iter().take(leftover as usize) {
        out[i] += 1;
    }
    out
}

/// For every transaction, the `(tau, weight_cents)` pairs the well-mixed
/// rule must emit at its source account.
pub fn oracle_pairs(txs: &[Transaction], cutoff_cents: i64, present: bool) -> Vec<Vec<(i64, i64)>> {
    let mut books: HashMap<String, Holdings> = HashMap::new();
    let mut all = Vec::with_capacity(txs.len());
    for tx in txs {
        let mut pairs = Vec::new();
        if tx.kind != TransferKind::Disbursement {
            let h = books.entry(tx.source.clone()).or_default();
            let want = tx.amount.minor();
            let tracked: i64 = h.pieces.iter().map(|p| p.cents).sum();
            let mut take: Vec<i64>;
            let loose_take;
            if present {
                let whole = tracked + h.loose;
                if want >= whole {
                    take = h.pieces.iter().map(|p| p.cents).collect();
                    loose_take = h.loose;
                } else {
                    let mut parts: Vec<i64> = h.pieces.iter().map(|p| p.cents).collect();
                    parts.push(h.loose);
                    take = split_exact(want, &parts);
                    loose_take = take.pop().unwrap();
                }
            } else if want >= tracked {
                take = h.pieces.iter().map(|p| p.cents).collect();
                loose_take = (want - tracked).min(h.loose);
            } else {
                take = split_exact(want, &h.pieces.iter().map(|p| p.cents).collect::<Vec<_>>());
                loose_take = 0;
            }
            h.loose -= loose_take;
            let mut kept = Vec::new();
            for (p, a) in h.pieces.iter().zip(take) {
                if a > 0 {
                    pairs.push((tx.timestamp - p.entry, a));
                }
                let rest = p.cents - a;
                if rest > 0 && rest >= cutoff_cents {
                    kept.push(Piece { entry: p.entry, cents: rest });
                } else {
                    h.loose += rest;
                }
            }
            h.pieces = kept;
        }
        if tx.kind != TransferKind::Reclamation {
            let h = books.entry(tx.target.clone()).or_default();
            let c = tx.amount.minor();
            if c < cutoff_cents {
                h.loose += c;
            } else if c > 0 {
                h.pieces.push(Piece { entry: tx.timestamp, cents: c });
            }
        }
        all.push(pairs);
    }
    all
}
