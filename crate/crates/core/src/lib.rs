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

//! Transfer velocity of money from transaction-level ledgers.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`ledger`] reads transactions and accounts and fixes the analysis
//!    window and the set of administrative accounts.
//! 2. [`flowtrace`] walks the ledger once, allocating every outgoing
//!    transaction across the account's earlier inflows (well-mixed rule)
//!    and emitting amount-weighted held durations.
//! 3. [`balance`] builds the hourly circulating balance; [`density`] fits a
//!    log-space kernel density to the held durations.
//! 4. [`estimators`] and [`cohorts`] turn these into conventional and
//!    distributional velocity estimates per window and account group.
//!
//! [`synthgen`] produces ledgers with known ground truth for validation.

pub mod amount;
pub mod balance;
pub mod cohorts;
pub mod density;
pub mod estimators;
pub mod flowtrace;
pub mod ledger;
pub mod quadrature;
pub mod synthgen;
pub mod window;

pub use amount::Amount;
pub use ledger::{Account, AreaType, Ledger, Transaction, TransferKind};
pub use window::{Timestamp, Window};
