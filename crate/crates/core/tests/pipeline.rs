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

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use velocity_core::balance::build_balance_series;
use velocity_core::cohorts::{estimate_by_group, partition_durations, CategoryFilter, CohortAttribute, CohortSpec};
use velocity_core::estimators::{estimate, total_flow, KdeOptions, VelocityEstimate};
use velocity_core::flowtrace::{extract_held_durations, ExtractConfig, Formulation};
use velocity_core::ledger::{
    parse_accounts_from_reader, parse_transactions_from_reader, write_accounts_csv, write_transactions_csv, ColumnMap,
};
use velocity_core::synthgen::{generate, SynthSpec};
use velocity_core::window::{TimeGrain, SECONDS_PER_HOUR};
use velocity_core::{Amount, Ledger};

fn circulating_full() -> CohortSpec {
    CohortSpec {
        time_grain: TimeGrain::Full,
        attribute: CohortAttribute::None,
        categories: CategoryFilter::circulating(),
    }
}

fn run(ledger: &Ledger, config: ExtractConfig, spec: &CohortSpec) -> Vec<VelocityEstimate> {
    let durations = extract_held_durations(ledger, config).unwrap().durations;
    let cells = partition_durations(&durations, ledger.accounts(), ledger.window(), spec);
    let series = build_balance_series(ledger);
    estimate_by_group(&cells, ledger, &series, spec, &KdeOptions::default()).unwrap()
}

fn synthetic(seed: u64) -> Ledger {
    generate(&SynthSpec::exponential(200, 1.0, 20.0, seed)).unwrap().ledger
}

#[test]
fn formulations_agree_on_synthetic_ledgers() {
    for seed in 0..5 {
        let ledger = synthetic(seed);
        let spec = circulating_full();
        let absent = run(&ledger, ExtractConfig { formulation: Formulation::Absent, ..Default::default() }, &spec);
        let present = run(&ledger, ExtractConfig { formulation: Formulation::Present, ..Default::default() }, &spec);
        let (a, p) = (absent[0].v_t.unwrap(), present[0].v_t.unwrap());
        assert!((a - p).abs() / a < 0.01, "seed {seed}: {a} vs {p}");
    }
}

#[test]
fn cutoff_barely_moves_emitted_weight() {
    for seed in 0..5 {
        let ledger = synthetic(seed);
        let flow = total_flow(&ledger, ledger.window()).to_f64();
        let emitted = |cents| {
            let config = ExtractConfig { cutoff: Amount::from_minor(cents), ..Default::default() };
            extract_held_durations(&ledger, config).unwrap().summary.emitted_weight.to_f64()
        };
        let shift = (emitted(10) - emitted(1)).abs();
        assert!(shift < 0.002 * flow, "seed {seed}: shift {shift} of flow {flow}");
    }
}

#[test]
fn balance_samples_ignore_order_within_an_hour() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..50 {
        let ledger = common::random_ledger(seed, 50);
        let (mut txs, accounts, window) = ledger.clone().into_parts();
        for tx in &mut txs {
            let hour_end = tx.timestamp.div_euclid(SECONDS_PER_HOUR) * SECONDS_PER_HOUR;
            // Samples at hour h include t <= h, so buckets are (h - 1h, h].
            let bucket_end = if hour_end == tx.timestamp { hour_end } else { hour_end + SECONDS_PER_HOUR };
            tx.timestamp = (bucket_end - rng.random_range(0..SECONDS_PER_HOUR)).clamp(window.start, window.end - 1);
        }
        txs.sort_by_key(|t| t.timestamp);
        let moved = Ledger::new(txs, accounts, window).unwrap();
        assert_eq!(build_balance_series(&ledger).samples, build_balance_series(&moved).samples, "seed {seed}");
    }
}

#[test]
fn full_window_cell_matches_direct_estimate() {
    let ledger = synthetic(3);
    let spec = CohortSpec { categories: CategoryFilter::all(), ..circulating_full() };
    let grouped = run(&ledger, ExtractConfig::default(), &spec);
    let durations = extract_held_durations(&ledger, ExtractConfig::default()).unwrap().durations;
    let mut dist = velocity_core::density::DurationDistribution::new();
    for d in durations.iter().filter(|d| spec.categories.contains(d.category)) {
        dist.push(d.tau, d.weight);
    }
    let series = build_balance_series(&ledger);
    let flow = total_flow(&ledger, ledger.window());
    let direct = estimate(ledger.window(), "all", &dist, flow, Some(&series), &KdeOptions::default()).unwrap();
    assert_eq!(grouped, vec![direct]);
}

#[test]
fn weekly_cells_partition_the_full_window() {
    let ledger = synthetic(4);
    let durations = extract_held_durations(&ledger, ExtractConfig::default()).unwrap().durations;
    let full = partition_durations(&durations, ledger.accounts(), ledger.window(), &circulating_full());
    let weekly_spec = CohortSpec { time_grain: TimeGrain::Weekly, ..circulating_full() };
    let weekly = partition_durations(&durations, ledger.accounts(), ledger.window(), &weekly_spec);
    assert_eq!(weekly.len(), 20);
    let sum = |cells: &BTreeMap<_, velocity_core::density::DurationDistribution>| {
        cells.values().map(|c| c.weighted_sums()).fold((0i128, 0i128), |a, b| (a.0 + b.0, a.1 + b.1))
    };
    assert_eq!(sum(&full), sum(&weekly));
}

#[test]
fn shuffled_csv_rows_give_identical_estimates() {
    let ledger = synthetic(5);
    let mut rows = Vec::new();
    write_transactions_csv(&mut rows, ledger.transactions()).unwrap();
    let text = String::from_utf8(rows).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    // Shuffle whole same-timestamp groups only; ties keep their file order.
    let mut groups: BTreeMap<i64, Vec<&str>> = BTreeMap::new();
    for (line, tx) in lines.iter().zip(ledger.transactions()) {
        groups.entry(tx.timestamp).or_default().push(line);
    }
    let mut groups: Vec<Vec<&str>> = groups.into_values().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let shuffled = std::iter::once(header).chain(groups.into_iter().flatten()).collect::<Vec<_>>().join("\n");
    let (txs, report) = parse_transactions_from_reader(shuffled.as_bytes(), &ColumnMap::normalized()).unwrap();
    assert!(report.rejected.is_empty());
    let reparsed = Ledger::new(txs, ledger.accounts().clone(), ledger.window().clone()).unwrap();
    let spec = circulating_full();
    assert_eq!(run(&ledger, ExtractConfig::default(), &spec), run(&reparsed, ExtractConfig::default(), &spec));
}

#[test]
fn accounts_round_trip_through_csv() {
    let ledger = generate(&SynthSpec {
        duration_model: velocity_core::synthgen::DurationModel::TwoGroup {
            urban_rate_per_week: 2.0,
            rural_rate_per_week: 0.5,
        },
        ..SynthSpec::exponential(12, 1.0, 4.0, 9)
    })
    .unwrap()
    .ledger;
    let mut out = Vec::new();
    write_accounts_csv(&mut out, ledger.accounts().values()).unwrap();
    let (accounts, report) = parse_accounts_from_reader(out.as_slice(), &ColumnMap::normalized()).unwrap();
    assert_eq!(report.duplicates, 0);
    assert_eq!(&accounts, ledger.accounts());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transactions_round_trip_through_csv(seed in any::<u64>()) {
        let txs = common::random_transactions(seed, 50);
        let mut out = Vec::new();
        write_transactions_csv(&mut out, &txs).unwrap();
        let (parsed, report) = parse_transactions_from_reader(out.as_slice(), &ColumnMap::normalized()).unwrap();
        prop_assert!(report.rejected.is_empty());
        prop_assert_eq!(report.rounded_amounts, 0);
        prop_assert_eq!(parsed, txs);
    }

    #[test]
    fn extraction_is_deterministic(seed in any::<u64>()) {
        let ledger = common::random_ledger(seed, 50);
        let a = extract_held_durations(&ledger, ExtractConfig::default()).unwrap();
        let b = extract_held_durations(&ledger, ExtractConfig::default()).unwrap();
        prop_assert_eq!(a.durations, b.durations);
        prop_assert_eq!(a.summary, b.summary);
    }
}
