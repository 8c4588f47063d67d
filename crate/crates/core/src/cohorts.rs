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

//! Grouping held durations by window, account attribute and flow category.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::balance::BalanceSeries;
use crate::density::DurationDistribution;
use crate::estimators::{estimate, total_flow, total_flow_where, EstimateError, KdeOptions, VelocityEstimate};
use crate::flowtrace::{FlowCategory, HeldDuration};
use crate::ledger::{Account, Ledger, UNKNOWN};
use crate::window::{split, TimeGrain, Window};

/// Cohort label used when no attribute is selected.
pub const ALL: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortAttribute {
    #[default]
    None,
    AreaType,
    AreaName,
    BusinessType,
}

impl CohortAttribute {
    pub fn value_of(self, account: Option<&Account>) -> String {
        let Some(a) = account else {
            return if self == CohortAttribute::None { ALL.into() } else { UNKNOWN.into() };
        };
        match self {
            CohortAttribute::None => ALL.into(),
            CohortAttribute::AreaType => a.area_type.as_str().into(),
            CohortAttribute::AreaName => a.area_name.clone(),
            CohortAttribute::BusinessType => a.business_type.clone(),
        }
    }
}

impl FromStr for CohortAttribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "" => Ok(CohortAttribute::None),
            "area_type" => Ok(CohortAttribute::AreaType),
            "area_name" => Ok(CohortAttribute::AreaName),
            "business_type" => Ok(CohortAttribute::BusinessType),
            other => Err(format!("unknown cohort attribute `{other}`")),
        }
    }
}

/// Set of flow categories kept for analysis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CategoryFilter(BTreeSet<FlowCategory>);

impl CategoryFilter {
    /// The four classified categories.
    pub fn all() -> Self {
        CategoryFilter(FlowCategory::CLASSIFIED.into_iter().collect())
    }

    /// Funds in or entering circulation: durations that end in a transfer.
    pub fn circulating() -> Self {
        CategoryFilter([FlowCategory::Entering, FlowCategory::Remaining].into_iter().collect())
    }

    pub fn contains(&self, c: FlowCategory) -> bool {
        self.0.contains(&c)
    }

    pub fn categories(&self) -> impl Iterator<Item = FlowCategory> + '_ {
        self.0.iter().copied()
    }
}

impl Default for CategoryFilter {
    fn default() -> Self {
        Self::all()
    }
}

impl FromStr for CategoryFilter {
    type Err = String;

    /// `all`, `circulating`, or a comma-separated list of categories.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(Self::all()),
            "circulating" => Ok(Self::circulating()),
            _ => s.split(',').map(str::parse).collect::<Result<_, _>>().map(CategoryFilter),
        }
    }
}

impl std::fmt::Display for CategoryFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if *self == Self::all() {
            return f.write_str("all");
        }
        if *self == Self::circulating() {
            return f.write_str("circulating");
        }
        let names: Vec<_> = self.0.iter().map(|c| c.as_str()).collect();
        f.write_str(&names.join(","))
    }
}

impl Serialize for CategoryFilter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CategoryFilter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CohortSpec {
    pub time_grain: TimeGrain,
    pub attribute: CohortAttribute,
    pub categories: CategoryFilter,
}

/// `(window, cohort)`; orders by window start, then cohort label.
pub type CellKey = (Window, String);

/// Assigns every duration passing the category filter to exactly one cell,
/// by its end time and the attribute of the holding account. Durations
/// ending outside `window` are dropped.
pub fn partition_durations(
    durations: &[HeldDuration],
    accounts: &BTreeMap<String, Account>,
    window: &Window,
    spec: &CohortSpec,
) -> BTreeMap<CellKey, DurationDistribution> {
    let windows = split(window, spec.time_grain);
    let mut cells: BTreeMap<CellKey, DurationDistribution> = BTreeMap::new();
    for d in durations {
        if !spec.categories.contains(d.category) {
            continue;
        }
        let i = windows.partition_point(|w| w.end <= d.end_time);
        let Some(w) = windows.get(i).filter(|w| w.contains(d.end_time)) else { continue };
        let cohort = spec.attribute.value_of(accounts.get(&d.account_id));
        cells.entry((w.clone(), cohort)).or_default().push(d.tau, d.weight);
    }
    cells
}

/// One estimate per cell. `F_T` counts transfers whose source account is
/// in the cell's cohort; rows without an attribute split also carry the
/// conventional estimate.
pub fn estimate_by_group(
    cells: &BTreeMap<CellKey, DurationDistribution>,
    ledger: &Ledger,
    series: &BalanceSeries,
    spec: &CohortSpec,
    opts: &KdeOptions,
) -> Result<Vec<VelocityEstimate>, EstimateError> {
    cells
        .iter()
        .map(|((window, cohort), dist)| {
            if spec.attribute == CohortAttribute::None {
                estimate(window, cohort, dist, total_flow(ledger, window), Some(series), opts)
            } else {
                let flow =
                    total_flow_where(ledger, window, |t| spec.attribute.value_of(ledger.account(&t.source)) == *cohort);
                estimate(window, cohort, dist, flow, None, opts)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::Amount;
    use crate::ledger::AreaType;

    fn dur(end_time: i64, tau: i64, account: &str, category: FlowCategory) -> HeldDuration {
        HeldDuration {
            end_time,
            tau,
            weight: Amount::from_units(1),
            account_id: account.into(),
            category,
            observed_entry: true,
        }
    }

    fn accounts() -> BTreeMap<String, Account> {
        let mut u = Account::unknown("U");
        u.area_type = AreaType::Urban;
        let mut r = Account::unknown("R");
        r.area_type = AreaType::Rural;
        [u, r].into_iter().map(|a| (a.id.clone(), a)).collect()
    }

    fn spec(attribute: CohortAttribute, categories: CategoryFilter, time_grain: TimeGrain) -> CohortSpec {
        CohortSpec { time_grain, attribute, categories }
    }

    #[test]
    fn circulating_filter_drops_removed() {
        let w = Window::new(0, 100, "full").unwrap();
        let cells = partition_durations(
            &[dur(10, 5, "U", FlowCategory::Removed)],
            &accounts(),
            &w,
            &spec(CohortAttribute::AreaType, CategoryFilter::circulating(), TimeGrain::Full),
        );
        assert!(cells.is_empty());
    }

    #[test]
    fn rural_duration_lands_in_month_cell() {
        // 2020-03-10
        let t = 1_583_798_400;
        let w = Window::new(1_580_601_600, 1_590_000_000, "full").unwrap();
        let cells = partition_durations(
            &[dur(t, 5, "R", FlowCategory::Remaining)],
            &accounts(),
            &w,
            &spec(CohortAttribute::AreaType, CategoryFilter::all(), TimeGrain::Monthly),
        );
        let keys: Vec<_> = cells.keys().map(|(w, c)| (w.label.as_str(), c.as_str())).collect();
        assert_eq!(keys, [("2020-03", "rural")]);
    }

    #[test]
    fn partition_is_exhaustive() {
        let w = Window::new(0, 30, "full").unwrap();
        let ds: Vec<_> = (0..30)
            .map(|i| {
                let acct = ["U", "R", "X"][i % 3];
                let cat = FlowCategory::CLASSIFIED[i % 4];
                dur(i as i64, 1, acct, cat)
            })
            .collect();
        let cells = partition_durations(
            &ds,
            &accounts(),
            &w,
            &spec(CohortAttribute::AreaType, CategoryFilter::circulating(), TimeGrain::Weekly),
        );
        let filtered = ds.iter().filter(|d| CategoryFilter::circulating().contains(d.category)).count();
        assert_eq!(cells.values().map(|c| c.len()).sum::<usize>(), filtered);
        assert!(cells.keys().any(|(_, c)| c == UNKNOWN));
    }

    #[test]
    fn category_filter_parsing() {
        assert_eq!("circulating".parse::<CategoryFilter>().unwrap(), CategoryFilter::circulating());
        let f: CategoryFilter = "REMOVED,never_circulated".parse().unwrap();
        assert!(f.contains(FlowCategory::NeverCirculated) && !f.contains(FlowCategory::Entering));
        assert_eq!(f.to_string(), "REMOVED,NEVER_CIRCULATED");
        assert!("bogus".parse::<CategoryFilter>().is_err());
        assert!(!CategoryFilter::all().contains(FlowCategory::Other));
    }
}
