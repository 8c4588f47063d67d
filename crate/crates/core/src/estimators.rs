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

//! Conventional and distributional velocity estimates.
//!
//! For a window of length `T` with transfer flow `F_T`:
//!
//! - conventional: `V = F_T / (M_avg · T)`, with `M_avg` the time-averaged
//!   circulating balance;
//! - distributional: `V_T = 1 / τ̄_T` from the fitted held-duration density,
//!   and the circulating balance `M_T = F_T · τ̄_T / T`, so that
//!   `F_T = M_T · T · V_T` holds by construction.
//!
//! Rates are reported per week; durations are in seconds.

use std::io::Write;

use thiserror::Error;

use crate::amount::Amount;
use crate::balance::{time_average_balance, BalanceError, BalanceSeries};
use crate::density::{
    fit_with, mean_holding_time, Bandwidth, DurationDistribution, KdeError, DEFAULT_QUAD_TOL, DEFAULT_TAU_FLOOR,
};
use crate::ledger::{Ledger, Transaction};
use crate::window::{Window, SECONDS_PER_WEEK};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("window {window}: transfer flow {flow} with zero average balance")]
    InconsistentBalance { window: String, flow: Amount },
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Kde(#[from] KdeError),
    #[error("csv error")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeOptions {
    pub tau_floor: f64,
    pub quad_tol: f64,
    pub bandwidth: Bandwidth,
}

impl Default for KdeOptions {
    fn default() -> Self {
        KdeOptions { tau_floor: DEFAULT_TAU_FLOOR, quad_tol: DEFAULT_QUAD_TOL, bandwidth: Bandwidth::Scott }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEstimate {
    pub window: Window,
    pub cohort: String,
    /// Total transfer flow `F_T`.
    pub flow: Amount,
    pub m_avg: Option<f64>,
    pub v_conv: Option<f64>,
    /// Mean held duration `τ̄_T`, seconds.
    pub tau_bar: Option<f64>,
    pub v_t: Option<f64>,
    /// Circulating balance `M_T`.
    pub m_t: Option<f64>,
    pub n: usize,
    pub total_weight: Amount,
    pub flag: Option<String>,
}

impl VelocityEstimate {
    /// `1 − M_T / M_avg`, the share of balance not circulating.
    pub fn static_share(&self) -> Option<f64> {
        match (self.m_t, self.m_avg) {
            (Some(mt), Some(m)) if m > 0.0 => Some(1.0 - mt / m),
            _ => None,
        }
    }
}

/// Transfers (STANDARD and AGENT_OUT) in `[T0, T1)` that neither start nor
/// end at an administrative account and satisfy `include`.
pub fn total_flow_where(ledger: &Ledger, window: &Window, include: impl Fn(&Transaction) -> bool) -> Amount {
    let txs = ledger.transactions();
    let lo = txs.partition_point(|t| t.timestamp < window.start);
    let hi = txs.partition_point(|t| t.timestamp < window.end);
    txs[lo..hi]
        .iter()
        .filter(|t| t.kind.is_transfer())
        .filter(|t| !ledger.is_admin(&t.source) && !ledger.is_admin(&t.target))
        .filter(|t| include(t))
        .map(|t| t.amount)
        .sum()
}

pub fn total_flow(ledger: &Ledger, window: &Window) -> Amount {
    total_flow_where(ledger, window, |_| true)
}

/// `F_T / (M_avg · T)` per week. `None` when both flow and balance are zero.
pub fn conventional_velocity(flow: Amount, m_avg: f64, window: &Window) -> Result<Option<f64>, EstimateError> {
    if m_avg > 0.0 {
        Ok(Some(flow.to_f64() / (m_avg * window.weeks())))
    } else if flow.is_zero() {
        Ok(None)
    } else {
        Err(EstimateError::InconsistentBalance { window: window.label.clone(), flow })
    }
}

pub fn conventional_estimate(
    flow: Amount,
    series: &BalanceSeries,
    window: &Window,
) -> Result<Option<f64>, EstimateError> {
    let m_avg = time_average_balance(series, window)?;
    conventional_velocity(flow, m_avg, window)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distributional {
    pub tau_bar: f64,
    pub v_t: f64,
    pub m_t: f64,
    pub bandwidth: f64,
}

/// `τ̄_T`, `V_T` (per week) and `M_T` for durations ending in `window`.
/// `None` for an empty distribution.
pub fn distributional_estimate(
    durations: &DurationDistribution,
    window: &Window,
    flow: Amount,
    opts: &KdeOptions,
) -> Result<Option<Distributional>, EstimateError> {
    if durations.is_empty() {
        return Ok(None);
    }
    let model = fit_with(durations, opts.tau_floor, opts.bandwidth)?;
    let tau_bar = mean_holding_time(&model, opts.quad_tol)?;
    Ok(Some(Distributional {
        tau_bar,
        v_t: SECONDS_PER_WEEK as f64 / tau_bar,
        m_t: flow.to_f64() * tau_bar / window.seconds() as f64,
        bandwidth: model.bandwidth(),
    }))
}

/// Builds one estimate row. `series` is given only for system-level rows,
/// which then also carry `M_avg` and `V_conv`.
pub fn estimate(
    window: &Window,
    cohort: &str,
    durations: &DurationDistribution,
    flow: Amount,
    series: Option<&BalanceSeries>,
    opts: &KdeOptions,
) -> Result<VelocityEstimate, EstimateError> {
    let mut est = VelocityEstimate {
        window: window.clone(),
        cohort: cohort.to_string(),
        flow,
        m_avg: None,
        v_conv: None,
        tau_bar: None,
        v_t: None,
        m_t: None,
        n: durations.len(),
        total_weight: durations.total_weight(),
        flag: None,
    };
    if let Some(series) = series {
        let m_avg = time_average_balance(series, window)?;
        est.m_avg = Some(m_avg);
        est.v_conv = conventional_velocity(flow, m_avg, window)?;
    }
    match distributional_estimate(durations, window, flow, opts) {
        Ok(Some(d)) => {
            est.tau_bar = Some(d.tau_bar);
            est.v_t = Some(d.v_t);
            est.m_t = Some(d.m_t);
        }
        Ok(None) => est.flag = Some("empty".into()),
        Err(EstimateError::Kde(KdeError::Degenerate { .. })) => est.flag = Some("degenerate".into()),
        Err(e) => return Err(e),
    }
    Ok(est)
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.digits$}"))
}

pub fn write_estimates_csv<W: Write>(writer: W, estimates: &[VelocityEstimate]) -> Result<(), EstimateError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "window_label",
        "cohort",
        "F_T",
        "M_avg",
        "V_conv",
        "tau_bar_seconds",
        "V_T_per_week",
        "M_T",
        "n",
        "total_weight",
        "flag",
    ])?;
    for e in estimates {
        w.write_record([
            e.window.label.clone(),
            e.cohort.clone(),
            e.flow.to_string(),
            opt(e.m_avg, 4),
            opt(e.v_conv, 6),
            opt(e.tau_bar, 3),
            opt(e.v_t, 6),
            opt(e.m_t, 4),
            e.n.to_string(),
            e.total_weight.to_string(),
            e.flag.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::build_balance_series;
    use crate::ledger::TransferKind;
    use crate::window::{SECONDS_PER_DAY, SECONDS_PER_HOUR};
    use std::collections::BTreeMap;

    const WEEK: i64 = SECONDS_PER_WEEK;

    fn tx(t: i64, source: &str, target: &str, units: i64, kind: TransferKind) -> Transaction {
        Transaction {
            id: String::new(),
            timestamp: t,
            source: source.into(),
            target: target.into(),
            amount: Amount::from_units(units),
            kind,
        }
    }

    fn ledger(txs: Vec<Transaction>, end: i64) -> Ledger {
        Ledger::new(txs, BTreeMap::new(), Window::new(0, end, "w").unwrap()).unwrap()
    }

    fn narrow() -> KdeOptions {
        KdeOptions { bandwidth: Bandwidth::Fixed(1e-4), ..Default::default() }
    }

    #[test]
    fn flow_counts_transfers_only() {
        let l = ledger(
            vec![
                tx(0, "m", "A", 1000, TransferKind::Disbursement),
                tx(10, "A", "B", 50, TransferKind::TransferStandard),
                tx(20, "B", "C", 70, TransferKind::TransferAgentOut),
                tx(30, "C", "D", 5, TransferKind::Other),
                tx(100, "A", "B", 9, TransferKind::TransferStandard),
            ],
            200,
        );
        let w = Window::new(0, 100, "w").unwrap();
        assert_eq!(total_flow(&l, &w), Amount::from_units(120));
    }

    #[test]
    fn conventional_examples() {
        let w = Window::new(0, WEEK, "w").unwrap();
        let v = conventional_velocity(Amount::from_units(310), 1000.0, &w).unwrap().unwrap();
        assert!((v - 0.31).abs() < 1e-12);
        assert_eq!(conventional_velocity(Amount::ZERO, 1000.0, &w).unwrap(), Some(0.0));
        let doubled = conventional_velocity(Amount::from_units(620), 2000.0, &w).unwrap().unwrap();
        assert_eq!(doubled, v);
        assert_eq!(conventional_velocity(Amount::ZERO, 0.0, &w).unwrap(), None);
        assert!(matches!(
            conventional_velocity(Amount::from_units(1), 0.0, &w),
            Err(EstimateError::InconsistentBalance { .. })
        ));
    }

    #[test]
    fn conventional_from_series() {
        let l = ledger(
            vec![
                tx(0, "m", "A", 1000, TransferKind::Disbursement),
                tx(SECONDS_PER_HOUR, "A", "B", 310, TransferKind::TransferStandard),
            ],
            WEEK,
        );
        let s = build_balance_series(&l);
        let v = conventional_estimate(total_flow(&l, l.window()), &s, l.window()).unwrap().unwrap();
        assert!((v - 0.31).abs() < 1e-12);
    }

    #[test]
    fn point_mass_at_one_week() {
        let mut d = DurationDistribution::new();
        for w in [3, 40, 7] {
            d.push(WEEK, Amount::from_units(w));
        }
        let win = Window::new(0, 4 * WEEK, "w").unwrap();
        let r = distributional_estimate(&d, &win, Amount::from_units(100), &narrow()).unwrap().unwrap();
        assert!((r.v_t - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fast_movers_dominate_flow() {
        let mut d = DurationDistribution::new();
        d.push(SECONDS_PER_DAY, Amount::from_units(90));
        d.push(70 * SECONDS_PER_DAY, Amount::from_units(10));
        let win = Window::new(0, 10 * WEEK, "w").unwrap();
        let r = distributional_estimate(&d, &win, Amount::from_units(500), &narrow()).unwrap().unwrap();
        assert!((r.tau_bar / SECONDS_PER_DAY as f64 - 7.9).abs() < 1e-5);
        assert!((r.v_t - 7.0 / 7.9).abs() < 1e-6);
        assert!((r.v_t - 0.886).abs() < 1e-3);
    }

    #[test]
    fn accounting_identity() {
        let mut d = DurationDistribution::new();
        d.push(3_000, Amount::from_units(2));
        d.push(900_000, Amount::from_units(5));
        d.push(40, Amount::from_units(1));
        let win = Window::new(0, 3 * WEEK, "w").unwrap();
        let flow = Amount::from_minor(123_456);
        let r = distributional_estimate(&d, &win, flow, &KdeOptions::default()).unwrap().unwrap();
        let rebuilt = r.m_t * win.weeks() * r.v_t;
        assert!((rebuilt - flow.to_f64()).abs() < 0.005);
    }

    #[test]
    fn empty_and_degenerate_cells() {
        let win = Window::new(0, WEEK, "w").unwrap();
        let empty = DurationDistribution::new();
        assert!(distributional_estimate(&empty, &win, Amount::ZERO, &KdeOptions::default()).unwrap().is_none());
        let e = estimate(&win, "all", &empty, Amount::ZERO, None, &KdeOptions::default()).unwrap();
        assert_eq!((e.n, e.flag.as_deref()), (0, Some("empty")));

        let mut point = DurationDistribution::new();
        point.push(60, Amount::from_units(1));
        point.push(60, Amount::from_units(2));
        let e = estimate(&win, "all", &point, Amount::ZERO, None, &KdeOptions::default()).unwrap();
        assert_eq!(e.v_t, None);
        assert_eq!(e.flag.as_deref(), Some("degenerate"));
    }

    #[test]
    fn estimates_csv_leaves_nulls_empty() {
        let win = Window::new(0, WEEK, "2020-02-02").unwrap();
        let e =
            estimate(&win, "rural", &DurationDistribution::new(), Amount::from_units(3), None, &KdeOptions::default())
                .unwrap();
        let mut buf = Vec::new();
        write_estimates_csv(&mut buf, &[e]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "2020-02-02,rural,3.00,,,,,,0,0.00,empty");
    }
}
