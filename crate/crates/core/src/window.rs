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

//! Half-open analysis windows and their subdivision into weeks or months.

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Timestamp = i64;

pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 604_800;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WindowError {
    #[error("window start {start} is not before end {end}")]
    Empty { start: Timestamp, end: Timestamp },
}

/// A half-open interval `[start, end)` of epoch seconds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: Timestamp,
    pub end: Timestamp,
    pub label: String,
}

impl Window {
    pub fn new(start: Timestamp, end: Timestamp, label: impl Into<String>) -> Result<Self, WindowError> {
        if start >= end {
            return Err(WindowError::Empty { start, end });
        }
        Ok(Window { start, end, label: label.into() })
    }

    pub fn seconds(&self) -> i64 {
        self.end - self.start
    }

    pub fn weeks(&self) -> f64 {
        self.seconds() as f64 / SECONDS_PER_WEEK as f64
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeGrain {
    Weekly,
    Monthly,
    #[default]
    Full,
}

impl std::str::FromStr for TimeGrain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weekly" | "week" => Ok(TimeGrain::Weekly),
            "monthly" | "month" => Ok(TimeGrain::Monthly),
            "full" | "total" => Ok(TimeGrain::Full),
            other => Err(format!("unknown time grain `{other}`")),
        }
    }
}

pub fn format_date(t: Timestamp) -> String {
    match DateTime::<Utc>::from_timestamp(t, 0) {
        Some(dt) => dt.format("%Y-%m-%d").to_string(),
        None => t.to_string(),
    }
}

fn month_label(t: Timestamp) -> String {
    match DateTime::<Utc>::from_timestamp(t, 0) {
        Some(dt) => dt.format("%Y-%m").to_string(),
        None => t.to_string(),
    }
}

fn next_month_start(t: Timestamp) -> Option<Timestamp> {
    let dt = DateTime::<Utc>::from_timestamp(t, 0)?;
    let (y, m) = if dt.month() == 12 { (dt.year() + 1, 1) } else { (dt.year(), dt.month() + 1) };
    let date = NaiveDate::from_ymd_opt(y, m, 1)?;
    Some(Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0)?).timestamp())
}

/// Splits `window` into consecutive sub-windows. Weeks are anchored at the
/// window start; months follow UTC calendar boundaries. A trailing partial
/// week or month is kept with its true length.
pub fn split(window: &Window, grain: TimeGrain) -> Vec<Window> {
    let mut out = Vec::new();
    match grain {
        TimeGrain::Full => out.push(window.clone()),
        TimeGrain::Weekly => {
            let mut s = window.start;
            while s < window.end {
                let e = (s + SECONDS_PER_WEEK).min(window.end);
                out.push(Window { start: s, end: e, label: format_date(s) });
                s = e;
            }
        }
        TimeGrain::Monthly => {
            let mut s = window.start;
            while s < window.end {
                let e = next_month_start(s).unwrap_or(window.end).min(window.end);
                out.push(Window { start: s, end: e, label: month_label(s) });
                s = e;
            }
        }
    }
    out
}
