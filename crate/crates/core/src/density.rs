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

//! Weighted kernel density estimation of held durations in log space.
//!
//! Centers are `y_i = ln(max(τ_i, τ_floor))`; the density in τ is the
//! back-transformed Gaussian mixture
//!
//! ```text
//! f(τ) = (1/τ) Σ_i w_i φ_h(ln τ − y_i)
//! ```
//!
//! i.e. a mixture of log-normal kernels. The bandwidth follows Scott's rule
//! with the effective sample size `n_eff = (Σw)² / Σw²`.

use std::f64::consts::PI;
use std::io::Write;

use thiserror::Error;

use crate::amount::Amount;
use crate::flowtrace::HeldDuration;
use crate::quadrature::{integrate, QuadratureError};

pub const DEFAULT_TAU_FLOOR: f64 = 1.0;
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;
/// Integration support extends this many bandwidths past the extreme centers.
pub const SUPPORT_BANDWIDTHS: f64 = 8.0;
pub const CURVE_POINTS: usize = 200;

// Kernel contributions beyond this many bandwidths are below 1e-40.
const KERNEL_REACH: f64 = 13.6;
const MAX_SEGMENTS: usize = 50_000;

#[derive(Debug, Error)]
pub enum KdeError {
    #[error("no samples")]
    Empty,
    #[error("sample {index}: invalid duration {tau} or weight {weight}")]
    InvalidSample { index: usize, tau: f64, weight: f64 },
    #[error("all durations clamp to {tau} s; the bandwidth is degenerate, report this point mass separately")]
    Degenerate { tau: f64 },
    #[error("invalid bandwidth {0}")]
    Bandwidth(f64),
    #[error("density is defined for τ > 0, got {0}")]
    Domain(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("csv error")]
    Csv(#[from] csv::Error),
}

/// Amount-weighted held durations observed in one window or cohort.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DurationDistribution {
    taus: Vec<i64>,
    weights: Vec<Amount>,
    total_weight: Amount,
}

impl DurationDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on a negative duration or non-positive weight.
    pub fn push(&mut self, tau: i64, weight: Amount) {
        assert!(tau >= 0, "negative duration {tau}");
        assert!(weight.is_positive(), "non-positive weight {weight}");
        self.taus.push(tau);
        self.weights.push(weight);
        self.total_weight += weight;
    }

    pub fn from_durations<'a>(durations: impl IntoIterator<Item = &'a HeldDuration>) -> Self {
        let mut d = Self::new();
        for h in durations {
            d.push(h.tau, h.weight);
        }
        d
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn taus(&self) -> &[i64] {
        &self.taus
    }

    pub fn weights(&self) -> &[Amount] {
        &self.weights
    }

    pub fn total_weight(&self) -> Amount {
        self.total_weight
    }

    /// Exact `(Σ w·τ, Σ w)` in minor-unit seconds and minor units.
    pub fn weighted_sums(&self) -> (i128, i128) {
        let num = self.taus.iter().zip(&self.weights).map(|(&t, w)| t as i128 * w.minor() as i128).sum();
        (num, self.total_weight.minor() as i128)
    }

    /// Weighted sample mean of τ, before any smoothing.
    pub fn sample_mean(&self) -> Option<f64> {
        let (num, den) = self.weighted_sums();
        (den > 0).then(|| num as f64 / den as f64)
    }

    /// `F_T(τ)`: total weight of durations no longer than `tau`.
    pub fn cumulative_flow(&self, tau: i64) -> Amount {
        self.taus.iter().zip(&self.weights).filter(|(&t, _)| t <= tau).map(|(_, &w)| w).sum()
    }

    /// `P_T(τ) = F_T(τ) / F_T`.
    pub fn probability_up_to(&self, tau: i64) -> f64 {
        if self.total_weight.is_zero() {
            return 0.0;
        }
        self.cumulative_flow(tau).minor() as f64 / self.total_weight.minor() as f64
    }

    /// Share of weight on durations shorter than `tau_floor`.
    pub fn clamped_fraction(&self, tau_floor: f64) -> f64 {
        if self.total_weight.is_zero() {
            return 0.0;
        }
        let clamped: i64 =
            self.taus.iter().zip(&self.weights).filter(|(&t, _)| (t as f64) < tau_floor).map(|(_, w)| w.minor()).sum();
        clamped as f64 / self.total_weight.minor() as f64
    }

    pub fn extend(&mut self, other: &DurationDistribution) {
        self.taus.extend_from_slice(&other.taus);
        self.weights.extend_from_slice(&other.weights);
        self.total_weight += other.total_weight;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    #[default]
    Scott,
    /// Fixed log-space standard deviation.
    Fixed(f64),
}

/// A fitted log-space Gaussian mixture. Centers are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    centers: Vec<f64>,
    weights: Vec<f64>,
    bandwidth: f64,
    tau_floor: f64,
    effective_n: f64,
}

impl KdeModel {
    /// Fits a model to raw `(τ, weight)` samples.
    pub fn fit(taus: &[f64], weights: &[f64], tau_floor: f64, bandwidth: Bandwidth) -> Result<Self, KdeError> {
        if taus.is_empty() {
            return Err(KdeError::Empty);
        }
        assert_eq!(taus.len(), weights.len(), "taus and weights differ in length");
        if !(tau_floor > 0.0 && tau_floor.is_finite()) {
            return Err(KdeError::Domain(tau_floor));
        }
        for (index, (&tau, &weight)) in taus.iter().zip(weights).enumerate() {
            if !(tau >= 0.0 && tau.is_finite() && weight > 0.0 && weight.is_finite()) {
                return Err(KdeError::InvalidSample { index, tau, weight });
            }
        }
        let total: f64 = weights.iter().sum();
        let mut pairs: Vec<(f64, f64)> =
            taus.iter().zip(weights).map(|(&t, &w)| (t.max(tau_floor).ln(), w / total)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (centers, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();

        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        let effective_n = 1.0 / sum_sq;
        let bandwidth = match bandwidth {
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
            Bandwidth::Fixed(h) => return Err(KdeError::Bandwidth(h)),
            Bandwidth::Scott => {
                if centers[0] == centers[centers.len() - 1] {
                    return Err(KdeError::Degenerate { tau: centers[0].exp() });
                }
                let mean: f64 = centers.iter().zip(&weights).map(|(y, w)| w * y).sum();
                let var: f64 = centers.iter().zip(&weights).map(|(y, w)| w * (y - mean).powi(2)).sum();
                let h = var.sqrt() * effective_n.powf(-0.2);
                if h.is_nan() || h <= 0.0 {
                    return Err(KdeError::Degenerate { tau: mean.exp() });
                }
                h
            }
        };
        Ok(KdeModel { centers, weights, bandwidth, tau_floor, effective_n })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn effective_n(&self) -> f64 {
        self.effective_n
    }

    pub fn tau_floor(&self) -> f64 {
        self.tau_floor
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integration support `[exp(min y − 8h), exp(max y + 8h)]`.
    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.log_support();
        (lo.exp(), hi.exp())
    }

    fn log_support(&self) -> (f64, f64) {
        let reach = SUPPORT_BANDWIDTHS * self.bandwidth;
        (self.centers[0] - reach, self.centers[self.centers.len() - 1] + reach)
    }

    /// Mixture density in `u = ln τ`.
    fn log_density(&self, u: f64) -> f64 {
        let h = self.bandwidth;
        let reach = KERNEL_REACH * h;
        let lo = self.centers.partition_point(|&y| y < u - reach);
        let hi = self.centers.partition_point(|&y| y <= u + reach);
        let norm = 1.0 / (h * (2.0 * PI).sqrt());
        let inv_2h2 = 0.5 / (h * h);
        self.centers[lo..hi]
            .iter()
            .zip(&self.weights[lo..hi])
            .map(|(y, w)| w * (-(u - y) * (u - y) * inv_2h2).exp())
            .sum::<f64>()
            * norm
    }

    /// Density per second at `tau`.
    pub fn density_at(&self, tau: f64) -> Result<f64, KdeError> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(KdeError::Domain(tau));
        }
        Ok(self.log_density(tau.ln()) / tau)
    }

    /// Breakpoints no wider than one bandwidth over each cluster of
    /// kernels, with gaps between clusters left as single segments. Each
    /// kernel's upper reach is pushed out by `shift`.
    fn breakpoints(&self, shift: f64) -> Vec<f64> {
        let h = self.bandwidth;
        let reach = SUPPORT_BANDWIDTHS * h;
        let mut clusters: Vec<(f64, f64)> = Vec::new();
        for &y in &self.centers {
            match clusters.last_mut() {
                Some(c) if y - reach <= c.1 => c.1 = y + shift + reach,
                _ => clusters.push((y - reach, y + shift + reach)),
            }
        }
        let mut breaks = Vec::new();
        for (a, b) in clusters {
            let n = ((b - a) / h).ceil().max(1.0) as usize;
            breaks.extend((0..=n).map(|i| a + (b - a) * i as f64 / n as f64));
        }
        breaks
    }

    /// `∫ f(τ) g(τ) dτ` computed in `u = ln τ`.
    fn expectation(&self, g: impl Fn(f64) -> f64, shift: f64, quad_tol: f64) -> Result<f64, KdeError> {
        let breaks = self.breakpoints(shift);
        let q = integrate(|u| self.log_density(u) * g(u), &breaks, quad_tol, MAX_SEGMENTS)?;
        Ok(q.value)
    }

    /// `∫ f(τ) dτ` over the truncated support.
    pub fn total_probability(&self, quad_tol: f64) -> Result<f64, KdeError> {
        self.expectation(|_| 1.0, 0.0, quad_tol)
    }

    /// `∫ f(τ) τ dτ`. Each kernel's τ-weighted mass is a Gaussian in ln τ
    /// centred `h²` above its center, so the upper limit moves out by `h²`.
    fn first_moment(&self, quad_tol: f64) -> Result<f64, KdeError> {
        let h = self.bandwidth;
        self.expectation(f64::exp, h * h, quad_tol)
    }

    /// Closed-form mean of the log-normal mixture, `Σ w_i e^{y_i} e^{h²/2}`.
    pub fn analytic_mean(&self) -> f64 {
        let inflation = (0.5 * self.bandwidth * self.bandwidth).exp();
        self.centers.iter().zip(&self.weights).map(|(y, w)| w * y.exp()).sum::<f64>() * inflation
    }

    /// Log-spaced `(τ, f(τ))` points across the support.
    pub fn curve(&self, points: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.log_support();
        let steps = points.max(2) - 1;
        (0..=steps)
            .map(|i| {
                let u = lo + (hi - lo) * i as f64 / steps as f64;
                let tau = u.exp();
                (tau, self.log_density(u) / tau)
            })
            .collect()
    }
}

/// Fits a Scott's-rule model to a distribution of held durations.
pub fn fit_log_kde(dist: &DurationDistribution, tau_floor: f64) -> Result<KdeModel, KdeError> {
    fit_with(dist, tau_floor, Bandwidth::Scott)
}

pub fn fit_with(dist: &DurationDistribution, tau_floor: f64, bandwidth: Bandwidth) -> Result<KdeModel, KdeError> {
    let taus: Vec<f64> = dist.taus().iter().map(|&t| t as f64).collect();
    let weights: Vec<f64> = dist.weights().iter().map(|w| w.to_f64()).collect();
    KdeModel::fit(&taus, &weights, tau_floor, bandwidth)
}

pub fn density_at(model: &KdeModel, tau: f64) -> Result<f64, KdeError> {
    model.density_at(tau)
}

/// Mean holding time `∫ f(τ) τ dτ` in seconds, by adaptive quadrature
/// over `[exp(min y − 8h), exp(max y + h² + 8h)]`.
pub fn mean_holding_time(model: &KdeModel, quad_tol: f64) -> Result<f64, KdeError> {
    model.first_moment(quad_tol)
}

pub fn write_density_curve<W: Write>(writer: W, curve: &[(f64, f64)]) -> Result<(), KdeError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tau_seconds", "density"])?;
    for (tau, f) in curve {
        w.write_record([format!("{tau:.6e}"), format!("{f:.6e}")])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
