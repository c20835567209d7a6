//! Synthetic per-link ground-truth speed generation.
//!
//! A seasonal ARMA recursion (optionally integrated) around a configurable
//! mean, plus an optional deterministic within-season mean profile, clamped
//! to a physical speed range. Each link gets its own derived RNG stream, so
//! distinct links can be generated concurrently and reproducibly.

use chrono::NaiveDateTime;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, fnv1a64};
use crate::series::SpeedSeries;

/// Generator configuration. The default coefficients are implementation
/// choices tuned to produce plausible daily speed cycles; everything is
/// overridable from the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SarimaConfig {
    /// Nonseasonal AR coefficients.
    pub ar: Vec<f64>,
    /// Nonseasonal MA coefficients.
    pub ma: Vec<f64>,
    /// Seasonal AR coefficients (at lags s, 2s, ...).
    pub seasonal_ar: Vec<f64>,
    /// Seasonal MA coefficients.
    pub seasonal_ma: Vec<f64>,
    /// Bins per season.
    pub season_len: usize,
    /// Nonseasonal differencing order d.
    pub diff: usize,
    /// Seasonal differencing order D.
    pub seasonal_diff: usize,
    /// Process mean, km/h.
    pub mean: f64,
    /// Shock standard deviation, km/h.
    pub shock_sd: f64,
    /// Lower clamp bound, km/h.
    pub clamp_min: f64,
    /// Upper clamp bound, km/h.
    pub clamp_max: f64,
    /// Master seed; per-link streams are derived from (seed, link id).
    pub seed: u64,
    /// Optional deterministic per-bin mean offsets, one per season bin,
    /// added to `mean` before clamping. `None` means a flat profile.
    pub seasonal_profile: Option<Vec<f64>>,
}

impl SarimaConfig {
    /// Default generator used by the benchmark: SARMA(1,0,1)(1,0,1)_24
    /// around 60 km/h with a fixed daily mean profile.
    pub fn default_with_seed(seed: u64) -> Self {
        SarimaConfig {
            ar: vec![0.6],
            ma: vec![0.3],
            seasonal_ar: vec![0.5],
            seasonal_ma: vec![0.2],
            season_len: 24,
            diff: 0,
            seasonal_diff: 0,
            mean: 60.0,
            shock_sd: 2.5,
            clamp_min: 5.0,
            clamp_max: 120.0,
            seed,
            seasonal_profile: Some(default_daily_profile(24)),
        }
    }
}

/// Smooth daily mean profile: fast at night, a mild morning dip and a deep
/// evening dip, in km/h offsets around the process mean.
pub fn default_daily_profile(season_len: usize) -> Vec<f64> {
    let s = season_len as f64;
    (0..season_len)
        .map(|h| {
            let p = h as f64 / s;
            12.0 * (std::f64::consts::TAU * (p - 3.0 / 24.0)).cos()
                + 5.0 * (2.0 * std::f64::consts::TAU * (p - 13.0 / 24.0)).cos()
        })
        .collect()
}

/// All characteristic roots strictly outside the unit circle, checked via
/// the step-down (inverse Levinson-Durbin) recursion: the recursion is
/// stationary iff every reflection coefficient lies strictly inside (-1, 1).
pub fn ar_is_stationary(coeffs: &[f64]) -> bool {
    let mut phi: Vec<f64> = coeffs.to_vec();
    while let Some(&k) = phi.last() {
        if !k.is_finite() || k.abs() >= 1.0 {
            return false;
        }
        let p = phi.len();
        let prev: Vec<f64> = (0..p - 1)
            .map(|i| (phi[i] + k * phi[p - 2 - i]) / (1.0 - k * k))
            .collect();
        phi = prev;
    }
    true
}

/// Multiply polynomials given as coefficient vectors (constant term first).
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `1 - c_1 B^s - c_2 B^{2s} - ...` (AR side) or `1 + c_1 B^s + ...` (MA side).
fn lag_poly(coeffs: &[f64], stride: usize, sign: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len() * stride + 1];
    out[0] = 1.0;
    for (j, &c) in coeffs.iter().enumerate() {
        out[(j + 1) * stride] = sign * c;
    }
    out
}

/// A validated generator with the seasonal and differencing operators
/// expanded into flat lag-coefficient form.
#[derive(Debug, Clone)]
pub struct SarimaProcess {
    config: SarimaConfig,
    /// z_t = sum_k ar_full[k-1] * z_{t-k} + shocks; includes differencing.
    ar_full: Vec<f64>,
    /// e_t + sum_k ma_full[k-1] * e_{t-k}.
    ma_full: Vec<f64>,
}

impl SarimaProcess {
    pub fn new(config: SarimaConfig) -> Result<Self> {
        if config.season_len < 2 {
            return Err(Error::Config("season_len must be at least 2".into()));
        }
        if !(config.clamp_min > 0.0) {
            return Err(Error::Config("clamp_min must be positive".into()));
        }
        if !(config.clamp_min < config.clamp_max) {
            return Err(Error::Config("clamp bounds must satisfy min < max".into()));
        }
        if !(config.shock_sd >= 0.0) {
            return Err(Error::Config("shock_sd must be non-negative".into()));
        }
        if !ar_is_stationary(&config.ar) {
            return Err(Error::Config(
                "nonseasonal AR polynomial is not stationary (root on or inside the unit circle)".into(),
            ));
        }
        if !ar_is_stationary(&config.seasonal_ar) {
            return Err(Error::Config(
                "seasonal AR polynomial is not stationary (root on or inside the unit circle)".into(),
            ));
        }
        if let Some(profile) = &config.seasonal_profile {
            if profile.len() != config.season_len {
                return Err(Error::Config(format!(
                    "seasonal_profile length {} does not match season_len {}",
                    profile.len(),
                    config.season_len
                )));
            }
        }

        let s = config.season_len;
        let mut ar_poly = poly_mul(&lag_poly(&config.ar, 1, -1.0), &lag_poly(&config.seasonal_ar, s, -1.0));
        for _ in 0..config.diff {
            ar_poly = poly_mul(&ar_poly, &[1.0, -1.0]);
        }
        for _ in 0..config.seasonal_diff {
            let mut seas_diff = vec![0.0; s + 1];
            seas_diff[0] = 1.0;
            seas_diff[s] = -1.0;
            ar_poly = poly_mul(&ar_poly, &seas_diff);
        }
        let ma_poly = poly_mul(&lag_poly(&config.ma, 1, 1.0), &lag_poly(&config.seasonal_ma, s, 1.0));

        // z_t - sum a_k z_{t-k} = rhs  =>  recursion coefficients are -ar_poly[k]
        let ar_full = ar_poly[1..].iter().map(|c| -c).collect();
        let ma_full = ma_poly[1..].to_vec();
        Ok(SarimaProcess { config, ar_full, ma_full })
    }

    pub fn config(&self) -> &SarimaConfig {
        &self.config
    }

    /// History length the recursion looks back over.
    pub fn history_len(&self) -> usize {
        self.ar_full.len().max(self.ma_full.len())
    }

    /// One raw recursion step, before clamping. `values` and `shocks` hold
    /// the most recent history last; histories shorter than `history_len`
    /// are implicitly padded with the mean (values) and zero (shocks).
    pub fn step(&self, values: &[f64], shocks: &[f64], shock: f64) -> f64 {
        let mean = self.config.mean;
        let mut z = shock;
        for (k, &a) in self.ar_full.iter().enumerate() {
            if a != 0.0 {
                let v = values.len().checked_sub(k + 1).map_or(mean, |i| values[i]);
                z += a * (v - mean);
            }
        }
        for (k, &m) in self.ma_full.iter().enumerate() {
            if m != 0.0 {
                let e = shocks.len().checked_sub(k + 1).map_or(0.0, |i| shocks[i]);
                z += m * e;
            }
        }
        // the constant term vanishes under differencing (the AR operator
        // annihilates constants), so adding the mean here is exact either way
        mean + z
    }

    /// Generate a clamped series of exactly `length` values for `link_id`.
    /// A burn-in prefix of 3 seasons is generated and discarded so the
    /// returned window starts in-distribution.
    pub fn generate(
        &self,
        length: usize,
        link_id: &str,
        start: NaiveDateTime,
        bin_minutes: u32,
    ) -> Result<SpeedSeries> {
        let s = self.config.season_len;
        if length < 2 * s {
            return Err(Error::Input(format!(
                "series length {length} is below the minimum of two seasons ({})",
                2 * s
            )));
        }
        let burn_in = 3 * s;
        let total = burn_in + length;
        let mut rng = derive_rng(self.config.seed, "sarima", &[fnv1a64(link_id.as_bytes())]);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");

        let mut values = Vec::with_capacity(total);
        let mut shocks = Vec::with_capacity(total);
        for _ in 0..total {
            let shock = if self.config.shock_sd > 0.0 {
                normal.sample(&mut rng) * self.config.shock_sd
            } else {
                0.0
            };
            let v = self.step(&values, &shocks, shock);
            values.push(v);
            shocks.push(shock);
        }

        let profile = self.config.seasonal_profile.as_deref();
        let out: Vec<f64> = values[burn_in..]
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let offset = profile.map_or(0.0, |p| p[i % s]);
                (v + offset).clamp(self.config.clamp_min, self.config.clamp_max)
            })
            .collect();
        SpeedSeries::new(link_id, start, bin_minutes, out)
    }
}
