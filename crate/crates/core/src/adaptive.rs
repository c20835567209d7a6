//! Adaptive exponential smoothing: the constant alpha is replaced by the
//! dynamic ratio alpha_t = |a_t / b_t| of smoothed signed error to smoothed
//! absolute error, so the smoother speeds up after structural shifts.
//!
//! Note the a_t, b_t here are the error accumulators of this recursion, not
//! the level/trend of the fixed-parameter families.

use crate::error::{Error, Result};
use crate::smoothing::ForecastTrack;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    /// Current forecast mu_t (the prediction for bin t + 1).
    pub forecast: f64,
    /// Smoothed signed error a_t.
    pub smoothed_error: f64,
    /// Smoothed absolute error b_t.
    pub smoothed_abs_error: f64,
    /// The alpha the next step will use.
    pub alpha: f64,
    /// Fixed fluctuation parameter.
    pub beta: f64,
    /// 1-based index of the last observation absorbed.
    pub time: usize,
}

impl AdaptiveState {
    /// Initialize from the first observation: mu_2 = x_1, a_1 = b_1 = 0,
    /// and alpha pinned to beta for the first three updates.
    pub fn init(beta: f64, x1: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Input(format!("beta must lie in (0, 1), got {beta}")));
        }
        Ok(AdaptiveState {
            forecast: x1,
            smoothed_error: 0.0,
            smoothed_abs_error: 0.0,
            alpha: beta,
            beta,
            time: 1,
        })
    }

    /// Absorb x_t and return (new state, forecast for bin t + 1).
    ///
    /// Order: mu_t from the previous state with its alpha already fixed
    /// (forecast-first, so the emitted forecast never saw x_t), then
    /// e_t = x_t - mu_t, then the error accumulators, then the alpha for
    /// the next step. alpha_2..4 stay pinned at beta; b_t = 0 also falls
    /// back to beta.
    pub fn step(&self, x: f64) -> (AdaptiveState, f64) {
        let t = self.time + 1;
        let beta = self.beta;
        let mu = (1.0 - self.alpha) * self.forecast + self.alpha * x;
        let e = x - mu;
        let a = beta * e + (1.0 - beta) * self.smoothed_error;
        let b = beta * e.abs() + (1.0 - beta) * self.smoothed_abs_error;
        let alpha_next = if t + 1 <= 4 || b == 0.0 { beta } else { (a / b).abs() };
        let new = AdaptiveState {
            forecast: mu,
            smoothed_error: a,
            smoothed_abs_error: b,
            alpha: alpha_next,
            beta,
            time: t,
        };
        (new, mu)
    }
}

/// Roll the adaptive smoother over a series; forecasts start at bin 2.
pub fn adaptive_forecast_series(beta: f64, values: &[f64]) -> Result<ForecastTrack> {
    if values.len() < 2 {
        return Err(Error::Input("adaptive smoothing needs at least two observations".into()));
    }
    let mut state = AdaptiveState::init(beta, values[0])?;
    let mut forecasts = Vec::with_capacity(values.len() - 1);
    for &x in &values[1..] {
        // the stored forecast targets the bin x sits in
        forecasts.push(state.forecast);
        state = state.step(x).0;
    }
    Ok(ForecastTrack { first_bin: 1, forecasts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_a_fixed_point() {
        let mut state = AdaptiveState::init(0.3, 50.0).unwrap();
        for _ in 0..50 {
            let (next, mu) = state.step(50.0);
            assert_eq!(mu, 50.0);
            assert_eq!(next.smoothed_error, 0.0);
            assert_eq!(next.smoothed_abs_error, 0.0);
            assert_eq!(next.alpha, 0.3);
            state = next;
        }
    }

    #[test]
    fn hand_derived_step() {
        // beta = 0.2, mu_prev = 40, alpha_t = 0.2, x = 50
        let state = AdaptiveState {
            forecast: 40.0,
            smoothed_error: 0.0,
            smoothed_abs_error: 0.0,
            alpha: 0.2,
            beta: 0.2,
            time: 4,
        };
        let (new, mu) = state.step(50.0);
        assert!((mu - 42.0).abs() < 1e-15);
        assert!((new.smoothed_error - 1.6).abs() < 1e-15);
        assert!((new.smoothed_abs_error - 1.6).abs() < 1e-15);
        assert!((new.alpha - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_stays_pinned_through_the_fourth_bin() {
        let mut state = AdaptiveState::init(0.2, 50.0).unwrap();
        // steps at t = 2, 3 produce alpha_3 = alpha_4 = beta
        state = state.step(55.0).0;
        assert_eq!(state.alpha, 0.2);
        state = state.step(47.0).0;
        assert_eq!(state.alpha, 0.2);
        // the step at t = 4 releases the ratio
        state = state.step(58.0).0;
        assert!((state.alpha - 0.549_295_774_647_886_8).abs() < 1e-12);
    }

    #[test]
    fn step_change_drives_alpha_toward_one() {
        let mut state = AdaptiveState::init(0.2, 50.0).unwrap();
        for _ in 0..10 {
            state = state.step(50.0).0;
        }
        for _ in 0..6 {
            state = state.step(80.0).0;
        }
        // one-signed errors make |a| = b
        assert!(state.alpha > 0.99);
    }

    #[test]
    fn forecast_track_alignment() {
        let track = adaptive_forecast_series(0.2, &[50.0, 55.0, 47.0]).unwrap();
        assert_eq!(track.first_bin, 1);
        // forecast for bin 2 is mu_2 = x_1; for bin 3 it is mu_2 updated on x_2
        assert_eq!(track.forecasts, vec![50.0, 51.0]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn alpha_always_in_unit_interval(
                beta in 0.01f64..0.99,
                values in proptest::collection::vec(1.0f64..150.0, 2..200),
            ) {
                let mut state = AdaptiveState::init(beta, values[0]).unwrap();
                for &x in &values[1..] {
                    state = state.step(x).0;
                    prop_assert!((0.0..=1.0).contains(&state.alpha));
                    prop_assert!(state.smoothed_abs_error >= state.smoothed_error.abs() - 1e-12);
                }
            }
        }
    }
}
