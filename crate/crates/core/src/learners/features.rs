//! Feature rows for the supervised models: the last three observed speeds
//! plus one-hot hour-of-day and day-of-week encodings of the target bin
//! (reference categories hour 0 and Monday are dropped to keep the design
//! full rank next to the intercept).

use chrono::{Datelike, Timelike};

use crate::error::{Error, Result};
use crate::series::SpeedSeries;

pub const LAGS: usize = 3;
pub const HOUR_COLS: usize = 23;
pub const DAY_COLS: usize = 6;
pub const FEATURE_WIDTH: usize = LAGS + HOUR_COLS + DAY_COLS;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: Vec<f64>,
    pub target: f64,
    /// 0-based index of the target bin in the source series.
    pub bin: usize,
}

pub fn feature_names() -> Vec<String> {
    let mut names = vec!["lag1".to_string(), "lag2".to_string(), "lag3".to_string()];
    names.extend((1..=HOUR_COLS).map(|h| format!("hour_{h}")));
    const DAYS: [&str; DAY_COLS] = ["tue", "wed", "thu", "fri", "sat", "sun"];
    names.extend(DAYS.iter().map(|d| format!("dow_{d}")));
    names
}

/// Features for a target bin given the three preceding observations.
pub fn encode(series: &SpeedSeries, bin: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(FEATURE_WIDTH);
    f.push(series.values[bin - 1]);
    f.push(series.values[bin - 2]);
    f.push(series.values[bin - 3]);
    let ts = series.timestamp(bin);
    let hour = ts.hour() as usize;
    for h in 1..=HOUR_COLS {
        f.push(if hour == h { 1.0 } else { 0.0 });
    }
    let dow = ts.weekday().num_days_from_monday() as usize;
    for d in 1..=DAY_COLS {
        f.push(if dow == d { 1.0 } else { 0.0 });
    }
    f
}

/// One row per bin with three available lags: rows cover bins 3..n (0-based),
/// so a series of length n yields n - 3 rows.
pub fn build_design_matrix(series: &SpeedSeries) -> Result<Vec<FeatureRow>> {
    let n = series.len();
    if n < LAGS + 1 {
        return Err(Error::Input(format!(
            "design matrix needs at least {} bins, series {} has {n}",
            LAGS + 1,
            series.link_id
        )));
    }
    Ok((LAGS..n)
        .map(|bin| FeatureRow { features: encode(series, bin), target: series.values[bin], bin })
        .collect())
}
