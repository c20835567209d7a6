//! The nine exponential-smoothing variants (seasonality x trend, each in
//! {none, additive, multiplicative}) with their initialization rules.
//!
//! State updates apply level, then trend, then seasonal index; the forecast
//! for bin t+h is read from the updated state. Multiplicative denominators
//! carry a 1e-9 floor and degenerate values surface as errors naming the
//! offending component rather than being silently substituted.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Floor for multiplicative denominators.
pub const MIN_DENOMINATOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seasonality {
    None,
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    None,
    Additive,
    Multiplicative,
}

/// Model family selector plus its parameters. `beta` is present exactly
/// when the family has trend, `gamma` exactly when it is seasonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSpec {
    seasonality: Seasonality,
    trend: Trend,
    alpha: f64,
    beta: Option<f64>,
    gamma: Option<f64>,
    season_len: usize,
    horizon: usize,
    /// Alternative Holt slope init b1 = (x4 - x1) / 3.
    four_point_trend_init: bool,
}

fn in_open_unit(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(Error::Input(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl SmoothingSpec {
    pub fn new(
        seasonality: Seasonality,
        trend: Trend,
        alpha: f64,
        beta: Option<f64>,
        gamma: Option<f64>,
        season_len: usize,
        horizon: usize,
    ) -> Result<Self> {
        in_open_unit("alpha", alpha)?;
        match (trend, beta) {
            (Trend::None, None) => {}
            (Trend::None, Some(_)) => {
                return Err(Error::Input("beta given but the family has no trend".into()))
            }
            (_, Some(b)) => {
                in_open_unit("beta", b)?;
            }
            (_, None) => return Err(Error::Input("trend mode requires beta".into())),
        }
        match (seasonality, gamma) {
            (Seasonality::None, None) => {}
            (Seasonality::None, Some(_)) => {
                return Err(Error::Input("gamma given but the family is not seasonal".into()))
            }
            (_, Some(g)) => {
                in_open_unit("gamma", g)?;
            }
            (_, None) => return Err(Error::Input("seasonal mode requires gamma".into())),
        }
        if seasonality != Seasonality::None && season_len < 2 {
            return Err(Error::Input("seasonal families need season length of at least 2".into()));
        }
        if horizon < 1 {
            return Err(Error::Input("horizon must be at least 1".into()));
        }
        if seasonality != Seasonality::None && horizon > season_len {
            // the seasonal forecast line indexes c_{t-s+h}, which only
            // exists for h <= s
            return Err(Error::Input(format!(
                "horizon {horizon} exceeds season length {season_len}; seasonal forecasts reuse last season's indices and are undefined beyond one season"
            )));
        }
        Ok(SmoothingSpec {
            seasonality,
            trend,
            alpha,
            beta,
            gamma,
            season_len,
            horizon,
            four_point_trend_init: false,
        })
    }

    /// Switch the non-seasonal trend init to b1 = (x4 - x1)/3.
    pub fn with_four_point_trend_init(mut self) -> Self {
        self.four_point_trend_init = true;
        self
    }

    pub fn seasonality(&self) -> Seasonality {
        self.seasonality
    }

    pub fn trend(&self) -> Trend {
        self.trend
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn season_len(&self) -> usize {
        self.season_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Four-letter family code, e.g. ASNT = additive seasonality, no trend.
    pub fn code(&self) -> String {
        let s = match self.seasonality {
            Seasonality::None => 'N',
            Seasonality::Additive => 'A',
            Seasonality::Multiplicative => 'M',
        };
        let t = match self.trend {
            Trend::None => 'N',
            Trend::Additive => 'A',
            Trend::Multiplicative => 'M',
        };
        format!("{s}S{t}T")
    }

    /// Number of leading observations the initialization consumes.
    pub fn warmup_len(&self) -> usize {
        match (self.seasonality, self.trend) {
            (Seasonality::None, Trend::None) => 1,
            (Seasonality::None, _) => {
                if self.four_point_trend_init {
                    4
                } else {
                    2
                }
            }
            (_, Trend::None) => self.season_len,
            (_, _) => 2 * self.season_len,
        }
    }

    /// Time index of the freshly initialized state (1-based).
    fn state_time(&self) -> usize {
        match self.seasonality {
            Seasonality::None => 1,
            _ => self.season_len,
        }
    }
}

/// Evolving level / trend / seasonal-index state. The seasonal ring is
/// ordered oldest first: for a state at time t it holds c_{t-s+1} .. c_t.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingState {
    pub level: f64,
    pub trend: Option<f64>,
    pub seasonal: Option<VecDeque<f64>>,
    /// 1-based index of the last observation absorbed.
    pub time: usize,
}

impl SmoothingState {
    /// Assemble a state by hand, validating its shape against the family.
    pub fn assemble(
        spec: &SmoothingSpec,
        level: f64,
        trend: Option<f64>,
        seasonal: Option<Vec<f64>>,
        time: usize,
    ) -> Result<Self> {
        if trend.is_some() != (spec.trend != Trend::None) {
            return Err(Error::Input("trend state must be present iff the family has trend".into()));
        }
        match (&seasonal, spec.seasonality) {
            (None, Seasonality::None) => {}
            (Some(ring), s) if s != Seasonality::None => {
                if ring.len() != spec.season_len {
                    return Err(Error::Input(format!(
                        "seasonal ring must have exactly {} entries, got {}",
                        spec.season_len,
                        ring.len()
                    )));
                }
                if s == Seasonality::Multiplicative && ring.iter().any(|&c| c <= 0.0) {
                    return Err(Error::Input("multiplicative seasonal indices must be positive".into()));
                }
            }
            _ => return Err(Error::Input("seasonal ring must be present iff the family is seasonal".into())),
        }
        if spec.seasonality == Seasonality::Multiplicative && level <= 0.0 {
            return Err(Error::Input("multiplicative-mode level must be positive".into()));
        }
        Ok(SmoothingState { level, trend, seasonal: seasonal.map(VecDeque::from), time })
    }

    /// Sum of the seasonal ring; exposes index drift (the updates do not
    /// renormalize, so additive rings wander away from zero-sum).
    pub fn seasonal_index_sum(&self) -> Option<f64> {
        self.seasonal.as_ref().map(|r| r.iter().sum())
    }
}

/// Initialize state from a warmup prefix.
///
/// Non-seasonal: a1 = x1, and with trend b1 = x2 - x1 (additive) or
/// b1 = x2 / x1 (multiplicative ratio analogue). Seasonal: a_s is the
/// first-season mean, c_i = x_i / a_s (multiplicative) or x_i - a_s
/// (additive); with trend, b_s = (1/s) sum (x_{s+i} - x_i) / s, whose
/// ratio analogue is (m2 / m1)^(1/s) for the two season means.
pub fn init_state(spec: &SmoothingSpec, warmup: &[f64]) -> Result<SmoothingState> {
    let needed = spec.warmup_len();
    if warmup.len() < needed {
        return Err(Error::Input(format!(
            "{} initialization needs {needed} warmup values, got {}",
            spec.code(),
            warmup.len()
        )));
    }
    let x = &warmup[..needed];
    let s = spec.season_len;
    match spec.seasonality {
        Seasonality::None => {
            let level = x[0];
            let trend = match spec.trend {
                Trend::None => None,
                Trend::Additive => {
                    if spec.four_point_trend_init {
                        Some((x[3] - x[0]) / 3.0)
                    } else {
                        Some(x[1] - x[0])
                    }
                }
                Trend::Multiplicative => {
                    if x[0].abs() < MIN_DENOMINATOR {
                        return Err(Error::Degenerate {
                            component: "initial level x1 (multiplicative trend ratio)".into(),
                            bin: Some(1),
                        });
                    }
                    if spec.four_point_trend_init {
                        Some((x[3] / x[0]).abs().powf(1.0 / 3.0))
                    } else {
                        Some(x[1] / x[0])
                    }
                }
            };
            Ok(SmoothingState { level, trend, seasonal: None, time: 1 })
        }
        seasonality => {
            let level: f64 = x[..s].iter().sum::<f64>() / s as f64;
            if seasonality == Seasonality::Multiplicative && level.abs() < MIN_DENOMINATOR {
                return Err(Error::Degenerate {
                    component: "first-season mean a_s (multiplicative seasonal indices)".into(),
                    bin: Some(s),
                });
            }
            let ring: VecDeque<f64> = x[..s]
                .iter()
                .map(|&xi| match seasonality {
                    Seasonality::Additive => xi - level,
                    _ => xi / level,
                })
                .collect();
            let trend = match spec.trend {
                Trend::None => None,
                Trend::Additive => {
                    let b = (0..s).map(|i| (x[s + i] - x[i]) / s as f64).sum::<f64>() / s as f64;
                    Some(b)
                }
                Trend::Multiplicative => {
                    let m1 = level;
                    let m2: f64 = x[s..2 * s].iter().sum::<f64>() / s as f64;
                    if m1.abs() < MIN_DENOMINATOR || m2 / m1 <= 0.0 {
                        return Err(Error::Degenerate {
                            component: "season means m2/m1 (multiplicative trend ratio)".into(),
                            bin: Some(2 * s),
                        });
                    }
                    Some((m2 / m1).powf(1.0 / s as f64))
                }
            };
            Ok(SmoothingState { level, trend, seasonal: Some(ring), time: s })
        }
    }
}

fn checked_div(num: f64, denom: f64, component: &str, bin: usize) -> Result<f64> {
    if denom.abs() < MIN_DENOMINATOR {
        return Err(Error::Degenerate { component: component.into(), bin: Some(bin) });
    }
    Ok(num / denom)
}

/// Forecast mu_{t+h} read off a state at time t.
pub fn forecast_from(spec: &SmoothingSpec, state: &SmoothingState) -> Result<f64> {
    let h = spec.horizon;
    let base = match spec.trend {
        Trend::None => state.level,
        Trend::Additive => state.level + state.trend.expect("trend state") * h as f64,
        Trend::Multiplicative => state.level * state.trend.expect("trend state").powi(h as i32),
    };
    Ok(match spec.seasonality {
        Seasonality::None => base,
        Seasonality::Additive => base + state.seasonal.as_ref().expect("seasonal ring")[h - 1],
        Seasonality::Multiplicative => base * state.seasonal.as_ref().expect("seasonal ring")[h - 1],
    })
}

/// One smoothing step: absorb x_t, return the updated state and the
/// forecast mu_{t+h} it implies. Pure in (spec, state, x).
pub fn es_step(spec: &SmoothingSpec, state: &SmoothingState, x: f64) -> Result<(SmoothingState, f64)> {
    let t = state.time + 1;
    if (spec.seasonality == Seasonality::Multiplicative || spec.trend == Trend::Multiplicative)
        && !(x > 0.0)
    {
        return Err(Error::Input(format!(
            "multiplicative modes need positive observations, got {x} at bin {t}"
        )));
    }
    let mut new = state.clone();
    new.time = t;

    let c_old = state.seasonal.as_ref().map(|r| r[0]);
    let prior = match spec.trend {
        Trend::None => state.level,
        Trend::Additive => state.level + state.trend.expect("trend state"),
        Trend::Multiplicative => state.level * state.trend.expect("trend state"),
    };
    let detrended = match spec.seasonality {
        Seasonality::None => x,
        Seasonality::Additive => x - c_old.expect("seasonal ring"),
        Seasonality::Multiplicative => {
            checked_div(x, c_old.expect("seasonal ring"), "seasonal index c[t-s]", t)?
        }
    };
    new.level = spec.alpha * detrended + (1.0 - spec.alpha) * prior;

    match spec.trend {
        Trend::None => {}
        Trend::Additive => {
            let beta = spec.beta.expect("beta");
            new.trend = Some(beta * (new.level - state.level) + (1.0 - beta) * state.trend.expect("trend state"));
        }
        Trend::Multiplicative => {
            let beta = spec.beta.expect("beta");
            let ratio = checked_div(new.level, state.level, "previous level a[t-1]", t)?;
            new.trend = Some(beta * ratio + (1.0 - beta) * state.trend.expect("trend state"));
        }
    }

    if spec.seasonality != Seasonality::None {
        let gamma = spec.gamma.expect("gamma");
        let resid = match spec.seasonality {
            Seasonality::Additive => x - new.level,
            _ => checked_div(x, new.level, "level a[t]", t)?,
        };
        let c_new = gamma * resid + (1.0 - gamma) * c_old.expect("seasonal ring");
        let ring = new.seasonal.as_mut().expect("seasonal ring");
        ring.pop_front();
        ring.push_back(c_new);
    }

    let forecast = forecast_from(spec, &new)?;
    Ok((new, forecast))
}

/// A forecast track aligned to the input series: `forecasts[i]` targets
/// bin `first_bin + i` (0-based) and was made h bins earlier.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTrack {
    pub first_bin: usize,
    pub forecasts: Vec<f64>,
}

impl ForecastTrack {
    /// (forecast, actual) pairs over bins in `[from, to)`, 0-based.
    pub fn aligned<'a>(&'a self, actuals: &'a [f64], from: usize, to: usize) -> impl Iterator<Item = (f64, f64)> + 'a {
        let lo = from.max(self.first_bin);
        (lo..to.min(actuals.len()).min(self.first_bin + self.forecasts.len()))
            .map(move |bin| (self.forecasts[bin - self.first_bin], actuals[bin]))
    }
}

/// Roll a smoothing model over a series: initialize on the warmup prefix,
/// replay the remaining warmup observations silently (the init already saw
/// them, so emitting forecasts there would not be causal), then emit the
/// forecast for each later bin as made h bins earlier.
pub fn forecast_series(spec: &SmoothingSpec, values: &[f64]) -> Result<ForecastTrack> {
    let n = values.len();
    let w = spec.warmup_len();
    let h = spec.horizon;
    if n < w + h {
        return Err(Error::Input(format!(
            "series length {n} leaves no forecastable bin past the {} warmup of {w} at horizon {h}",
            spec.code()
        )));
    }
    let mut state = init_state(spec, values)?;
    for t in spec.state_time() + 1..=w {
        state = es_step(spec, &state, values[t - 1])?.0;
    }
    debug_assert_eq!(state.time, w);
    let mut forecasts = Vec::with_capacity(n.saturating_sub(w + h - 1));
    // state sits at time u; its forecast targets bin u + h
    for u in w..=n - h {
        forecasts.push(forecast_from(spec, &state)?);
        if u < n - h {
            state = es_step(spec, &state, values[u])?.0;
        }
    }
    Ok(ForecastTrack { first_bin: w + h - 1, forecasts })
}
