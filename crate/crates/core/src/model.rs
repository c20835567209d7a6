//! Model selectors and their CLI/config string form.
//!
//! Smoothing specs read as `<N|A|M>S<N|A|M>T[:alpha=..,beta=..,gamma=..,s=..,h=..]`,
//! the adaptive smoother as `ADAPTIVE:beta=..`, and the supervised models as
//! bare `NN` / `MLR` codes.

use crate::error::{Error, Result};
use crate::smoothing::{Seasonality, SmoothingSpec, Trend};

pub const DEFAULT_SEASON_LEN: usize = 24;
pub const DEFAULT_HORIZON: usize = 1;

/// A family without parameters, as used by grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Smoothing { seasonality: Seasonality, trend: Trend },
    Adaptive,
}

impl ModelFamily {
    pub fn parse(code: &str) -> Result<Self> {
        let code = code.trim();
        if code.eq_ignore_ascii_case("ADAPTIVE") {
            return Ok(ModelFamily::Adaptive);
        }
        let bytes = code.as_bytes();
        let mode = |b: u8, what: &str| -> Result<_> {
            match b {
                b'N' => Ok(0),
                b'A' => Ok(1),
                b'M' => Ok(2),
                _ => Err(Error::Parse(format!("bad {what} mode in family code {code:?}"))),
            }
        };
        if bytes.len() != 4 || bytes[1] != b'S' || bytes[3] != b'T' {
            return Err(Error::Parse(format!(
                "family code {code:?} must look like NSNT/ASAT/... or ADAPTIVE"
            )));
        }
        let seasonality = match mode(bytes[0], "seasonality")? {
            0 => Seasonality::None,
            1 => Seasonality::Additive,
            _ => Seasonality::Multiplicative,
        };
        let trend = match mode(bytes[2], "trend")? {
            0 => Trend::None,
            1 => Trend::Additive,
            _ => Trend::Multiplicative,
        };
        Ok(ModelFamily::Smoothing { seasonality, trend })
    }

    pub fn code(&self) -> String {
        match self {
            ModelFamily::Adaptive => "ADAPTIVE".to_string(),
            ModelFamily::Smoothing { seasonality, trend } => {
                let s = match seasonality {
                    Seasonality::None => 'N',
                    Seasonality::Additive => 'A',
                    Seasonality::Multiplicative => 'M',
                };
                let t = match trend {
                    Trend::None => 'N',
                    Trend::Additive => 'A',
                    Trend::Multiplicative => 'M',
                };
                format!("{s}S{t}T")
            }
        }
    }

    /// (needs_alpha, needs_beta, needs_gamma)
    pub fn active_parameters(&self) -> (bool, bool, bool) {
        match self {
            ModelFamily::Adaptive => (false, true, false),
            ModelFamily::Smoothing { seasonality, trend } => (
                true,
                *trend != Trend::None,
                *seasonality != Seasonality::None,
            ),
        }
    }

    /// The nine smoothing families in report (row) order.
    pub fn smoothing_families() -> Vec<ModelFamily> {
        let modes = [
            (Seasonality::None, Trend::None),
            (Seasonality::None, Trend::Additive),
            (Seasonality::None, Trend::Multiplicative),
            (Seasonality::Additive, Trend::None),
            (Seasonality::Additive, Trend::Additive),
            (Seasonality::Additive, Trend::Multiplicative),
            (Seasonality::Multiplicative, Trend::None),
            (Seasonality::Multiplicative, Trend::Additive),
            (Seasonality::Multiplicative, Trend::Multiplicative),
        ];
        modes
            .into_iter()
            .map(|(seasonality, trend)| ModelFamily::Smoothing { seasonality, trend })
            .collect()
    }
}

/// A fully specified model as named on the command line or in a config.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Smoothing(SmoothingSpec),
    Adaptive { beta: f64 },
    NeuralNet,
    Regression,
}

impl ModelSpec {
    /// Report row code.
    pub fn code(&self) -> String {
        match self {
            ModelSpec::Smoothing(s) => s.code(),
            ModelSpec::Adaptive { .. } => "ADAPTIVE".to_string(),
            ModelSpec::NeuralNet => "NN".to_string(),
            ModelSpec::Regression => "MLR".to_string(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (head, params) = match text.split_once(':') {
            Some((h, p)) => (h.trim(), Some(p)),
            None => (text, None),
        };
        if head.eq_ignore_ascii_case("NN") {
            if params.is_some() {
                return Err(Error::Parse("NN takes no parameters in its spec string".into()));
            }
            return Ok(ModelSpec::NeuralNet);
        }
        if head.eq_ignore_ascii_case("MLR") {
            if params.is_some() {
                return Err(Error::Parse("MLR takes no parameters in its spec string".into()));
            }
            return Ok(ModelSpec::Regression);
        }

        let family = ModelFamily::parse(head)?;
        let mut alpha = None;
        let mut beta = None;
        let mut gamma = None;
        let mut season_len = DEFAULT_SEASON_LEN;
        let mut horizon = DEFAULT_HORIZON;
        if let Some(params) = params {
            for pair in params.split(',') {
                let (key, value) = pair
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got {pair:?}")))?;
                let key = key.trim();
                let value = value.trim();
                let parse_f = || -> Result<f64> {
                    value.parse().map_err(|e| Error::Parse(format!("{key}={value:?}: {e}")))
                };
                let parse_u = || -> Result<usize> {
                    value.parse().map_err(|e| Error::Parse(format!("{key}={value:?}: {e}")))
                };
                match key {
                    "alpha" => alpha = Some(parse_f()?),
                    "beta" => beta = Some(parse_f()?),
                    "gamma" => gamma = Some(parse_f()?),
                    "s" => season_len = parse_u()?,
                    "h" => horizon = parse_u()?,
                    other => return Err(Error::Parse(format!("unknown parameter {other:?} in model spec"))),
                }
            }
        }
        match family {
            ModelFamily::Adaptive => {
                if alpha.is_some() || gamma.is_some() {
                    return Err(Error::Parse("ADAPTIVE takes only beta".into()));
                }
                let beta = beta.ok_or_else(|| Error::Parse("ADAPTIVE requires beta=..".into()))?;
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::Parse(format!("ADAPTIVE beta must lie in (0, 1), got {beta}")));
                }
                Ok(ModelSpec::Adaptive { beta })
            }
            ModelFamily::Smoothing { seasonality, trend } => {
                let alpha =
                    alpha.ok_or_else(|| Error::Parse(format!("{} requires alpha=..", family.code())))?;
                let spec = SmoothingSpec::new(seasonality, trend, alpha, beta, gamma, season_len, horizon)
                    .map_err(|e| Error::Parse(format!("model spec {text:?}: {e}")))?;
                Ok(ModelSpec::Smoothing(spec))
            }
        }
    }
}
