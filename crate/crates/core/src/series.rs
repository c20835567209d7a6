//! Regularly binned per-link speed time series and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// A gapless, regularly binned speed series for one link, in km/h.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSeries {
    pub link_id: String,
    pub start: NaiveDateTime,
    pub bin_minutes: u32,
    pub values: Vec<f64>,
}

impl SpeedSeries {
    pub fn new(
        link_id: impl Into<String>,
        start: NaiveDateTime,
        bin_minutes: u32,
        values: Vec<f64>,
    ) -> Result<Self> {
        let link_id = link_id.into();
        if bin_minutes == 0 {
            return Err(Error::Input("bin duration must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::Input(format!("series for {link_id} is empty")));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::Input(format!(
                    "series for {link_id} has non-positive speed {v} at bin {i}"
                )));
            }
        }
        Ok(SpeedSeries { link_id, start, bin_minutes, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, bin: usize) -> NaiveDateTime {
        self.start + Duration::minutes(self.bin_minutes as i64 * bin as i64)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = NaiveDateTime> + '_ {
        (0..self.len()).map(|b| self.timestamp(b))
    }
}

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .map_err(|e| Error::Parse(format!("timestamp {s:?}: {e}")))
}

/// Write one or more series as `link_id,timestamp,speed_kph` rows.
pub fn write_series_csv(path: &Path, series: &[SpeedSeries]) -> Result<()> {
    let mut out = String::from("link_id,timestamp,speed_kph\n");
    for s in series {
        for (bin, v) in s.values.iter().enumerate() {
            writeln!(out, "{},{},{}", s.link_id, s.timestamp(bin).format(TIMESTAMP_FORMAT), v)
                .expect("writing to string cannot fail");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a speed-series CSV back, grouping rows by link in file order.
/// Bins must be gapless with a constant duration per link.
pub fn read_series_csv(path: &Path) -> Result<Vec<SpeedSeries>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("link_id,timestamp,speed_kph") => {}
        other => {
            return Err(Error::Parse(format!(
                "{}: expected header link_id,timestamp,speed_kph, got {other:?}",
                path.display()
            )))
        }
    }
    // (link, timestamps, values) in first-seen order
    let mut order: Vec<String> = Vec::new();
    let mut rows: Vec<(Vec<NaiveDateTime>, Vec<f64>)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, ',');
        let (link, ts, speed) = match (fields.next(), fields.next(), fields.next()) {
            (Some(l), Some(t), Some(s)) => (l, t, s),
            _ => return Err(Error::Parse(format!("{}:{}: malformed row", path.display(), lineno + 2))),
        };
        let ts = parse_timestamp(ts)?;
        let speed: f64 = speed
            .parse()
            .map_err(|e| Error::Parse(format!("{}:{}: speed: {e}", path.display(), lineno + 2)))?;
        let idx = match order.iter().position(|l| l == link) {
            Some(i) => i,
            None => {
                order.push(link.to_string());
                rows.push((Vec::new(), Vec::new()));
                order.len() - 1
            }
        };
        rows[idx].0.push(ts);
        rows[idx].1.push(speed);
    }
    let mut out = Vec::with_capacity(order.len());
    for (link, (stamps, values)) in order.into_iter().zip(rows) {
        let start = stamps[0];
        let bin_minutes = if stamps.len() >= 2 {
            let d = (stamps[1] - stamps[0]).num_minutes();
            if d <= 0 {
                return Err(Error::Parse(format!("series for {link}: non-increasing timestamps")));
            }
            d as u32
        } else {
            60
        };
        for (i, ts) in stamps.iter().enumerate() {
            let expected = start + Duration::minutes(bin_minutes as i64 * i as i64);
            if *ts != expected {
                return Err(Error::Parse(format!(
                    "series for {link}: gap or irregular bin at {ts} (expected {expected})"
                )));
            }
        }
        out.push(SpeedSeries::new(link, start, bin_minutes, values)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> NaiveDateTime {
        parse_timestamp("2024-01-01T00:00:00").unwrap()
    }

    #[test]
    fn rejects_non_positive_speeds() {
        let err = SpeedSeries::new("L", start(), 60, vec![50.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn timestamps_step_by_bin_duration() {
        let s = SpeedSeries::new("L", start(), 60, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.timestamp(2).format(TIMESTAMP_FORMAT).to_string(), "2024-01-01T02:00:00");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = std::env::temp_dir().join(format!("linkcast-series-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("series.csv");
        let series = vec![
            SpeedSeries::new("A", start(), 60, vec![60.0, 61.5, 0.1 + 0.2]).unwrap(),
            SpeedSeries::new("B", start(), 60, vec![30.25, 29.75]).unwrap(),
        ];
        write_series_csv(&path, &series).unwrap();
        let back = read_series_csv(&path).unwrap();
        assert_eq!(series, back);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn read_rejects_gaps() {
        let dir = std::env::temp_dir().join(format!("linkcast-gap-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("gap.csv");
        std::fs::write(
            &path,
            "link_id,timestamp,speed_kph\nA,2024-01-01T00:00:00,60\nA,2024-01-01T02:00:00,61\nA,2024-01-01T03:00:00,62\n",
        )
        .unwrap();
        assert!(matches!(read_series_csv(&path), Err(Error::Parse(_))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
