//! Multi-agent trajectory simulation and per-link observation aggregation.
//!
//! Agents random-walk the network one link per bin. Per-bin per-link
//! occupancy is pinned to `trajectory_count` by moving survivors first and
//! then spawning or retiring agents, so the inverse-proportionality
//! constraint holds exactly while the walks stay random.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDateTime;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::network::RoadNetwork;
use crate::rng::derive_rng;
use crate::series::{parse_timestamp, SpeedSeries, TIMESTAMP_FORMAT};

/// Number of trajectories a link attracts at a given speed: round(K / speed).
/// Inversely proportional to speed; congested links log more trajectories.
pub fn trajectory_count(link_speed: f64, calibration: f64) -> Result<usize> {
    if !(link_speed > 0.0) {
        return Err(Error::Input(format!("link speed must be positive, got {link_speed}")));
    }
    if !(calibration > 0.0) {
        return Err(Error::Input(format!("calibration must be positive, got {calibration}")));
    }
    Ok((calibration / link_speed).round() as usize)
}

/// Find K such that the mean of round(K / speed) over all (link, bin) cells
/// is within +-2% of `target_average`. Closed-form seed from the harmonic
/// mean, then monotone bisection on the step function if needed.
pub fn calibrate_k(ground_truth: &[SpeedSeries], target_average: f64) -> Result<f64> {
    if !(target_average > 0.0) {
        return Err(Error::Input("target average must be positive".into()));
    }
    let cells: usize = ground_truth.iter().map(|s| s.len()).sum();
    if cells == 0 {
        return Err(Error::Input("cannot calibrate on an empty network".into()));
    }
    let achieved = |k: f64| -> f64 {
        let total: f64 = ground_truth
            .iter()
            .flat_map(|s| s.values.iter())
            .map(|&v| (k / v).round())
            .sum();
        total / cells as f64
    };
    let tolerance = 0.02 * target_average;
    let inv_mean: f64 =
        ground_truth.iter().flat_map(|s| s.values.iter()).map(|&v| 1.0 / v).sum::<f64>() / cells as f64;
    let mut k = target_average / inv_mean;
    if (achieved(k) - target_average).abs() <= tolerance {
        return Ok(k);
    }
    let (mut lo, mut hi) = (0.0, k);
    while achieved(hi) < target_average {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Input("calibration target unattainable".into()));
        }
    }
    for _ in 0..200 {
        k = 0.5 * (lo + hi);
        let m = achieved(k);
        if (m - target_average).abs() <= tolerance {
            return Ok(k);
        }
        if m < target_average {
            lo = k;
        } else {
            hi = k;
        }
    }
    Err(Error::Input(format!(
        "calibration did not reach +-2% of {target_average}; the count step function has no admissible K"
    )))
}

/// One logged trajectory speed: a normal draw centred on the link speed,
/// truncated below at 1 km/h.
pub fn sample_trajectory_speed<R: Rng>(link_speed: f64, sd: f64, rng: &mut R) -> f64 {
    debug_assert!(link_speed > 0.0 && sd >= 0.0);
    let draw = if sd > 0.0 {
        link_speed + Normal::new(0.0, sd).expect("valid sd").sample(rng)
    } else {
        link_speed
    };
    draw.max(1.0)
}

/// A simulation scenario: target trajectory density over a network with
/// known per-link ground truth.
pub struct SimScenario<'a> {
    pub network: &'a RoadNetwork,
    /// Ground-truth series aligned with `network.links()`.
    pub ground_truth: &'a [SpeedSeries],
    /// Target average trajectories per link per bin.
    pub target_average: f64,
    /// Speed-draw standard deviation, km/h.
    pub speed_sd: f64,
    pub bins: usize,
    pub seed: u64,
}

impl SimScenario<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.target_average > 0.0) {
            return Err(Error::Input("target average must be positive".into()));
        }
        if !(self.speed_sd >= 0.0) {
            return Err(Error::Input("speed sd must be non-negative".into()));
        }
        if self.bins == 0 {
            return Err(Error::Input("scenario needs at least one bin".into()));
        }
        if self.ground_truth.len() != self.network.link_count() {
            return Err(Error::Input(format!(
                "ground truth covers {} links but the network has {}",
                self.ground_truth.len(),
                self.network.link_count()
            )));
        }
        for s in self.ground_truth {
            if s.len() < self.bins {
                return Err(Error::Input(format!(
                    "ground truth for {} has {} bins, scenario needs {}",
                    s.link_id,
                    s.len(),
                    self.bins
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub trajectory_id: u64,
    pub link: u32,
    pub bin: u32,
    pub speed: f64,
}

/// Simulated log plus the link-id/timestamp context needed to render it.
#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub link_ids: Vec<String>,
    pub start: NaiveDateTime,
    pub bin_minutes: u32,
    pub bins: usize,
    pub records: Vec<TrajectoryRecord>,
    pub calibration: f64,
}

impl TrajectoryLog {
    /// Mean records per (link, bin) cell.
    pub fn mean_records_per_link_bin(&self) -> f64 {
        self.records.len() as f64 / (self.link_ids.len() * self.bins) as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("trajectory_id,link_id,timestamp,speed_kph\n");
        for r in &self.records {
            let ts = self.start
                + chrono::Duration::minutes(self.bin_minutes as i64 * r.bin as i64);
            writeln!(
                out,
                "{},{},{},{}",
                r.trajectory_id,
                self.link_ids[r.link as usize],
                ts.format(TIMESTAMP_FORMAT),
                r.speed
            )
            .expect("writing to string cannot fail");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, network: &RoadNetwork) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        match lines.next() {
            Some("trajectory_id,link_id,timestamp,speed_kph") => {}
            other => {
                return Err(Error::Parse(format!(
                    "{}: expected trajectory log header, got {other:?}",
                    path.display()
                )))
            }
        }
        let link_ids: Vec<String> = network.links().iter().map(|l| l.id.clone()).collect();
        let mut records = Vec::new();
        let mut start: Option<NaiveDateTime> = None;
        let mut max_ts: Option<NaiveDateTime> = None;
        let mut stamps: Vec<NaiveDateTime> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("{}:{}: malformed row", path.display(), lineno + 2)));
            }
            let trajectory_id: u64 = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("{}:{}: trajectory id: {e}", path.display(), lineno + 2)))?;
            let link = network
                .link_index(fields[1])
                .ok_or_else(|| Error::Parse(format!("unknown link {:?} in log", fields[1])))?
                as u32;
            let ts = parse_timestamp(fields[2])?;
            let speed: f64 = fields[3]
                .parse()
                .map_err(|e| Error::Parse(format!("{}:{}: speed: {e}", path.display(), lineno + 2)))?;
            start = Some(start.map_or(ts, |s| s.min(ts)));
            max_ts = Some(max_ts.map_or(ts, |m| m.max(ts)));
            stamps.push(ts);
            records.push(TrajectoryRecord { trajectory_id, link, bin: 0, speed });
        }
        let start = start.ok_or_else(|| Error::Parse("empty trajectory log".into()))?;
        // infer bin duration from the smallest positive timestamp gap
        let mut sorted = stamps.clone();
        sorted.sort();
        sorted.dedup();
        let bin_minutes = sorted
            .windows(2)
            .map(|w| (w[1] - w[0]).num_minutes())
            .filter(|&d| d > 0)
            .min()
            .unwrap_or(60) as u32;
        for (r, ts) in records.iter_mut().zip(&stamps) {
            r.bin = ((*ts - start).num_minutes() / bin_minutes as i64) as u32;
        }
        let bins = ((max_ts.unwrap() - start).num_minutes() / bin_minutes as i64) as usize + 1;
        Ok(TrajectoryLog { link_ids, start, bin_minutes, bins, records, calibration: f64::NAN })
    }
}

/// Run the agent walk. Per bin: survivors move to a uniformly random
/// successor link, then each link is topped up or trimmed to its target
/// count, then every agent logs one speed record. Fully deterministic
/// per seed.
pub fn simulate_trajectories(scenario: &SimScenario) -> Result<TrajectoryLog> {
    scenario.validate()?;
    let net = scenario.network;
    let gt = scenario.ground_truth;
    let k = calibrate_k(gt, scenario.target_average)?;
    let mut rng = derive_rng(scenario.seed, "traffic-sim", &[]);

    let n_links = net.link_count();
    let mut occupants: Vec<Vec<u64>> = vec![Vec::new(); n_links];
    let mut next_id: u64 = 0;
    let estimated = (scenario.target_average * n_links as f64 * scenario.bins as f64) as usize;
    let mut records = Vec::with_capacity(estimated + estimated / 8);

    for bin in 0..scenario.bins {
        if bin > 0 {
            let mut moved: Vec<Vec<u64>> = vec![Vec::new(); n_links];
            for link in 0..n_links {
                for agent in std::mem::take(&mut occupants[link]) {
                    let succ = net.successors(link);
                    if succ.is_empty() {
                        continue; // dead end: the agent retires
                    }
                    let next = succ[rng.random_range(0..succ.len())];
                    moved[next].push(agent);
                }
            }
            occupants = moved;
        }
        for link in 0..n_links {
            let target = trajectory_count(gt[link].values[bin], k)?;
            while occupants[link].len() > target {
                occupants[link].pop(); // retire youngest first
            }
            while occupants[link].len() < target {
                occupants[link].push(next_id);
                next_id += 1;
            }
            let speed_now = gt[link].values[bin];
            for &agent in &occupants[link] {
                let speed = sample_trajectory_speed(speed_now, scenario.speed_sd, &mut rng);
                records.push(TrajectoryRecord {
                    trajectory_id: agent,
                    link: link as u32,
                    bin: bin as u32,
                    speed,
                });
            }
        }
    }

    Ok(TrajectoryLog {
        link_ids: net.links().iter().map(|l| l.id.clone()).collect(),
        start: gt[0].start,
        bin_minutes: gt[0].bin_minutes,
        bins: scenario.bins,
        records,
        calibration: k,
    })
}

/// Per-link observed series from a trajectory log.
#[derive(Debug, Clone)]
pub struct ObservedSpeeds {
    /// One entry per network link; `None` for links excluded because no
    /// trajectory ever touched them.
    pub series: Vec<Option<SpeedSeries>>,
    pub excluded: Vec<String>,
}

impl ObservedSpeeds {
    pub fn included(&self) -> impl Iterator<Item = (usize, &SpeedSeries)> {
        self.series.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|s| (i, s)))
    }
}

/// Observed speed per (link, bin) is the mean of logged speeds in the bin.
/// Empty bins carry the last observation forward; leading empty bins are
/// back-filled with the first non-empty bin's mean. Links with no records
/// at all are flagged and excluded.
pub fn aggregate_observed_speeds(
    log: &TrajectoryLog,
    network: &RoadNetwork,
    bins: usize,
) -> Result<ObservedSpeeds> {
    let n_links = network.link_count();
    if log.link_ids.len() != n_links {
        return Err(Error::Input("trajectory log does not match the network".into()));
    }
    let mut sums = vec![vec![0.0f64; bins]; n_links];
    let mut counts = vec![vec![0u32; bins]; n_links];
    for r in &log.records {
        let (l, b) = (r.link as usize, r.bin as usize);
        if b >= bins {
            continue;
        }
        sums[l][b] += r.speed;
        counts[l][b] += 1;
    }
    let mut series = Vec::with_capacity(n_links);
    let mut excluded = Vec::new();
    for l in 0..n_links {
        let first_filled = (0..bins).find(|&b| counts[l][b] > 0);
        let Some(first) = first_filled else {
            excluded.push(log.link_ids[l].clone());
            series.push(None);
            continue;
        };
        let mut values = vec![0.0; bins];
        let mut last = sums[l][first] / counts[l][first] as f64;
        for b in 0..bins {
            if counts[l][b] > 0 {
                last = sums[l][b] / counts[l][b] as f64;
            }
            values[b] = last;
        }
        series.push(Some(SpeedSeries::new(
            log.link_ids[l].clone(),
            log.start,
            log.bin_minutes,
            values,
        )?));
    }
    Ok(ObservedSpeeds { series, excluded })
}
