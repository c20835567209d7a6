//! Run configuration: a sectioned TOML file mapping onto the experiment
//! pipeline. Every field has a documented default except the seed list,
//! which must be explicit (runs are never seeded from the clock).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::{default_model_rows, ExperimentConfig, NnSettings, SplitFractions};
use crate::model::ModelSpec;
use crate::network::RoadNetwork;
use crate::sarima::{default_daily_profile, SarimaConfig};
use crate::series::parse_timestamp;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// Master seeds; required (either here or via --seed).
    pub seeds: Option<Vec<u64>>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub sarima: SarimaSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub nn: NnSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// CSV of link_id,from_node,to_node; the built-in 4x4 grid if absent.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SarimaSection {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub season_len: usize,
    pub diff: usize,
    pub seasonal_diff: usize,
    pub mean_kph: f64,
    pub shock_sd_kph: f64,
    pub clamp_min_kph: f64,
    pub clamp_max_kph: f64,
    /// Add the built-in daily mean profile to the generator.
    pub daily_profile: bool,
    /// Explicit per-bin profile override (length = season_len).
    pub seasonal_profile: Option<Vec<f64>>,
}

impl Default for SarimaSection {
    fn default() -> Self {
        let d = SarimaConfig::default_with_seed(0);
        SarimaSection {
            ar: d.ar,
            ma: d.ma,
            seasonal_ar: d.seasonal_ar,
            seasonal_ma: d.seasonal_ma,
            season_len: d.season_len,
            diff: d.diff,
            seasonal_diff: d.seasonal_diff,
            mean_kph: d.mean,
            shock_sd_kph: d.shock_sd,
            clamp_min_kph: d.clamp_min,
            clamp_max_kph: d.clamp_max,
            daily_profile: true,
            seasonal_profile: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub bins: usize,
    pub bin_minutes: u32,
    pub start: String,
    pub speed_sd_kph: f64,
    pub scenarios: Vec<f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            bins: 90 * 24,
            bin_minutes: 60,
            start: "2024-01-01T00:00:00".to_string(),
            speed_sd_kph: 10.0,
            scenarios: vec![30.0, 130.0, 230.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let d = SplitFractions::default();
        SplitSection { train: d.train, validation: d.validation, test: d.test }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    /// Report rows: family codes, NN, MLR, ADAPTIVE.
    pub list: Vec<String>,
    /// Season length for the smoothing families.
    pub season_len: usize,
    pub horizon: usize,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection { list: default_model_rows(), season_len: 24, horizon: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnSection {
    pub hidden_units: Vec<usize>,
    pub weight_decay: Vec<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for NnSection {
    fn default() -> Self {
        let d = NnSettings::default();
        NnSection {
            hidden_units: d.hidden_units,
            weight_decay: d.weight_decay,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
        }
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    /// Load a TOML config file, apply overrides, validate.
    /// `seed_override` replaces the seed list; the config directory anchors
    /// relative network paths.
    pub fn load(
        path: Option<&Path>,
        seed_override: Option<u64>,
        out_dir_override: Option<&Path>,
    ) -> Result<RunConfig> {
        let (file, base_dir): (RunConfigFile, PathBuf) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let file =
                    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                (file, p.parent().unwrap_or_else(|| Path::new(".")).to_path_buf())
            }
            None => (RunConfigFile::default(), PathBuf::from(".")),
        };
        RunConfig::resolve(file, base_dir, seed_override, out_dir_override)
    }

    pub fn resolve(
        file: RunConfigFile,
        base_dir: PathBuf,
        seed_override: Option<u64>,
        out_dir_override: Option<&Path>,
    ) -> Result<RunConfig> {
        let seeds = match (seed_override, file.seeds) {
            (Some(s), _) => vec![s],
            (None, Some(s)) if !s.is_empty() => s,
            _ => {
                return Err(Error::Config(
                    "no seed given: set `seeds = [...]` in the config or pass --seed (runs are never seeded from the clock)".into(),
                ))
            }
        };

        let network = match &file.network.file {
            Some(p) => {
                let p = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                RoadNetwork::read_csv(&p)?
            }
            None => RoadNetwork::grid4x4(),
        };

        let s = &file.sarima;
        let seasonal_profile = match (&s.seasonal_profile, s.daily_profile) {
            (Some(profile), _) => Some(profile.clone()),
            (None, true) => Some(default_daily_profile(s.season_len)),
            (None, false) => None,
        };
        let sarima = SarimaConfig {
            ar: s.ar.clone(),
            ma: s.ma.clone(),
            seasonal_ar: s.seasonal_ar.clone(),
            seasonal_ma: s.seasonal_ma.clone(),
            season_len: s.season_len,
            diff: s.diff,
            seasonal_diff: s.seasonal_diff,
            mean: s.mean_kph,
            shock_sd: s.shock_sd_kph,
            clamp_min: s.clamp_min_kph,
            clamp_max: s.clamp_max_kph,
            seed: seeds[0],
            seasonal_profile,
        };
        crate::sarima::SarimaProcess::new(sarima.clone())?;

        for code in &file.models.list {
            if code != "NN" && code != "MLR" {
                crate::model::ModelFamily::parse(code)
                    .map_err(|e| Error::Config(format!("models.list entry {code:?}: {e}")))?;
            }
        }

        let split = SplitFractions {
            train: file.split.train,
            validation: file.split.validation,
            test: file.split.test,
        };
        split.validate()?;

        let experiment = ExperimentConfig {
            network,
            sarima,
            scenarios: file.sim.scenarios.clone(),
            bins: file.sim.bins,
            speed_sd: file.sim.speed_sd_kph,
            start: parse_timestamp(&file.sim.start)
                .map_err(|e| Error::Config(format!("sim.start: {e}")))?,
            bin_minutes: file.sim.bin_minutes,
            models: file.models.list.clone(),
            split,
            season_len: file.models.season_len,
            horizon: file.models.horizon,
            nn: NnSettings {
                hidden_units: file.nn.hidden_units.clone(),
                weight_decay: file.nn.weight_decay.clone(),
                learning_rate: file.nn.learning_rate,
                epochs: file.nn.epochs,
            },
            seeds: seeds.clone(),
        };

        let out_dir = out_dir_override
            .map(Path::to_path_buf)
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("out"));

        Ok(RunConfig { seeds, out_dir, experiment })
    }

    /// Parse a model spec string with this config's season/horizon defaults
    /// applied when the string omits them.
    pub fn parse_model(&self, text: &str) -> Result<ModelSpec> {
        let has_s = text.contains("s=");
        let has_h = text.contains("h=");
        let mut text = text.trim().to_string();
        if !matches!(text.as_str(), "NN" | "MLR")
            && !text.to_ascii_uppercase().starts_with("ADAPTIVE")
        {
            if !has_s {
                text.push_str(&format!(
                    "{}s={}",
                    if text.contains(':') { "," } else { ":" },
                    self.experiment.season_len
                ));
            }
            if !has_h {
                text.push_str(&format!(
                    "{}h={}",
                    if text.contains(':') { "," } else { ":" },
                    self.experiment.horizon
                ));
            }
        }
        ModelSpec::parse(&text)
    }
}
