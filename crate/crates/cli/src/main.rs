//! linkcast: simulate GPS-style trajectory traffic on a road network and
//! benchmark short-term link-speed forecasters against it.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use linkcast_core::config::RunConfig;
use linkcast_core::error::{Error, Result};
use linkcast_core::eval::{
    grid_search, read_track_csv, rmse, run_experiment, single_model_track, write_best_params_csv,
    write_grid_csv, write_rmse_table_csv, write_track_csv, ExperimentReport,
};
use linkcast_core::model::ModelFamily;
use linkcast_core::plot::{line_plot_svg, PlotSeries};
use linkcast_core::series::{write_series_csv, SpeedSeries};
use linkcast_core::sim::{aggregate_observed_speeds, simulate_trajectories, SimScenario};

#[derive(Parser)]
#[command(
    name = "linkcast",
    about = "Traffic trajectory simulation and short-term link-speed forecasting benchmark",
    version
)]
struct Cli {
    /// TOML run configuration; built-in defaults if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the seed list with a single master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: config `out_dir` or ./out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truth speeds and simulate trajectory logs.
    Simulate,
    /// Forecast one link with one model and emit a track CSV plus SVG plot.
    Forecast {
        /// Model spec, e.g. ASNT:alpha=0.5,gamma=0.1 or ADAPTIVE:beta=0.2 or MLR.
        #[arg(long)]
        model: String,
        #[arg(long)]
        link: String,
    },
    /// Exhaustive parameter grid for one family on one link.
    Gridsearch {
        /// Family code: NSNT..MSMT or ADAPTIVE.
        #[arg(long)]
        family: String,
        /// Link id (default: the first link).
        #[arg(long)]
        link: Option<String>,
    },
    /// Run the full multi-scenario experiment and write the report tables.
    Evaluate,
    /// Re-plot a forecast track CSV as an SVG.
    Plot {
        #[arg(long)]
        track: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

fn main() {
    // die quietly when a pipe downstream closes early (e.g. `| head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    // re-rendering a track is a pure file transform and needs no config
    if let Command::Plot { track, out, title } = &cli.command {
        return cmd_plot(track, out.as_deref(), title.as_deref());
    }
    let cfg = RunConfig::load(cli.config.as_deref(), cli.seed, cli.out_dir.as_deref())?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Forecast { model, link } => cmd_forecast(&cfg, &model, &link),
        Command::Gridsearch { family, link } => cmd_gridsearch(&cfg, &family, link.as_deref()),
        Command::Evaluate => cmd_evaluate(&cfg),
        Command::Plot { .. } => unreachable!("handled above"),
    }
}

fn scenario_tag(target: f64) -> String {
    if target.fract() == 0.0 {
        format!("{}", target as i64)
    } else {
        format!("{target}")
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let exp = &cfg.experiment;
    let seed = cfg.seeds[0];
    let gt = linkcast_core::eval::generate_ground_truth(exp, seed)?;
    let gt_path = cfg.out_dir.join("ground_truth.csv");
    write_series_csv(&gt_path, &gt)?;
    println!("wrote {}", gt_path.display());

    for (idx, &target) in exp.scenarios.iter().enumerate() {
        let scenario = SimScenario {
            network: &exp.network,
            ground_truth: &gt,
            target_average: target,
            speed_sd: exp.speed_sd,
            bins: exp.bins,
            seed: seed ^ linkcast_core::rng::fnv1a64(format!("scenario-{idx}").as_bytes()),
        };
        let log = simulate_trajectories(&scenario)?;
        let path = cfg.out_dir.join(format!("trajectories_ave{}.csv", scenario_tag(target)));
        log.write_csv(&path)?;
        println!(
            "wrote {} ({} records, K={:.1}, achieved mean {:.2} per link-bin)",
            path.display(),
            log.records.len(),
            log.calibration,
            log.mean_records_per_link_bin()
        );
        println!("per-link achieved averages (ave={}):", scenario_tag(target));
        let bins = exp.bins as f64;
        let mut counts = vec![0usize; exp.network.link_count()];
        for r in &log.records {
            counts[r.link as usize] += 1;
        }
        for (link, n) in exp.network.links().iter().zip(&counts) {
            println!("  {:8} {:8.2}", link.id, *n as f64 / bins);
        }
    }
    Ok(())
}

/// Observed series for the first scenario, as the forecasters see them.
fn observed_base_scenario(cfg: &RunConfig) -> Result<Vec<Option<SpeedSeries>>> {
    let exp = &cfg.experiment;
    let seed = cfg.seeds[0];
    let gt = linkcast_core::eval::generate_ground_truth(exp, seed)?;
    let target = *exp
        .scenarios
        .first()
        .ok_or_else(|| Error::Config("no scenarios configured".into()))?;
    let scenario = SimScenario {
        network: &exp.network,
        ground_truth: &gt,
        target_average: target,
        speed_sd: exp.speed_sd,
        bins: exp.bins,
        seed: seed ^ linkcast_core::rng::fnv1a64("scenario-0".as_bytes()),
    };
    let log = simulate_trajectories(&scenario)?;
    Ok(aggregate_observed_speeds(&log, &exp.network, exp.bins)?.series)
}

fn cmd_forecast(cfg: &RunConfig, model_text: &str, link: &str) -> Result<()> {
    let exp = &cfg.experiment;
    let model = cfg.parse_model(model_text)?;
    let link_idx = exp
        .network
        .link_index(link)
        .ok_or_else(|| Error::Input(format!("unknown link {link:?}")))?;
    let observed = observed_base_scenario(cfg)?;
    let series = observed[link_idx]
        .as_ref()
        .ok_or_else(|| Error::Input(format!("link {link:?} saw no trajectories")))?;

    let track = single_model_track(&model, series, exp.split, &exp.nn, cfg.seeds[0])?;
    let code = model.code();
    let csv_path = cfg.out_dir.join(format!("forecast_{code}_{link}.csv"));
    write_track_csv(&csv_path, series, &track)?;

    let actual: Vec<f64> = track.iter().map(|&(_, a, _)| a).collect();
    let forecast: Vec<f64> = track.iter().map(|&(_, _, f)| f).collect();
    let score = rmse(&forecast, &actual)?;
    let svg_path = cfg.out_dir.join(format!("forecast_{code}_{link}.svg"));
    line_plot_svg(
        &svg_path,
        &format!("{code} forecast, link {link} (test window)"),
        "bin",
        "speed (km/h)",
        track[0].0 as f64,
        1.0,
        &[
            PlotSeries { label: "actual", values: &actual, color: "#1f77b4" },
            PlotSeries { label: "forecast", values: &forecast, color: "#d62728" },
        ],
    )?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    println!("{code} link {link}: test RMSE {score:.4} over {} bins", track.len());
    Ok(())
}

fn cmd_gridsearch(cfg: &RunConfig, family_code: &str, link: Option<&str>) -> Result<()> {
    let exp = &cfg.experiment;
    let family = ModelFamily::parse(family_code)?;
    let observed = observed_base_scenario(cfg)?;
    let link_idx = match link {
        Some(l) => exp
            .network
            .link_index(l)
            .ok_or_else(|| Error::Input(format!("unknown link {l:?}")))?,
        None => 0,
    };
    let link_id = &exp.network.links()[link_idx].id;
    let series = observed[link_idx]
        .as_ref()
        .ok_or_else(|| Error::Input(format!("link {link_id:?} saw no trajectories")))?;
    let (train_end, val_end) = exp.split.indices(exp.bins);
    let result = grid_search(
        &family,
        &series.values[..train_end],
        &series.values[train_end..val_end],
        exp.season_len,
        exp.horizon,
    )?;
    let path = cfg.out_dir.join(format!("grid_{}_{link_id}.csv", family.code()));
    write_grid_csv(&path, &result)?;
    println!("wrote {} ({} grid points)", path.display(), result.table.len());
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into());
    println!(
        "best {}: alpha={} beta={} gamma={} (validation RMSE {:.4} on link {link_id})",
        family.code(),
        fmt(result.best.alpha),
        fmt(result.best.beta),
        fmt(result.best.gamma),
        result.best_rmse
    );
    Ok(())
}

fn write_report_files(out_dir: &Path, report: &ExperimentReport) -> Result<()> {
    let mean = report.mean_rmse();
    let report_path = out_dir.join("rmse_report.csv");
    write_rmse_table_csv(
        &report_path,
        &report.model_codes,
        &report.scenario_targets,
        &mean,
        &report.config_hash,
        &report.seeds,
    )?;
    println!("wrote {}", report_path.display());
    for sr in &report.seed_reports {
        let path = out_dir.join(format!("rmse_report_seed{}.csv", sr.seed));
        write_rmse_table_csv(
            &path,
            &report.model_codes,
            &report.scenario_targets,
            &sr.rmse,
            &report.config_hash,
            &[sr.seed],
        )?;
        let p3 = out_dir.join(format!("best_params_seed{}.csv", sr.seed));
        write_best_params_csv(&p3, &sr.best_params)?;
    }
    if let Some(first) = report.seed_reports.first() {
        let best_path = out_dir.join("best_params.csv");
        write_best_params_csv(&best_path, &first.best_params)?;
        println!("wrote {}", best_path.display());
    }
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let report = run_experiment(&cfg.experiment)?;
    write_report_files(&cfg.out_dir, &report)?;
    let mean = report.mean_rmse();
    println!("\nmean test RMSE over links and seeds (config {}):", report.config_hash);
    let cols: Vec<String> = report
        .scenario_targets
        .iter()
        .map(|t| format!("ave_{}", scenario_tag(*t)))
        .collect();
    println!("{:10} {}", "model", cols.join("  "));
    for (code, row) in report.model_codes.iter().zip(&mean) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:7.3}")).collect();
        println!("{code:10} {}", cells.join("  "));
    }
    for sr in &report.seed_reports {
        if !sr.excluded_links.is_empty() {
            println!("seed {}: excluded links with no trajectories: {:?}", sr.seed, sr.excluded_links);
        }
    }
    Ok(())
}

fn cmd_plot(track_path: &Path, out: Option<&Path>, title: Option<&str>) -> Result<()> {
    let rows = read_track_csv(track_path)?;
    if rows.is_empty() {
        return Err(Error::Input(format!("{} has no data rows", track_path.display())));
    }
    let actual: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let forecast: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| track_path.with_extension("svg"));
    let title = title.unwrap_or("forecast track");
    line_plot_svg(
        &out_path,
        title,
        "bin",
        "speed (km/h)",
        0.0,
        1.0,
        &[
            PlotSeries { label: "actual", values: &actual, color: "#1f77b4" },
            PlotSeries { label: "forecast", values: &forecast, color: "#d62728" },
        ],
    )?;
    println!("wrote {}", out_path.display());
    Ok(())
}
