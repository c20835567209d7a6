//! Acceptance criterion 9: `evaluate` run twice with one master seed
//! produces byte-identical report CSVs.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_linkcast")
}

fn write_small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        r#"
seeds = [11, 12]

[sim]
bins = 240
bin_minutes = 60
start = "2024-01-01T00:00:00"
speed_sd_kph = 10.0
scenarios = [20.0, 45.0]

[models]
list = ["NSNT", "ASNT", "MSNT", "ADAPTIVE", "MLR", "NN"]
season_len = 24
horizon = 1

[nn]
hidden_units = [3]
weight_decay = [0.001]
learning_rate = 0.01
epochs = 30
"#,
    )
    .unwrap();
    path
}

#[test]
fn acceptance_9_evaluate_is_byte_reproducible() {
    let dir = std::env::temp_dir().join(format!("linkcast-acc9-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = write_small_config(&dir);
    let out_a = dir.join("run_a");
    let out_b = dir.join("run_b");
    for out in [&out_a, &out_b] {
        let status = Command::new(bin())
            .args(["--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "evaluate"])
            .status()
            .expect("spawn linkcast");
        assert!(status.success(), "evaluate failed");
    }
    let mut compared = 0;
    for name in [
        "rmse_report.csv",
        "best_params.csv",
        "rmse_report_seed11.csv",
        "rmse_report_seed12.csv",
        "best_params_seed11.csv",
        "best_params_seed12.csv",
    ] {
        let a = std::fs::read(out_a.join(name)).unwrap_or_else(|_| panic!("missing {name}"));
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        compared += 1;
    }
    assert_eq!(compared, 6);
    std::fs::remove_dir_all(&dir).ok();
    println!("ACCEPTANCE 9 (evaluate twice with one master seed: byte-identical report CSVs): PASS");
}
