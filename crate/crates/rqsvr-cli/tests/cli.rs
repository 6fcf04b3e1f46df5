//! Command-level behavior: determinism, config merging, plot emission,
//! and the shot-noise study's statistical properties.

use std::path::Path;
use std::process::Command;

fn rqsvr(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rqsvr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) {
    let out = rqsvr(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("file exists")).expect("valid json")
}

/// Small trained model shared by the heavier tests.
fn prepare_model(d: &Path) {
    run_ok(
        d,
        &[
            "synth", "--out", "data.csv", "--seed", "11", "--tools", "2", "--wear-levels", "2",
            "--speed-step", "100",
        ],
    );
    run_ok(
        d,
        &[
            "fit-features", "--data", "data.csv", "--out", "params.json", "--seed", "11",
            "--patience", "6", "--max-trials", "12",
        ],
    );
    run_ok(
        d,
        &["train", "--data", "data.csv", "--features", "params.json", "--out", "model.json", "--seed", "11"],
    );
}

#[test]
fn synth_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--out", "a.csv", "--seed", "1"]);
    run_ok(d, &["synth", "--out", "b.csv", "--seed", "1"]);
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());

    run_ok(d, &["synth", "--out", "c.csv", "--seed", "2"]);
    assert_ne!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("c.csv")).unwrap());
}

#[test]
fn synth_default_has_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--out", "data.csv", "--seed", "3"]);
    let text = std::fs::read_to_string(d.join("data.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 81 * 5 * 3);
    let report = read_json(&d.join("data.report.json"));
    assert_eq!(report["metrics"]["rows"], 81 * 5 * 3);
}

#[test]
fn noiseless_synth_matches_reported_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(
        d,
        &[
            "synth", "--out", "clean.csv", "--seed", "4", "--noise-std", "0", "--no-clip",
            "--tools", "1", "--wear-levels", "3", "--speed-step", "200",
        ],
    );
    let report = read_json(&d.join("clean.report.json"));
    let gt: rqsvr::features::FeatureParams =
        serde_json::from_value(report["metrics"]["ground_truth"].clone()).unwrap();
    let data = rqsvr::data::load_csv(&d.join("clean.csv")).unwrap();
    let mse = rqsvr::features::model_mse(&gt, &data.points()).unwrap();
    // Zero up to the 9-significant-digit serialization of the targets.
    assert!(mse < 1e-14, "generator mse {mse}");
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("conf.json"), r#"{"shots": 77, "epsilon": 0.25, "k": 4}"#).unwrap();
    prepare_model(d);
    run_ok(
        d,
        &[
            "predict", "--model", "model.json", "--data", "data.csv", "--out", "p.csv",
            "--config", "conf.json", "--shots", "55", "--seed", "11",
        ],
    );
    let report = read_json(&d.join("p.report.json"));
    // Flag wins over file; file wins over default.
    assert_eq!(report["config"]["shots"], 55);
    assert_eq!(report["config"]["epsilon"], 0.25);
    assert_eq!(report["config"]["k"], 4);
    assert_eq!(report["config"]["patience"], 1000);

    let out = rqsvr(d, &["predict", "--model", "model.json", "--data", "data.csv", "--out", "q.csv", "--config", "nope.json"]);
    assert!(!out.status.success());

    std::fs::write(d.join("bad.json"), r#"{"shotz": 1}"#).unwrap();
    let out = rqsvr(d, &["predict", "--model", "model.json", "--data", "data.csv", "--out", "q.csv", "--config", "bad.json"]);
    assert!(!out.status.success(), "unknown config keys must be rejected");
}

#[test]
fn train_report_is_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare_model(d);

    // Hyperparameter defaults.
    let report = read_json(&d.join("model.report.json"));
    assert_eq!(report["metrics"]["c"], 1.0);
    assert_eq!(report["metrics"]["epsilon"], 0.1);

    // The reported training MSE is recomputable from the emitted artifacts.
    let model =
        rqsvr::circuit::RqsvrModel::from_json(&std::fs::read_to_string(d.join("model.json")).unwrap())
            .unwrap();
    let data = rqsvr::data::drop_stable(&rqsvr::data::load_csv(&d.join("data.csv")).unwrap(), 5.44);
    let mut mse = 0.0;
    for (x, y) in data.points() {
        let p = model.predict(x, rqsvr::circuit::EstimateMode::Exact).unwrap();
        mse += (p.value - y).powi(2) / data.len() as f64;
    }
    let reported = report["metrics"]["training_mse"].as_f64().unwrap();
    assert!((mse - reported).abs() <= 1e-12, "recomputed {mse} vs reported {reported}");
}

#[test]
fn predict_exact_rows_and_classify_column() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare_model(d);
    run_ok(
        d,
        &[
            "predict", "--model", "model.json", "--data", "data.csv", "--out", "p.csv", "--seed",
            "11", "--mode", "exact", "--classify",
        ],
    );
    // Output rows = input rows surviving the stability filter.
    let unstable_rows = std::fs::read_to_string(d.join("data.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",false"))
        .count();
    let text = std::fs::read_to_string(d.join("p.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "machine,tool,spindle_speed_rpm,wear_cm2,ae_lim_mm,predicted_mm,stderr_mm,sign"
    );
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), unstable_rows);
    for line in &body {
        let sign = line.rsplit(',').next().unwrap();
        assert!(sign == "+1" || sign == "-1");
        let stderr: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
        assert_eq!(stderr, 0.0, "exact mode reports zero standard error");
    }
}

#[test]
fn export_plot_schema_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare_model(d);
    run_ok(
        d,
        &[
            "predict", "--model", "model.json", "--data", "data.csv", "--out", "p.csv", "--seed",
            "11", "--mode", "exact",
        ],
    );
    run_ok(d, &["export-plot", "--input", "p.csv", "--out", "plot.csv"]);

    let pred_text = std::fs::read_to_string(d.join("p.csv")).unwrap();
    let plot_text = std::fs::read_to_string(d.join("plot.csv")).unwrap();
    let mut plot_lines = plot_text.lines();
    assert_eq!(plot_lines.next().unwrap(), "series,spindle_speed_rpm,wear_cm2,value,std");
    let plot_rows: Vec<&str> = plot_lines.collect();
    let pred_rows: Vec<&str> = pred_text.lines().skip(1).collect();
    assert_eq!(plot_rows.len(), 2 * pred_rows.len());

    // Values survive the re-emission exactly: predictions are written with
    // shortest-round-trip formatting in both files.
    let first_pred: Vec<&str> = pred_rows[0].split(',').collect();
    let actual_row: Vec<&str> = plot_rows[0].split(',').collect();
    let predicted_row: Vec<&str> = plot_rows[1].split(',').collect();
    assert_eq!(actual_row[0], "actual");
    assert_eq!(predicted_row[0], "predicted");
    assert_eq!(actual_row[3].parse::<f64>().unwrap(), first_pred[4].parse::<f64>().unwrap());
    assert_eq!(predicted_row[3].parse::<f64>().unwrap(), first_pred[5].parse::<f64>().unwrap());

    // Noise-study output is accepted as input too.
    run_ok(
        d,
        &[
            "noise-study", "--model", "model.json", "--out", "noise.csv", "--seed", "11",
            "--repetitions", "5", "--shots", "100", "--wear-levels", "1", "--speed-min", "5000",
            "--speed-max", "5200", "--speed-step", "200",
        ],
    );
    run_ok(d, &["export-plot", "--input", "noise.csv", "--out", "noiseplot.csv"]);
    let text = std::fs::read_to_string(d.join("noiseplot.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);

    let out = rqsvr(d, &["export-plot", "--input", "data.csv", "--out", "x.csv"]);
    assert!(!out.status.success(), "raw datasets are not plottable inputs");
}

#[test]
fn noise_study_shrinks_with_more_shots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare_model(d);
    let grid = [
        "--wear-levels", "1", "--speed-min", "5000", "--speed-max", "5400", "--speed-step", "400",
    ];
    let mut base = vec!["noise-study", "--model", "model.json", "--seed", "11"];
    base.extend_from_slice(&grid);

    let at = |shots: &'static str, out: &'static str| -> Vec<(f64, f64, f64)> {
        let mut args = base.clone();
        args.extend_from_slice(&["--shots", shots, "--out", out]);
        run_ok(d, &args);
        std::fs::read_to_string(d.join(out))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<f64> = l.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
                (f[0], f[1], f[2]) // exact, mean, std
            })
            .collect()
    };
    let coarse = at("10000", "noise4.csv");
    let fine = at("1000000", "noise6.csv");
    assert_eq!(coarse.len(), 2);
    for ((exact, mean, std_coarse), (_, _, std_fine)) in coarse.iter().zip(&fine) {
        // 100x the shots: the empirical std must drop well below the
        // coarse one (the expected factor is 10).
        assert!(std_fine < std_coarse, "std did not shrink: {std_fine} vs {std_coarse}");
        // And the repetition mean stays consistent with the exact value.
        let sem = std_coarse / (100f64).sqrt();
        assert!((mean - exact).abs() <= 5.0 * sem, "mean {mean} vs exact {exact}");
    }
}

#[test]
fn keep_stable_flag_controls_filtering() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // High noise pushes a visible fraction of records over the threshold.
    run_ok(
        d,
        &[
            "synth", "--out", "data.csv", "--seed", "21", "--tools", "1", "--wear-levels", "3",
            "--speed-step", "100", "--noise-std", "1.5",
        ],
    );
    run_ok(
        d,
        &[
            "fit-features", "--data", "data.csv", "--out", "params.json", "--seed", "21",
            "--patience", "4", "--max-trials", "8",
        ],
    );
    let filtered = read_json(&d.join("params.report.json"));
    assert!(filtered["metrics"]["rows_dropped"].as_u64().unwrap() > 0);

    run_ok(
        d,
        &[
            "fit-features", "--data", "data.csv", "--out", "all.json", "--seed", "21",
            "--patience", "4", "--max-trials", "8", "--keep-stable",
        ],
    );
    let kept = read_json(&d.join("all.report.json"));
    assert_eq!(kept["metrics"]["rows_dropped"], 0);
    let total = kept["metrics"]["rows_used"].as_u64().unwrap();
    let used = filtered["metrics"]["rows_used"].as_u64().unwrap();
    assert!(used < total);
}
