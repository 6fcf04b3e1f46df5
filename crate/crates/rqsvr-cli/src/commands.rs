//! Subcommand implementations.
//!
//! Every command computes first and writes afterwards, so a validation
//! failure exits nonzero without leaving partial artifacts. Alongside its
//! artifact each command writes a `<stem>.report.json` echoing the exact
//! resolved configuration; wall-clock timing goes to stderr so the
//! artifacts stay byte-reproducible.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rqsvr::circuit::{build_rqsvr_circuit, initial_state, EstimateMode, RqsvrModel};
use rqsvr::data::{
    drop_stable, leave_one_tool_out, load_csv, save_csv, synthesize, MillingDataset, SpeedGrid,
    SynthConfig, ToolPerturbation,
};
use rqsvr::features::{
    build_feature_dataset, fit_feature_params, phi_cos, polynomial_baseline_mse, FeatureParams,
    FitOptions,
};
use rqsvr::seeds::{item_seed, stage_seed};
use rqsvr::svr::{fit_epsilon_svr, grid_search_cv, predict_classical, SvrHyperparams};

use crate::config::{ExperimentConfig, Mode};
use crate::io::{
    noise_csv, plot_csv, predictions_csv, read_noise_csv, read_predictions_csv,
    read_versioned_json, write_atomic, write_versioned_json, CvDoc, FeatureParamsDoc, NoiseRow,
    PlotRow, PredictionRow, FORMAT_VERSION, NOISE_HEADER, PREDICTIONS_HEADER,
};

#[derive(Serialize)]
struct RunReport<M: Serialize> {
    format_version: u32,
    command: &'static str,
    config: ExperimentConfig,
    metrics: M,
    artifacts: BTreeMap<String, String>,
}

fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

fn write_report<M: Serialize>(
    command: &'static str,
    config: &ExperimentConfig,
    out: &Path,
    metrics: M,
    artifacts: &[(&str, &Path)],
) -> Result<()> {
    let report = RunReport {
        format_version: FORMAT_VERSION,
        command,
        config: config.clone(),
        metrics,
        artifacts: artifacts
            .iter()
            .map(|(k, p)| (k.to_string(), p.display().to_string()))
            .collect(),
    };
    write_versioned_json(&report_path(out), &report)
}

fn log_done(command: &str, start: std::time::Instant) {
    eprintln!("{command} completed in {:.3}s", start.elapsed().as_secs_f64());
}

/// Load a dataset, surface off-grid warnings, and apply the stability
/// filter unless asked not to.
fn load_dataset(path: &Path, ae_max: f64, keep_stable: bool) -> Result<(MillingDataset, usize)> {
    let data = load_csv(path).with_context(|| format!("loading {}", path.display()))?;
    let warnings = data.off_grid_warnings(&SpeedGrid::default());
    for w in warnings.iter().take(5) {
        eprintln!("warning: {w}");
    }
    if warnings.len() > 5 {
        eprintln!("warning: ... and {} more off-grid records", warnings.len() - 5);
    }
    let filtered = if keep_stable { data.clone() } else { drop_stable(&data, ae_max) };
    let dropped = data.len() - filtered.len();
    if filtered.is_empty() {
        bail!("{}: no usable records after the stability filter", path.display());
    }
    Ok((filtered, dropped))
}

fn evenly_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![rqsvr::data::quantize_real(0.5 * (lo + hi))];
    }
    (0..count)
        .map(|i| rqsvr::data::quantize_real(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

pub struct SynthParams {
    pub out: PathBuf,
    pub tools: usize,
    pub wear_levels: usize,
    pub wear_max: f64,
    pub speed: SpeedGrid,
    pub noise_std: f64,
    pub clip: Option<(f64, f64)>,
    pub machine: String,
    pub perturb: Option<ToolPerturbation>,
}

#[derive(Serialize)]
struct SynthMetrics {
    rows: usize,
    tools: Vec<String>,
    config_hash: String,
    ground_truth: FeatureParams,
}

pub fn cmd_synth(config: &ExperimentConfig, params: SynthParams) -> Result<()> {
    let start = std::time::Instant::now();
    let synth = SynthConfig {
        machine: params.machine,
        speed: params.speed,
        wear_levels: evenly_spaced(0.0, params.wear_max, params.wear_levels),
        tools: params.tools,
        noise_std: params.noise_std,
        clip: params.clip,
        ae_max: config.ae_max,
        perturb: params.perturb,
        ..Default::default()
    };
    let data = synthesize(&synth, stage_seed(config.seed, "synth"))?;
    let metrics = SynthMetrics {
        rows: data.len(),
        tools: data.tools(),
        config_hash: synth.config_hash(),
        ground_truth: synth.ground_truth()?,
    };
    save_csv(&data, &params.out)?;
    write_report("synth", config, &params.out, metrics, &[("dataset", &params.out)])?;
    log_done("synth", start);
    Ok(())
}

#[derive(Serialize)]
struct FitFeaturesMetrics {
    rows_used: usize,
    rows_dropped: usize,
    fit_mse: f64,
    polynomial_baseline_mse: f64,
}

pub fn cmd_fit_features(
    config: &ExperimentConfig,
    data_path: &Path,
    out: &Path,
    keep_stable: bool,
) -> Result<()> {
    let start = std::time::Instant::now();
    let (data, dropped) = load_dataset(data_path, config.ae_max, keep_stable)?;
    let points = data.points();
    let opts = FitOptions {
        seed: stage_seed(config.seed, "features"),
        patience: config.patience,
        restart_std: config.restart_std,
        max_trials: config.max_trials,
        ..FitOptions::new(0)
    };
    let params = fit_feature_params(&points, &opts)?;
    let metrics = FitFeaturesMetrics {
        rows_used: points.len(),
        rows_dropped: dropped,
        fit_mse: params.fit_mse,
        polynomial_baseline_mse: polynomial_baseline_mse(&points)?,
    };
    write_versioned_json(out, &FeatureParamsDoc { format_version: FORMAT_VERSION, params })?;
    write_report("fit-features", config, out, metrics, &[("features", out)])?;
    log_done("fit-features", start);
    Ok(())
}

#[derive(Serialize)]
struct CvMetrics {
    rows_used: usize,
    best_c: f64,
    best_mean_mse: f64,
    fold_hash: String,
}

pub fn cmd_cv(
    config: &ExperimentConfig,
    data_path: &Path,
    features_path: &Path,
    out: &Path,
    keep_stable: bool,
) -> Result<()> {
    let start = std::time::Instant::now();
    let (data, _) = load_dataset(data_path, config.ae_max, keep_stable)?;
    let doc: FeatureParamsDoc = read_versioned_json(features_path)?;
    validate_norm(&doc.params)?;
    let feature_set = build_feature_dataset(&data.points(), &doc.params);
    let report = grid_search_cv(
        &feature_set,
        &config.grid,
        config.k,
        config.epsilon,
        stage_seed(config.seed, "cv"),
    )?;
    let best_mean_mse =
        report.entries.iter().find(|e| e.c == report.best_c).map(|e| e.mean_mse).unwrap();
    let metrics = CvMetrics {
        rows_used: feature_set.len(),
        best_c: report.best_c,
        best_mean_mse,
        fold_hash: report.fold_hash.clone(),
    };
    write_versioned_json(out, &CvDoc { format_version: FORMAT_VERSION, report })?;
    write_report("cv", config, out, metrics, &[("cv", out)])?;
    log_done("cv", start);
    Ok(())
}

#[derive(Serialize)]
struct TrainMetrics {
    rows_used: usize,
    c: f64,
    epsilon: f64,
    training_mse: f64,
    dual_objective: f64,
    iterations: usize,
    support_vectors: usize,
}

pub fn cmd_train(
    config: &ExperimentConfig,
    data_path: &Path,
    features_path: &Path,
    out: &Path,
    keep_stable: bool,
) -> Result<()> {
    let start = std::time::Instant::now();
    let (data, _) = load_dataset(data_path, config.ae_max, keep_stable)?;
    let doc: FeatureParamsDoc = read_versioned_json(features_path)?;
    validate_norm(&doc.params)?;
    let feature_set = build_feature_dataset(&data.points(), &doc.params);
    let hp = SvrHyperparams { c: config.c, epsilon: config.epsilon };
    let fit = fit_epsilon_svr(&feature_set.x, &feature_set.y, &hp, rqsvr::svr::DEFAULT_TOL)?;
    let training_mse = feature_set
        .x
        .iter()
        .zip(&feature_set.y)
        .map(|(xi, yi)| {
            let e = predict_classical(&fit, xi).unwrap() - yi;
            e * e
        })
        .sum::<f64>()
        / feature_set.len() as f64;
    let metrics = TrainMetrics {
        rows_used: feature_set.len(),
        c: hp.c,
        epsilon: hp.epsilon,
        training_mse,
        dual_objective: fit.objective,
        iterations: fit.iterations,
        support_vectors: fit.dual_coefs.iter().filter(|t| **t != 0.0).count(),
    };
    let model = RqsvrModel::from_fit(&fit, doc.params)?;
    write_atomic(out, &(model.to_json() + "\n"))?;
    write_report("train", config, out, metrics, &[("model", out)])?;
    log_done("train", start);
    Ok(())
}

#[derive(Serialize)]
struct PredictMetrics {
    rows: usize,
    mode: Mode,
    shots: u64,
    mse: f64,
    mean_stderr: f64,
}

fn mode_for(config: &ExperimentConfig, seed: u64) -> EstimateMode {
    match config.mode {
        Mode::Exact => EstimateMode::Exact,
        Mode::Shots => EstimateMode::Shots { shots: config.shots, seed },
    }
}

pub fn cmd_predict(
    config: &ExperimentConfig,
    model_path: &Path,
    data_path: &Path,
    out: &Path,
    classify: bool,
    keep_stable: bool,
) -> Result<()> {
    let start = std::time::Instant::now();
    let model = RqsvrModel::from_json(&std::fs::read_to_string(model_path)?)?;
    validate_norm(&model.features)?;
    let (data, _) = load_dataset(data_path, config.ae_max, keep_stable)?;
    let mut rows = Vec::with_capacity(data.len());
    let mut mse = 0.0;
    let mut stderr_sum = 0.0;
    for (i, record) in data.records.iter().enumerate() {
        let x = [record.spindle_speed as f64, record.wear];
        let mode = mode_for(config, item_seed(config.seed, "predict", i as u64));
        let p = model.predict(x, mode)?;
        mse += (p.value - record.ae_lim).powi(2) / data.len() as f64;
        stderr_sum += p.stderr;
        rows.push(PredictionRow {
            machine: record.machine.clone(),
            tool: record.tool.clone(),
            spindle_speed: record.spindle_speed,
            wear: record.wear,
            ae_lim: record.ae_lim,
            predicted: p.value,
            stderr: p.stderr,
            sign: classify.then_some(if p.value >= 0.0 { 1 } else { -1 }),
        });
    }
    let metrics = PredictMetrics {
        rows: rows.len(),
        mode: config.mode,
        shots: match config.mode {
            Mode::Exact => 0,
            Mode::Shots => config.shots,
        },
        mse,
        mean_stderr: stderr_sum / rows.len() as f64,
    };
    write_atomic(out, &predictions_csv(&rows, classify))?;
    write_report("predict", config, out, metrics, &[("predictions", out)])?;
    log_done("predict", start);
    Ok(())
}

pub struct NoiseGrid {
    pub wear_levels: usize,
    pub speed: SpeedGrid,
}

#[derive(Serialize)]
struct NoiseMetrics {
    points: usize,
    repetitions: usize,
    shots: u64,
    max_std: f64,
    mean_std: f64,
}

pub fn cmd_noise_study(
    config: &ExperimentConfig,
    model_path: &Path,
    out: &Path,
    grid: NoiseGrid,
) -> Result<()> {
    let start = std::time::Instant::now();
    let model = RqsvrModel::from_json(&std::fs::read_to_string(model_path)?)?;
    validate_norm(&model.features)?;
    grid.speed.validate()?;
    let norm = &model.features.norm;
    let wear_levels = evenly_spaced(norm.m[1], norm.m[1] + norm.s[1], grid.wear_levels);

    let mut rows = Vec::new();
    let mut point_index = 0u64;
    for &wear in &wear_levels {
        for speed in grid.speed.speeds() {
            let x = [speed as f64, wear];
            let phi = phi_cos(model.features.norm.normalize(x), &model.features.alpha);
            let (exact, mean, std, theory_std) = if model.norm_w() == 0.0
                || phi.iter().all(|&p| p == 0.0)
            {
                (model.b, model.b, 0.0, 0.0)
            } else {
                let (circuit, layout, recon) = build_rqsvr_circuit(&model.w, &phi)?;
                let mut state = initial_state(&layout);
                state.apply_circuit(&circuit)?;
                let probs = state.probabilities();
                let exact = recon.from_probabilities(&probs) + model.b;
                let theory_std = recon.stderr_from_probabilities(&probs, config.shots);
                let mut values = Vec::with_capacity(config.repetitions);
                for rep in 0..config.repetitions {
                    let seed = item_seed(
                        config.seed,
                        "noise",
                        point_index * config.repetitions as u64 + rep as u64,
                    );
                    let counts = state.sample(config.shots, seed)?;
                    values.push(recon.from_counts(&counts).0 + model.b);
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (values.len() - 1).max(1) as f64;
                (exact, mean, var.sqrt(), theory_std)
            };
            rows.push(NoiseRow { wear, spindle_speed: speed, exact, mean, std, theory_std });
            point_index += 1;
        }
    }
    let metrics = NoiseMetrics {
        points: rows.len(),
        repetitions: config.repetitions,
        shots: config.shots,
        max_std: rows.iter().map(|r| r.std).fold(0.0, f64::max),
        mean_std: rows.iter().map(|r| r.std).sum::<f64>() / rows.len() as f64,
    };
    write_atomic(out, &noise_csv(&rows))?;
    write_report("noise-study", config, out, metrics, &[("noise", out)])?;
    log_done("noise-study", start);
    Ok(())
}

#[derive(Serialize)]
pub struct ToolStudyEntry {
    pub tool: String,
    /// Tools the feature map and regressor were fitted on.
    pub train_tools: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub feature_fit_mse: f64,
    pub train_mse: f64,
    pub test_mse: f64,
}

#[derive(Serialize)]
pub struct ToolStudyDoc {
    pub format_version: u32,
    pub entries: Vec<ToolStudyEntry>,
    pub max_test_mse_tool: String,
}

pub fn cmd_tool_study(
    config: &ExperimentConfig,
    data_path: &Path,
    out: &Path,
    keep_stable: bool,
) -> Result<()> {
    let start = std::time::Instant::now();
    let (data, _) = load_dataset(data_path, config.ae_max, keep_stable)?;
    let tools = data.tools();
    if tools.len() < 2 {
        bail!("tool study needs at least two distinct tools, found {:?}", tools);
    }

    let mut entries = Vec::with_capacity(tools.len());
    for (t, tool) in tools.iter().enumerate() {
        let (train, test) = leave_one_tool_out(&data, tool)?;
        let train_points = train.points();
        let opts = FitOptions {
            seed: item_seed(config.seed, "tool-features", t as u64),
            patience: config.patience,
            restart_std: config.restart_std,
            max_trials: config.max_trials,
            ..FitOptions::new(0)
        };
        let params = fit_feature_params(&train_points, &opts)?;
        let feature_fit_mse = params.fit_mse;
        let feature_set = build_feature_dataset(&train_points, &params);
        let hp = SvrHyperparams { c: config.c, epsilon: config.epsilon };
        let fit = fit_epsilon_svr(&feature_set.x, &feature_set.y, &hp, rqsvr::svr::DEFAULT_TOL)?;
        let model = RqsvrModel::from_fit(&fit, params)?;

        let mse_of = |set: &MillingDataset, tag: &str| -> Result<f64> {
            let mut acc = 0.0;
            for (i, record) in set.records.iter().enumerate() {
                let x = [record.spindle_speed as f64, record.wear];
                let seed = item_seed(config.seed, tag, (t * 1_000_000 + i) as u64);
                let p = model.predict(x, mode_for(config, seed))?;
                acc += (p.value - record.ae_lim).powi(2);
            }
            Ok(acc / set.len() as f64)
        };
        let train_mse = mse_of(&train, "tool-train-predict")?;
        let test_mse = mse_of(&test, "tool-test-predict")?;
        entries.push(ToolStudyEntry {
            tool: tool.clone(),
            train_tools: train.tools(),
            train_rows: train.len(),
            test_rows: test.len(),
            feature_fit_mse,
            train_mse,
            test_mse,
        });
    }

    let max_test_mse_tool = entries
        .iter()
        .max_by(|a, b| a.test_mse.partial_cmp(&b.test_mse).unwrap())
        .map(|e| e.tool.clone())
        .unwrap();
    let doc = ToolStudyDoc { format_version: FORMAT_VERSION, entries, max_test_mse_tool };

    // Companion bar-plot data.
    let mut plot = String::from("series,tool,mse\n");
    for e in &doc.entries {
        plot.push_str(&format!("train,{},{}\n", e.tool, e.train_mse));
        plot.push_str(&format!("test,{},{}\n", e.tool, e.test_mse));
    }
    let plot_path = out.with_extension("csv");

    write_versioned_json(out, &doc)?;
    write_atomic(&plot_path, &plot)?;
    write_report("tool-study", config, out, &doc, &[("study", out), ("plot", &plot_path)])?;
    log_done("tool-study", start);
    Ok(())
}

#[derive(Serialize)]
struct ExportMetrics {
    input_kind: &'static str,
    input_rows: usize,
    output_rows: usize,
}

pub fn cmd_export_plot(config: &ExperimentConfig, input: &Path, out: &Path) -> Result<()> {
    let start = std::time::Instant::now();
    let header = {
        let text = std::fs::read_to_string(input)
            .with_context(|| format!("reading {}", input.display()))?;
        text.lines().next().unwrap_or("").to_string()
    };
    let (kind, rows): (&'static str, Vec<PlotRow>) = if header.starts_with(PREDICTIONS_HEADER) {
        let predictions = read_predictions_csv(input)?;
        let mut rows = Vec::with_capacity(2 * predictions.len());
        for p in &predictions {
            rows.push(PlotRow {
                series: "actual",
                spindle_speed: p.spindle_speed,
                wear: p.wear,
                value: p.ae_lim,
                std: 0.0,
            });
            rows.push(PlotRow {
                series: "predicted",
                spindle_speed: p.spindle_speed,
                wear: p.wear,
                value: p.predicted,
                std: p.stderr,
            });
        }
        ("predictions", rows)
    } else if header == NOISE_HEADER {
        let noise = read_noise_csv(input)?;
        let mut rows = Vec::with_capacity(2 * noise.len());
        for n in &noise {
            rows.push(PlotRow {
                series: "exact",
                spindle_speed: n.spindle_speed,
                wear: n.wear,
                value: n.exact,
                std: n.theory_std,
            });
            rows.push(PlotRow {
                series: "mean",
                spindle_speed: n.spindle_speed,
                wear: n.wear,
                value: n.mean,
                std: n.std,
            });
        }
        ("noise-study", rows)
    } else {
        bail!("{}: unrecognized input schema '{header}'", input.display());
    };

    let metrics =
        ExportMetrics { input_kind: kind, input_rows: rows.len() / 2, output_rows: rows.len() };
    write_atomic(out, &plot_csv(&rows))?;
    write_report("export-plot", config, out, metrics, &[("plot", out)])?;
    log_done("export-plot", start);
    Ok(())
}

/// Check that loaded feature normalization is sane before predicting; a
/// hand-edited document with a zero range would silently produce NaNs.
fn validate_norm(params: &FeatureParams) -> Result<()> {
    let stats = &params.norm;
    if stats.s.iter().any(|&s| !(s > 0.0)) || stats.m.iter().any(|m| !m.is_finite()) {
        bail!("feature normalization statistics are degenerate");
    }
    Ok(())
}
