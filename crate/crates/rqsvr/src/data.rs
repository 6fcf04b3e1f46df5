//! Milling-stability dataset handling.
//!
//! Records pair a machine/tool identifier with a spindle speed (RPM), a
//! tool-wear state (cm²) and the measured stability limit (mm). The CSV
//! schema is
//!
//! ```text
//! machine,tool,spindle_speed_rpm,wear_cm2,ae_lim_mm,fully_stable
//! ```
//!
//! with reals serialized at 9 significant digits in decimal notation, so a
//! save/load round trip is exact. The synthetic generator samples the same
//! model family the feature fit assumes, which makes the whole pipeline
//! testable on realizable data without the proprietary measurement sets.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{model_value, Alpha, FeatureParams, NormStats, Point, ALPHA_CENTER_B, PHI_DIM};
use crate::seeds::fnv1a64;

pub const CSV_HEADER: &str = "machine,tool,spindle_speed_rpm,wear_cm2,ae_lim_mm,fully_stable";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header: got '{got}', expected '{CSV_HEADER}'")]
    BadHeader { got: String },
    #[error("row {row}, column {column}: {message}")]
    Parse { row: usize, column: &'static str, message: String },
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
    #[error("holding out '{0}' would leave an empty training set")]
    EmptyTrain(String),
    #[error("fold count must satisfy 2 <= k <= n, got k = {k} for n = {n}")]
    BadFolds { k: usize, n: usize },
}

/// One milling test: inputs, measured stability limit, and whether the
/// process stayed stable over the whole engagement sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MillingRecord {
    pub machine: String,
    pub tool: String,
    pub spindle_speed: u32,
    pub wear: f64,
    pub ae_lim: f64,
    pub fully_stable: bool,
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Loaded { path: String },
    Synthetic { config_hash: String },
    Derived { note: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MillingDataset {
    pub records: Vec<MillingRecord>,
    pub provenance: Provenance,
}

impl MillingDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (speed, wear) → stability-limit pairs for the feature layer.
    pub fn points(&self) -> Vec<Point> {
        self.records
            .iter()
            .map(|r| ([r.spindle_speed as f64, r.wear], r.ae_lim))
            .collect()
    }

    /// Distinct tool identifiers in first-seen order.
    pub fn tools(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.tool) {
                out.push(r.tool.clone());
            }
        }
        out
    }

    /// Records whose spindle speed is outside the grid or off its
    /// increment. These are warnings, not errors; the records stay.
    pub fn off_grid_warnings(&self, grid: &SpeedGrid) -> Vec<String> {
        let mut out = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            let row = i + 1;
            let s = r.spindle_speed;
            if s < grid.min || s > grid.max {
                out.push(format!(
                    "row {row}: spindle speed {s} outside [{}, {}]",
                    grid.min, grid.max
                ));
            } else if (s - grid.min) % grid.step != 0 {
                out.push(format!(
                    "row {row}: spindle speed {s} off the {}-RPM increment grid",
                    grid.step
                ));
            }
        }
        out
    }
}

/// Format a real at 9 significant digits in plain decimal notation.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).clamp(0, 30) as usize;
    format!("{x:.decimals$}")
}

/// Round to the value the CSV layer would store.
pub fn quantize_real(x: f64) -> f64 {
    format_real(x).parse().expect("formatted real always parses")
}

/// Serialize per the CSV schema.
pub fn save_csv(dataset: &MillingDataset, path: &Path) -> Result<(), DataError> {
    let mut out = String::with_capacity(64 * (dataset.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &dataset.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.machine,
            r.tool,
            r.spindle_speed,
            format_real(r.wear),
            format_real(r.ae_lim),
            r.fully_stable
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a schema-conforming CSV file; errors carry the 1-based data row
/// and the offending column.
pub fn load_csv(path: &Path) -> Result<MillingDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(DataError::BadHeader { got: header });
    }
    let mut records = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let rec = result?;
        if rec.len() != 6 {
            return Err(DataError::Parse {
                row,
                column: "record",
                message: format!("expected 6 fields, got {}", rec.len()),
            });
        }
        let field = |idx: usize| rec.get(idx).unwrap_or("").trim().to_string();
        let machine = field(0);
        let tool = field(1);
        if machine.is_empty() {
            return Err(DataError::Parse { row, column: "machine", message: "empty".into() });
        }
        if tool.is_empty() {
            return Err(DataError::Parse { row, column: "tool", message: "empty".into() });
        }
        let spindle_speed: u32 = field(2).parse().map_err(|e| DataError::Parse {
            row,
            column: "spindle_speed_rpm",
            message: format!("{e}"),
        })?;
        let wear: f64 = field(3).parse().map_err(|e| DataError::Parse {
            row,
            column: "wear_cm2",
            message: format!("{e}"),
        })?;
        if !wear.is_finite() || wear < 0.0 {
            return Err(DataError::Parse {
                row,
                column: "wear_cm2",
                message: format!("wear must be finite and nonnegative, got {wear}"),
            });
        }
        let ae_lim: f64 = field(4).parse().map_err(|e| DataError::Parse {
            row,
            column: "ae_lim_mm",
            message: format!("{e}"),
        })?;
        if !ae_lim.is_finite() || ae_lim <= 0.0 {
            return Err(DataError::Parse {
                row,
                column: "ae_lim_mm",
                message: format!("stability limit must be positive, got {ae_lim}"),
            });
        }
        let fully_stable: bool = field(5).parse().map_err(|e| DataError::Parse {
            row,
            column: "fully_stable",
            message: format!("{e}"),
        })?;
        records.push(MillingRecord { machine, tool, spindle_speed, wear, ae_lim, fully_stable });
    }
    Ok(MillingDataset {
        records,
        provenance: Provenance::Loaded { path: path.display().to_string() },
    })
}

/// Drop records that never chattered: explicitly flagged ones and any with
/// a limit above `ae_max`. Order is preserved.
pub fn drop_stable(dataset: &MillingDataset, ae_max: f64) -> MillingDataset {
    MillingDataset {
        records: dataset
            .records
            .iter()
            .filter(|r| !r.fully_stable && r.ae_lim <= ae_max)
            .cloned()
            .collect(),
        provenance: dataset.provenance.clone(),
    }
}

/// Split off one tool as the test set; all remaining tools train.
pub fn leave_one_tool_out(
    dataset: &MillingDataset,
    tool_id: &str,
) -> Result<(MillingDataset, MillingDataset), DataError> {
    if !dataset.records.iter().any(|r| r.tool == tool_id) {
        return Err(DataError::UnknownTool(tool_id.to_string()));
    }
    let (test, train): (Vec<_>, Vec<_>) =
        dataset.records.iter().cloned().partition(|r| r.tool == tool_id);
    if train.is_empty() {
        return Err(DataError::EmptyTrain(tool_id.to_string()));
    }
    let derived = |what: &str| Provenance::Derived {
        note: format!("{what} split holding out tool {tool_id}"),
    };
    Ok((
        MillingDataset { records: train, provenance: derived("train") },
        MillingDataset { records: test, provenance: derived("test") },
    ))
}

/// Assign each of `n` indices to one of `k` folds after a seeded shuffle.
/// Fold sizes differ by at most one; the assignment is a pure function of
/// `(n, k, seed)`.
pub fn kfold_splits(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, DataError> {
    if k < 2 || k > n {
        return Err(DataError::BadFolds { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let base = n / k;
    let remainder = n % k;
    let mut assignment = vec![0usize; n];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < remainder);
        for &idx in &order[pos..pos + size] {
            assignment[idx] = fold;
        }
        pos += size;
    }
    Ok(assignment)
}

/// Spindle-speed grid: inclusive range with a fixed increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedGrid {
    pub min: u32,
    pub max: u32,
    pub step: u32,
}

impl SpeedGrid {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.step == 0 || self.max <= self.min || (self.max - self.min) % self.step != 0 {
            return Err(DataError::BadConfig(format!(
                "speed grid {}..{} step {} is not a valid increment grid",
                self.min, self.max, self.step
            )));
        }
        Ok(())
    }

    pub fn speeds(&self) -> impl Iterator<Item = u32> + '_ {
        (self.min..=self.max).step_by(self.step as usize)
    }

    pub fn count(&self) -> usize {
        ((self.max - self.min) / self.step) as usize + 1
    }
}

impl Default for SpeedGrid {
    fn default() -> Self {
        SpeedGrid { min: 4000, max: 8000, step: 50 }
    }
}

/// Shifts one tool's noiseless response by a constant offset, for studies
/// that need a deliberately deviating tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolPerturbation {
    /// Zero-based tool index.
    pub tool_index: usize,
    /// Offset added to the noiseless response, in mm.
    pub offset: f64,
}

/// Generator configuration. The ground-truth response is the same model
/// family the feature fit assumes; by default its (β, c) are rescaled at
/// generation time so the noiseless response exactly spans the clip range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub machine: String,
    pub speed: SpeedGrid,
    pub wear_levels: Vec<f64>,
    pub tools: usize,
    pub alpha: Alpha,
    pub beta_base: [f64; PHI_DIM],
    pub c_base: f64,
    /// Rescale (β, c) so the noiseless response spans exactly this range.
    pub scale_response: Option<(f64, f64)>,
    /// Gaussian noise standard deviation in mm.
    pub noise_std: f64,
    /// Clip range [lo, hi] for the stored stability limit, if any.
    pub clip: Option<(f64, f64)>,
    /// Records whose pre-clip response exceeds this are flagged stable.
    pub ae_max: f64,
    pub perturb: Option<ToolPerturbation>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let wear_levels = (0..5).map(|i| quantize_real(263.725 * i as f64 / 4.0)).collect();
        SynthConfig {
            machine: "A".to_string(),
            speed: SpeedGrid::default(),
            wear_levels,
            tools: 3,
            alpha: ALPHA_CENTER_B,
            beta_base: [0.3, -0.2, 0.25, 0.15, -0.1, 1.0, 0.4, -0.3, 0.2, 0.1, -0.2],
            c_base: 0.0,
            scale_response: Some((1.08, 5.44)),
            noise_std: 0.2,
            clip: Some((1.08, 5.44)),
            ae_max: 5.44,
            perturb: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        self.speed.validate()?;
        if self.tools == 0 {
            return Err(DataError::BadConfig("need at least one tool".into()));
        }
        if self.wear_levels.is_empty() || self.wear_levels.iter().any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(DataError::BadConfig("wear levels must be finite and nonnegative".into()));
        }
        let (lo, hi) = self.wear_range();
        if hi <= lo {
            return Err(DataError::BadConfig("wear levels must span a nonzero range".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(DataError::BadConfig("noise std must be nonnegative".into()));
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo > 0.0 && hi > lo) {
                return Err(DataError::BadConfig(format!("clip range [{lo}, {hi}] invalid")));
            }
        }
        if let Some((lo, hi)) = self.scale_response {
            if !(hi > lo) {
                return Err(DataError::BadConfig(format!("scale range [{lo}, {hi}] invalid")));
            }
        }
        if !(self.ae_max > 0.0) {
            return Err(DataError::BadConfig("stable threshold must be positive".into()));
        }
        if let Some(p) = &self.perturb {
            if p.tool_index >= self.tools {
                return Err(DataError::BadConfig(format!(
                    "perturbed tool index {} out of range for {} tools",
                    p.tool_index, self.tools
                )));
            }
        }
        Ok(())
    }

    fn wear_range(&self) -> (f64, f64) {
        let lo = self.wear_levels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.wear_levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Normalization statistics implied by the grid and wear levels.
    pub fn norm_stats(&self) -> NormStats {
        let (wlo, whi) = self.wear_range();
        NormStats {
            m: [self.speed.min as f64, wlo],
            s: [(self.speed.max - self.speed.min) as f64, whi - wlo],
        }
    }

    /// The effective generating parameters: base (β, c), optionally
    /// rescaled so the noiseless response spans the clip range across the
    /// full (speed, wear) grid. Deterministic; no randomness involved.
    pub fn ground_truth(&self) -> Result<FeatureParams, DataError> {
        self.validate()?;
        let norm = self.norm_stats();
        let mut beta = self.beta_base;
        let mut c = self.c_base;
        if let Some((lo, hi)) = self.scale_response {
            let mut y_min = f64::INFINITY;
            let mut y_max = f64::NEG_INFINITY;
            for &wear in &self.wear_levels {
                for speed in self.speed.speeds() {
                    let xt = norm.normalize([speed as f64, wear]);
                    let y = model_value(&self.alpha, &beta, c, xt);
                    y_min = y_min.min(y);
                    y_max = y_max.max(y);
                }
            }
            if y_max <= y_min {
                return Err(DataError::BadConfig(
                    "response is constant; cannot scale it to a target range".into(),
                ));
            }
            let a = (hi - lo) / (y_max - y_min);
            let shift = lo - a * y_min;
            for b in beta.iter_mut() {
                *b *= a;
            }
            c = a * c + shift;
        }
        Ok(FeatureParams { alpha: self.alpha, beta, c, norm, fit_mse: 0.0 })
    }

    pub fn config_hash(&self) -> String {
        let encoded = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(encoded.as_bytes()))
    }
}

/// Generate a dataset: one record per (tool, wear level, grid speed), in
/// that nesting order. Deterministic for a fixed seed.
pub fn synthesize(config: &SynthConfig, seed: u64) -> Result<MillingDataset, DataError> {
    let gt = config.ground_truth()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, config.noise_std.max(f64::MIN_POSITIVE))
        .expect("validated noise std");
    let mut records = Vec::with_capacity(config.tools * config.wear_levels.len() * config.speed.count());
    for tool_idx in 0..config.tools {
        let tool = format!("T{}", tool_idx + 1);
        let offset = match &config.perturb {
            Some(p) if p.tool_index == tool_idx => p.offset,
            _ => 0.0,
        };
        for &wear in &config.wear_levels {
            for speed in config.speed.speeds() {
                let xt = gt.norm.normalize([speed as f64, wear]);
                let mut y = model_value(&gt.alpha, &gt.beta, gt.c, xt) + offset;
                if config.noise_std > 0.0 {
                    y += noise.sample(&mut rng);
                }
                let fully_stable = y > config.ae_max;
                let ae_lim = match config.clip {
                    Some((lo, hi)) => y.clamp(lo, hi),
                    None => y,
                };
                records.push(MillingRecord {
                    machine: config.machine.clone(),
                    tool: tool.clone(),
                    spindle_speed: speed,
                    wear: quantize_real(wear),
                    ae_lim: quantize_real(ae_lim),
                    fully_stable,
                });
            }
        }
    }
    Ok(MillingDataset {
        records,
        provenance: Provenance::Synthetic { config_hash: config.config_hash() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::model_mse;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn real_formatting_nine_significant_digits() {
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(263.725), "263.725000");
        assert_eq!(format_real(4000.0), "4000.00000");
        assert_eq!(format_real(1.0), "1.00000000");
        assert_eq!(format_real(-0.5), "-0.500000000");
        // Quantization is idempotent.
        for x in [263.725, 1.0 / 3.0, 5.4399999, 1234.56789, 1e-4, -2.398716652] {
            let q = quantize_real(x);
            assert_eq!(q, quantize_real(q));
        }
    }

    fn sample_dataset() -> MillingDataset {
        MillingDataset {
            records: vec![
                MillingRecord {
                    machine: "A".into(),
                    tool: "T1".into(),
                    spindle_speed: 4000,
                    wear: 0.0,
                    ae_lim: 2.0,
                    fully_stable: false,
                },
                MillingRecord {
                    machine: "A".into(),
                    tool: "T2".into(),
                    spindle_speed: 4050,
                    wear: 131.8625,
                    ae_lim: 3.5,
                    fully_stable: false,
                },
                MillingRecord {
                    machine: "A".into(),
                    tool: "T2".into(),
                    spindle_speed: 8000,
                    wear: 263.725,
                    ae_lim: 5.44,
                    fully_stable: true,
                },
            ],
            provenance: Provenance::Derived { note: "test fixture".into() },
        }
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let dir = tmpdir();
        let path = dir.path().join("data.csv");
        let original = sample_dataset();
        save_csv(&original, &path).unwrap();
        let loaded = load_csv(&path).unwrap();
        assert_eq!(loaded.records, original.records);
    }

    #[test]
    fn synthesized_csv_round_trip_is_identity() {
        let dir = tmpdir();
        let path = dir.path().join("synth.csv");
        let config = SynthConfig { tools: 1, ..Default::default() };
        let original = synthesize(&config, 5).unwrap();
        save_csv(&original, &path).unwrap();
        let loaded = load_csv(&path).unwrap();
        assert_eq!(loaded.records, original.records);
    }

    #[test]
    fn load_reports_row_and_column() {
        let dir = tmpdir();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            format!("{CSV_HEADER}\nA,T1,4000,0.0,2.0,false\nA,T1,4100,1.0,-1.0,false\n"),
        )
        .unwrap();
        match load_csv(&path) {
            Err(DataError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "ae_lim_mm");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_wrong_header() {
        let dir = tmpdir();
        let path = dir.path().join("hdr.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(matches!(load_csv(&path), Err(DataError::BadHeader { .. })));
    }

    #[test]
    fn off_grid_speed_warns_but_keeps_record() {
        let dir = tmpdir();
        let path = dir.path().join("grid.csv");
        std::fs::write(
            &path,
            format!("{CSV_HEADER}\nA,T1,4025,0.0,2.0,false\nA,T1,4050,0.0,2.5,false\n"),
        )
        .unwrap();
        let data = load_csv(&path).unwrap();
        assert_eq!(data.len(), 2);
        let warnings = data.off_grid_warnings(&SpeedGrid::default());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("row 1"), "{warnings:?}");
        assert!(warnings[0].contains("4025"));
    }

    #[test]
    fn drop_stable_filters_flag_and_threshold() {
        let mut data = sample_dataset();
        data.records[1].ae_lim = 6.0;
        data.records[1].fully_stable = false;
        let kept = drop_stable(&data, 5.44);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.records[0].ae_lim, 2.0);

        let empty = MillingDataset { records: vec![], provenance: data.provenance.clone() };
        assert!(drop_stable(&empty, 5.44).is_empty());

        let unstable_only = drop_stable(&kept, 5.44);
        assert_eq!(unstable_only.records, kept.records);
    }

    #[test]
    fn synthesize_default_shape_and_grid() {
        let config = SynthConfig::default();
        let data = synthesize(&config, 1).unwrap();
        assert_eq!(data.len(), 81 * 5 * 3);
        assert_eq!(data.tools(), vec!["T1", "T2", "T3"]);
        for r in &data.records {
            assert_eq!((r.spindle_speed - 4000) % 50, 0);
            assert!(r.spindle_speed >= 4000 && r.spindle_speed <= 8000);
        }
        assert!(data.off_grid_warnings(&config.speed).is_empty());
    }

    #[test]
    fn synthesize_is_seed_deterministic() {
        let config = SynthConfig::default();
        let a = synthesize(&config, 9).unwrap();
        let b = synthesize(&config, 9).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&config, 10).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn noiseless_unclipped_generator_matches_its_ground_truth() {
        let config = SynthConfig {
            noise_std: 0.0,
            clip: None,
            scale_response: None,
            c_base: 3.0,
            tools: 1,
            ..Default::default()
        };
        let data = synthesize(&config, 3).unwrap();
        let gt = config.ground_truth().unwrap();
        let mse = model_mse(&gt, &data.points()).unwrap();
        // Targets are quantized at 9 significant digits, so "zero" is only
        // zero up to that serialization precision.
        assert!(mse < 1e-14, "mse = {mse}");
    }

    #[test]
    fn scaled_response_spans_clip_range() {
        let config = SynthConfig { noise_std: 0.0, tools: 1, ..Default::default() };
        let gt = config.ground_truth().unwrap();
        let data = synthesize(&config, 3).unwrap();
        let (lo, hi) = config.clip.unwrap();
        let min = data.records.iter().map(|r| r.ae_lim).fold(f64::INFINITY, f64::min);
        let max = data.records.iter().map(|r| r.ae_lim).fold(f64::NEG_INFINITY, f64::max);
        assert!((min - lo).abs() < 1e-6, "min {min} vs clip lo {lo}");
        assert!((max - hi).abs() < 1e-6, "max {max} vs clip hi {hi}");
        assert_eq!(gt.fit_mse, 0.0);
    }

    #[test]
    fn perturbed_tool_shifts_response() {
        let base = SynthConfig { noise_std: 0.0, clip: None, tools: 3, ..Default::default() };
        let perturbed = SynthConfig {
            perturb: Some(ToolPerturbation { tool_index: 2, offset: 1.0 }),
            ..base.clone()
        };
        let a = synthesize(&base, 4).unwrap();
        let b = synthesize(&perturbed, 4).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            let expected = if ra.tool == "T3" { 1.0 } else { 0.0 };
            assert!((rb.ae_lim - ra.ae_lim - expected).abs() < 1e-7);
        }
    }

    #[test]
    fn leave_one_tool_out_partitions() {
        let data = synthesize(&SynthConfig { tools: 3, ..Default::default() }, 2).unwrap();
        let (train, test) = leave_one_tool_out(&data, "T2").unwrap();
        assert_eq!(train.len() + test.len(), data.len());
        assert!(test.records.iter().all(|r| r.tool == "T2"));
        assert!(train.records.iter().all(|r| r.tool != "T2"));
        assert_eq!(train.tools(), vec!["T1", "T3"]);

        assert!(matches!(leave_one_tool_out(&data, "T9"), Err(DataError::UnknownTool(_))));

        let single = synthesize(&SynthConfig { tools: 1, ..Default::default() }, 2).unwrap();
        assert!(matches!(leave_one_tool_out(&single, "T1"), Err(DataError::EmptyTrain(_))));
    }

    #[test]
    fn kfold_sizes_and_determinism() {
        let assignment = kfold_splits(10, 10, 0).unwrap();
        let mut sizes = vec![0usize; 10];
        for &f in &assignment {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 1));

        let assignment = kfold_splits(895, 10, 42).unwrap();
        let mut sizes = vec![0usize; 10];
        for &f in &assignment {
            sizes[f] += 1;
        }
        sizes.sort_unstable();
        assert_eq!(&sizes[..5], &[89, 89, 89, 89, 89]);
        assert_eq!(&sizes[5..], &[90, 90, 90, 90, 90]);

        assert_eq!(kfold_splits(895, 10, 42).unwrap(), assignment_readback(895, 10, 42));
        assert!(matches!(kfold_splits(5, 6, 0), Err(DataError::BadFolds { .. })));
        assert!(matches!(kfold_splits(5, 1, 0), Err(DataError::BadFolds { .. })));
    }

    fn assignment_readback(n: usize, k: usize, seed: u64) -> Vec<usize> {
        kfold_splits(n, k, seed).unwrap()
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = SynthConfig::default();
        let mut b = SynthConfig::default();
        assert_eq!(a.config_hash(), b.config_hash());
        b.noise_std = 0.3;
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
