//! Artifact input/output.
//!
//! Every output is written atomically (temp file plus rename) and only
//! after the computation succeeded, so failed runs leave no partial
//! artifacts behind. All JSON artifacts carry a `format_version` field and
//! unknown versions are rejected on read.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rqsvr::features::FeatureParams;
use rqsvr::svr::CvReport;

pub const FORMAT_VERSION: u32 = 1;

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file next to {}", path.display()))?;
    std::io::Write::write_all(&mut tmp, contents.as_bytes())?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn read_versioned_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let probe: VersionProbe = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a versioned JSON document", path.display()))?;
    if probe.format_version != FORMAT_VERSION {
        bail!(
            "{}: unsupported format version {} (expected {FORMAT_VERSION})",
            path.display(),
            probe.format_version
        );
    }
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_versioned_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Fitted feature-map parameters as a standalone artifact.
#[derive(Serialize, Deserialize)]
pub struct FeatureParamsDoc {
    pub format_version: u32,
    #[serde(flatten)]
    pub params: FeatureParams,
}

/// Cross-validation report artifact.
#[derive(Serialize, Deserialize)]
pub struct CvDoc {
    pub format_version: u32,
    #[serde(flatten)]
    pub report: CvReport,
}

/// One line of the predictions artifact.
#[derive(Debug, Clone)]
pub struct PredictionRow {
    pub machine: String,
    pub tool: String,
    pub spindle_speed: u32,
    pub wear: f64,
    pub ae_lim: f64,
    pub predicted: f64,
    pub stderr: f64,
    pub sign: Option<i8>,
}

pub const PREDICTIONS_HEADER: &str =
    "machine,tool,spindle_speed_rpm,wear_cm2,ae_lim_mm,predicted_mm,stderr_mm";

pub fn predictions_csv(rows: &[PredictionRow], classify: bool) -> String {
    let mut out = String::new();
    out.push_str(PREDICTIONS_HEADER);
    if classify {
        out.push_str(",sign");
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            r.machine,
            r.tool,
            r.spindle_speed,
            rqsvr::data::format_real(r.wear),
            rqsvr::data::format_real(r.ae_lim),
            r.predicted,
            r.stderr
        ));
        if let Some(s) = r.sign {
            out.push_str(&format!(",{s:+}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    let classify = header == format!("{PREDICTIONS_HEADER},sign");
    if header != PREDICTIONS_HEADER && !classify {
        bail!("{} does not carry the predictions schema", path.display());
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).with_context(|| format!("row {}: missing field {idx}", i + 1))
        };
        rows.push(PredictionRow {
            machine: field(0)?.to_string(),
            tool: field(1)?.to_string(),
            spindle_speed: field(2)?.parse()?,
            wear: field(3)?.parse()?,
            ae_lim: field(4)?.parse()?,
            predicted: field(5)?.parse()?,
            stderr: field(6)?.parse()?,
            sign: if classify { Some(field(7)?.parse()?) } else { None },
        });
    }
    Ok(rows)
}

/// One grid point of the shot-noise study.
#[derive(Debug, Clone)]
pub struct NoiseRow {
    pub wear: f64,
    pub spindle_speed: u32,
    pub exact: f64,
    pub mean: f64,
    pub std: f64,
    pub theory_std: f64,
}

pub const NOISE_HEADER: &str = "wear_cm2,spindle_speed_rpm,exact_mm,mean_mm,std_mm,theory_std_mm";

pub fn noise_csv(rows: &[NoiseRow]) -> String {
    let mut out = String::new();
    out.push_str(NOISE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rqsvr::data::format_real(r.wear),
            r.spindle_speed,
            r.exact,
            r.mean,
            r.std,
            r.theory_std
        ));
    }
    out
}

pub fn read_noise_csv(path: &Path) -> Result<Vec<NoiseRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != NOISE_HEADER {
        bail!("{} does not carry the noise-study schema", path.display());
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(NoiseRow {
            wear: record[0].parse()?,
            spindle_speed: record[1].parse()?,
            exact: record[2].parse()?,
            mean: record[3].parse()?,
            std: record[4].parse()?,
            theory_std: record[5].parse()?,
        });
    }
    Ok(rows)
}

pub const PLOT_HEADER: &str = "series,spindle_speed_rpm,wear_cm2,value,std";

/// One long-format plot point.
#[derive(Debug, Clone)]
pub struct PlotRow {
    pub series: &'static str,
    pub spindle_speed: u32,
    pub wear: f64,
    pub value: f64,
    pub std: f64,
}

pub fn plot_csv(rows: &[PlotRow]) -> String {
    let mut out = String::new();
    out.push_str(PLOT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.series,
            r.spindle_speed,
            rqsvr::data::format_real(r.wear),
            r.value,
            r.std
        ));
    }
    out
}
