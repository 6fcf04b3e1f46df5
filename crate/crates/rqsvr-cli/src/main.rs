//! Experiment harness for milling-stability regression with a simulated
//! quantum inner-product estimator.
//!
//! Typical pipeline:
//!
//! ```text
//! rqsvr synth        --out data.csv --seed 42
//! rqsvr fit-features --data data.csv --out params.json
//! rqsvr cv           --data data.csv --features params.json --out cv.json
//! rqsvr train        --data data.csv --features params.json --out model.json --c 1
//! rqsvr predict      --model model.json --data data.csv --out pred.csv --mode shots
//! rqsvr noise-study  --model model.json --out noise.csv
//! rqsvr tool-study   --data data.csv --out tools.json
//! rqsvr export-plot  --input pred.csv --out plot.csv
//! ```

mod commands;
mod config;
mod io;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::{resolve, ExperimentConfig, FileConfig, Mode, Overrides};
use rqsvr::data::{SpeedGrid, ToolPerturbation};

#[derive(Parser)]
#[command(
    name = "rqsvr",
    version,
    about = "Train and evaluate a support vector regressor whose predictions run on a simulated quantum circuit"
)]
struct Cli {
    /// Master seed; all stage randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Protocol knobs shared by the subcommands. Defaults: 10000 shots,
/// 100 repetitions, 10 folds, C grid 1e-3..1e2, epsilon 0.1, C 1,
/// patience 1000, restart std 10.
#[derive(Args, Debug, Default, Clone)]
struct ProtocolFlags {
    /// Shots per prediction in shot mode.
    #[arg(long)]
    shots: Option<u64>,
    /// Repetitions of the noise study per grid point.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Cross-validation fold count.
    #[arg(long)]
    k: Option<usize>,
    /// C grid as a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Tube half-width of the SVR loss.
    #[arg(long)]
    epsilon: Option<f64>,
    /// SVR penalty for train/tool-study.
    #[arg(long)]
    c: Option<f64>,
    /// Non-improving feature-fit trials before stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Std of the Gaussian start perturbation in the feature fit.
    #[arg(long)]
    restart_std: Option<f64>,
    /// Hard cap on feature-fit trials.
    #[arg(long)]
    max_trials: Option<usize>,
    /// Stability threshold: records above it never chattered.
    #[arg(long)]
    ae_max: Option<f64>,
    /// Prediction evaluation mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

impl ProtocolFlags {
    fn overrides(&self, seed: Option<u64>) -> Overrides {
        Overrides {
            seed,
            shots: self.shots,
            repetitions: self.repetitions,
            k: self.k,
            grid: self.grid.clone(),
            epsilon: self.epsilon,
            c: self.c,
            patience: self.patience,
            restart_std: self.restart_std,
            max_trials: self.max_trials,
            ae_max: self.ae_max,
            mode: self.mode,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic milling-stability dataset.
    Synth(SynthArgs),
    /// Fit the cosine feature map on a dataset.
    FitFeatures(FitFeaturesArgs),
    /// Grid-search C with k-fold cross-validation.
    Cv(CvArgs),
    /// Train the regressor at fixed hyperparameters.
    Train(TrainArgs),
    /// Predict stability limits for a dataset.
    Predict(PredictArgs),
    /// Per-point shot-noise statistics over a (speed, wear) grid.
    NoiseStudy(NoiseStudyArgs),
    /// Hold out each tool in turn: fit features and train on the rest.
    ToolStudy(ToolStudyArgs),
    /// Re-emit predictions or noise results as long-format plot data.
    ExportPlot(ExportPlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolFlags,
    /// Number of tools.
    #[arg(long, default_value_t = 3)]
    tools: usize,
    /// Number of evenly spaced wear levels.
    #[arg(long, default_value_t = 5)]
    wear_levels: usize,
    /// Largest wear level in cm².
    #[arg(long, default_value_t = 263.725)]
    wear_max: f64,
    #[arg(long, default_value_t = 4000)]
    speed_min: u32,
    #[arg(long, default_value_t = 8000)]
    speed_max: u32,
    #[arg(long, default_value_t = 50)]
    speed_step: u32,
    /// Gaussian noise std in mm.
    #[arg(long, default_value_t = 0.2)]
    noise_std: f64,
    /// Disable clipping of the stored stability limit.
    #[arg(long)]
    no_clip: bool,
    #[arg(long, default_value_t = 1.08)]
    clip_lo: f64,
    #[arg(long, default_value_t = 5.44)]
    clip_hi: f64,
    /// Machine identifier stored in the records.
    #[arg(long, default_value = "A")]
    machine: String,
    /// Zero-based index of a tool whose response is shifted.
    #[arg(long, requires = "perturb_offset")]
    perturb_tool: Option<usize>,
    /// Shift in mm applied to the perturbed tool.
    #[arg(long, requires = "perturb_tool")]
    perturb_offset: Option<f64>,
}

#[derive(Args)]
struct FitFeaturesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolFlags,
    /// Keep records flagged as fully stable.
    #[arg(long)]
    keep_stable: bool,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolFlags,
    #[arg(long)]
    keep_stable: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolFlags,
    #[arg(long)]
    keep_stable: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolFlags,
    /// Add a sign column (classification output).
    #[arg(long)]
    classify: bool,
    #[arg(long)]
    keep_stable: bool,
}

#[derive(Args)]
struct NoiseStudyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolFlags,
    /// Number of fixed wear levels, evenly spaced over the training range.
    #[arg(long, default_value_t = 5)]
    wear_levels: usize,
    #[arg(long, default_value_t = 4000)]
    speed_min: u32,
    #[arg(long, default_value_t = 8000)]
    speed_max: u32,
    #[arg(long, default_value_t = 50)]
    speed_step: u32,
}

#[derive(Args)]
struct ToolStudyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolFlags,
    #[arg(long)]
    keep_stable: bool,
}

#[derive(Args)]
struct ExportPlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolFlags,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let file = cli.config.as_deref().map(FileConfig::load).transpose()?;

    let resolve_with = |protocol: &ProtocolFlags| -> Result<ExperimentConfig> {
        resolve(file.as_ref(), protocol.overrides(cli.seed))
    };

    match &cli.command {
        Command::Synth(args) => {
            let config = resolve(file.as_ref(), args.protocol.overrides(cli.seed))?;
            let perturb = match (args.perturb_tool, args.perturb_offset) {
                (Some(tool_index), Some(offset)) => Some(ToolPerturbation { tool_index, offset }),
                _ => None,
            };
            if args.wear_levels == 0 {
                bail!("need at least one wear level");
            }
            commands::cmd_synth(
                &config,
                commands::SynthParams {
                    out: args.out.clone(),
                    tools: args.tools,
                    wear_levels: args.wear_levels,
                    wear_max: args.wear_max,
                    speed: SpeedGrid {
                        min: args.speed_min,
                        max: args.speed_max,
                        step: args.speed_step,
                    },
                    noise_std: args.noise_std,
                    clip: (!args.no_clip).then_some((args.clip_lo, args.clip_hi)),
                    machine: args.machine.clone(),
                    perturb,
                },
            )
        }
        Command::FitFeatures(args) => {
            let config = resolve_with(&args.protocol)?;
            commands::cmd_fit_features(&config, &args.data, &args.out, args.keep_stable)
        }
        Command::Cv(args) => {
            let config = resolve_with(&args.protocol)?;
            commands::cmd_cv(&config, &args.data, &args.features, &args.out, args.keep_stable)
        }
        Command::Train(args) => {
            let config = resolve_with(&args.protocol)?;
            commands::cmd_train(&config, &args.data, &args.features, &args.out, args.keep_stable)
        }
        Command::Predict(args) => {
            let config = resolve_with(&args.protocol)?;
            commands::cmd_predict(
                &config,
                &args.model,
                &args.data,
                &args.out,
                args.classify,
                args.keep_stable,
            )
        }
        Command::NoiseStudy(args) => {
            let config = resolve_with(&args.protocol)?;
            commands::cmd_noise_study(
                &config,
                &args.model,
                &args.out,
                commands::NoiseGrid {
                    wear_levels: args.wear_levels,
                    speed: SpeedGrid {
                        min: args.speed_min,
                        max: args.speed_max,
                        step: args.speed_step,
                    },
                },
            )
        }
        Command::ToolStudy(args) => {
            let config = resolve_with(&args.protocol)?;
            commands::cmd_tool_study(&config, &args.data, &args.out, args.keep_stable)
        }
        Command::ExportPlot(args) => {
            let config = resolve_with(&args.protocol)?;
            commands::cmd_export_plot(&config, &args.input, &args.out)
        }
    }
}
