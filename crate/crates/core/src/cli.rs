//! The `nsgp` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{RunConfig, SEED_ENV};
use crate::data::{
    load_csv, load_model, make_split, read_table, save_model, synth_generate, write_columns, write_dataset, Field,
    SavedModel, SplitData, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::kernels::Smoothness;
use crate::linalg::DenseMatrix;
use crate::metrics::{mean_se, EvalResult};
use crate::recovery::{recover, DEFAULT_POINTS_PER_AXIS};
use crate::training::{model_select, FitReport};

#[derive(Debug, Parser)]
#[command(name = "nsgp", version, about = "Gaussian process regression with network-parameterized nonstationary kernels")]
pub struct Cli {
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid-search and train on a CSV, writing the model file and a JSON report.
    Fit(FitArgs),
    /// Per-row predictive mean and variance for a CSV.
    Predict(PredictArgs),
    /// MSE and log-score of a model on a labelled CSV.
    Eval(EvalArgs),
    /// Draw a synthetic dataset from known nonstationary fields.
    Synth(SynthArgs),
    /// Compare a model's network surfaces with the fields behind synthetic data.
    Recover(RecoverArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON run config; defaults apply when omitted. NSGP_SEED overrides its seed.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Target column, overriding the config.
    #[arg(long)]
    pub target: Option<String>,
    /// Where to write the fitted model (the first partition's when repeating).
    #[arg(long)]
    pub model: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: PathBuf,
    /// Number of random partitions, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV holding at least the model's feature columns.
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV with columns mean, variance, latent_variance.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV holding the feature columns and the target column.
    #[arg(long)]
    pub input: PathBuf,
    /// Also write the metrics JSON here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON SyntheticSpec; when given, the field flags below are ignored.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of rows.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Input dimension.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Constant noise standard deviation.
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    /// Constant lengthscale.
    #[arg(long, default_value_t = 0.2)]
    pub lengthscale: f64,
    /// Base Matérn smoothness: 0.5, 1.5 or 2.5.
    #[arg(long, default_value_t = 0.5)]
    pub nu: f64,
    /// Seed for the inputs, latent draw and noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (features x1..xd and target y).
    #[arg(long)]
    pub output: PathBuf,
    /// Output JSON with the generator settings and true field values.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Model file written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Truth file written by `synth`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Gridded estimate/truth CSV for plotting.
    #[arg(long)]
    pub grid: PathBuf,
    /// Where to write the JSON report; printed to stdout either way.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Grid points per input axis.
    #[arg(long, default_value_t = DEFAULT_POINTS_PER_AXIS)]
    pub points: usize,
}

/// Report for `fit --repeats k`.
#[derive(Debug, Serialize)]
pub struct RepeatedFit {
    pub partitions: Vec<FitReport>,
    pub mse_mean: f64,
    pub mse_se: f64,
    pub log_score_mean: f64,
    pub log_score_se: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Recover(a) => cmd_recover(a),
    }
}

/// The machine-readable line printed on failure.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({ "kind": e.kind(), "message": e.to_string() }).to_string()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::CorruptFile(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
    if let Some(t) = a.target {
        cfg.target = t;
    }
    if a.repeats == 0 {
        return Err(Error::InvalidConfig("--repeats must be at least 1".into()));
    }
    let ds = load_csv(&a.data, &cfg.target)?;
    let base_seed = cfg.train.seed;
    let mut reports = Vec::new();
    for p in 0..a.repeats {
        let mut train = cfg.train.clone();
        train.seed = base_seed.wrapping_add(p);
        let split = SplitData::new(&ds, &make_split(ds.n(), train.seed)?)?;
        let (model, report) = model_select(&split, &cfg.model, &train)?;
        if p == 0 {
            let saved = SavedModel::new(
                model,
                split.standardizer.clone(),
                split.train_x.clone(),
                split.train_y.clone(),
                ds.feature_names.clone(),
                ds.target_name.clone(),
            );
            save_model(&a.model, &saved)?;
        }
        println!(
            "partition {p}: lr={} g={} test mse={:.6} log_score={:.4}",
            report.selected_step_size,
            report.selected_g_variant.name(),
            report.test.mse,
            report.test.log_score
        );
        reports.push(report);
    }
    if reports.len() == 1 {
        return write_json(&a.report, &reports[0]);
    }
    let mse: Vec<f64> = reports.iter().map(|r| r.test.mse).collect();
    let ls: Vec<f64> = reports.iter().map(|r| r.test.log_score).collect();
    let (mse_mean, mse_se) = mean_se(&mse);
    let (log_score_mean, log_score_se) = mean_se(&ls);
    println!("mean: mse={mse_mean:.6} ± {mse_se:.6} log_score={log_score_mean:.4} ± {log_score_se:.4}");
    write_json(
        &a.report,
        &RepeatedFit {
            partitions: reports,
            mse_mean,
            mse_se,
            log_score_mean,
            log_score_se,
        },
    )
}

/// Feature matrix for `saved` from a CSV, matching columns by name.
fn features(saved: &SavedModel, path: &Path) -> Result<(DenseMatrix, Option<Vec<f64>>)> {
    let (header, rows) = read_table(path)?;
    let find = |name: &str| header.iter().position(|h| h == name);
    let cols = saved
        .feature_names
        .iter()
        .map(|f| find(f).ok_or_else(|| Error::dims(format!("column {f:?}"), "no such column")))
        .collect::<Result<Vec<_>>>()?;
    let x = DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| rows[i][cols[j]]);
    let y = find(&saved.target_name).map(|t| rows.iter().map(|r| r[t]).collect());
    Ok((x, y))
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let saved = load_model(&a.model)?;
    let (x, _) = features(&saved, &a.input)?;
    let post = saved.predict_raw(&x)?;
    let var = post.predictive_variance();
    write_columns(
        &a.output,
        &["mean", "variance", "latent_variance"],
        &[&post.mean, &var, &post.latent_variance],
    )?;
    log::info!("wrote {} predictions to {}", post.len(), a.output.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let saved = load_model(&a.model)?;
    let (x, y) = features(&saved, &a.input)?;
    let y = y.ok_or_else(|| Error::MissingTarget(saved.target_name.clone()))?;
    let post = saved.predict_raw(&x)?;
    let result = EvalResult::compute(&y, &post.mean, &post.predictive_variance())?;
    print_json(&result);
    match &a.output {
        Some(p) => write_json(p, &result),
        None => Ok(()),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?
        }
        None => SyntheticSpec {
            n: a.n,
            d: a.d,
            sigma: Field::exp_sin(),
            tau: Field::Constant { value: a.tau },
            lengthscale: Field::Constant { value: a.lengthscale },
            nu: Smoothness::try_from(a.nu)?,
            seed: a.seed,
        },
    };
    let data = synth_generate(&spec)?;
    write_dataset(&a.output, &data.dataset)?;
    write_json(&a.truth, &data.truth)
}

fn cmd_recover(a: RecoverArgs) -> Result<()> {
    let saved = load_model(&a.model)?;
    let text = std::fs::read_to_string(&a.truth).map_err(|source| Error::Io {
        path: a.truth.clone(),
        source,
    })?;
    let truth: crate::data::Truth =
        serde_json::from_str(&text).map_err(|e| Error::CorruptFile(format!("{}: {e}", a.truth.display())))?;
    let rec = recover(&saved, &truth.spec, a.points)?;
    let (header, columns) = rec.table();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let columns: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    write_columns(&a.grid, &header, &columns)?;
    let report = rec.report()?;
    print_json(&report);
    match &a.report {
        Some(p) => write_json(p, &report),
        None => Ok(()),
    }
}
