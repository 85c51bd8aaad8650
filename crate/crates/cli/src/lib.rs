//! Command-line front end: dataset generation, identification runs, model
//! evaluation and report verification.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use narx_core::benchmarks::{Generator, Sidecar};
use narx_core::io::{read_json, write_atomic, write_json_atomic};
use narx_core::two_tier::{evolve_order, IdentifiedModel};
use narx_core::{Dataset, PredictionMode, Schema};

use config::{DataSource, RunConfig};
use report::RunReport;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] narx_core::Error),

    #[error("usage: {0}")]
    Usage(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Verification(_) => "verification",
        }
    }

    /// Single-line JSON for the error stream.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "narx", version, about = "Two-tier NARX structure and weight identification")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and its ground-truth sidecar.
    Generate(GenerateArgs),
    /// Search the lag structure, train the network, write model and report.
    Identify(IdentifyArgs),
    /// Recompute every error figure of a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Rebuild a run report, optionally checking it against a stored one.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenerateArgs {
    /// siso_narendra or mimo_linear.
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Noise level relative to each output's half-range.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IdentifyArgs {
    /// Parameter preset, used when no configuration file is given.
    #[arg(long)]
    pub preset: Option<String>,
    /// Generate the data with this generator instead of reading it.
    #[arg(long, conflicts_with = "data")]
    pub generator: Option<String>,
    /// CSV data file; needs --inputs and --outputs.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub inputs: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub outputs: Vec<String>,
    #[arg(long)]
    pub max_lag: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Model JSON written by `identify`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the model's channels.
    #[arg(long)]
    pub data: PathBuf,
    /// Tolerance for `max |y - y_hat|`, physical units.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Stored report to check; fails on any discrepancy above 1e-9.
    #[arg(long)]
    pub verify: Option<PathBuf>,
}

/// Files written by a command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
}

pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const EVALUATION_FILE: &str = "evaluation.json";

fn out_dir(common: &Common, cfg: Option<&RunConfig>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out_dir.as_ref().map(|d| c.base_dir.join(d))))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn csv_bytes(d: &Dataset) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    narx_core::data::write_csv_to(d, &mut buf)?;
    Ok(buf)
}

fn sidecar(gen: Generator, source: &DataSource, run_seed: u64, d: &Dataset) -> Option<Sidecar> {
    match source {
        DataSource::Generator {
            n_samples,
            noise,
            excitation,
            seed,
            ..
        } => Some(Sidecar {
            system: gen.system(*noise),
            n_samples: *n_samples,
            excitation: excitation.clone(),
            seed: seed.unwrap_or(run_seed),
            inputs: d.input_names(),
            outputs: d.output_names(),
        }),
        DataSource::Csv { .. } => None,
    }
}

pub fn cmd_generate(common: &Common, args: &GenerateArgs) -> Result<Outcome, CliError> {
    let cfg = common.config.as_deref().map(RunConfig::load).transpose()?;
    let mut source = match cfg.as_ref().and_then(|c| c.data.clone()) {
        Some(s @ DataSource::Generator { .. }) => s,
        Some(DataSource::Csv { .. }) => {
            return Err(CliError::Usage(
                "the configuration's data source is a CSV file, not a generator".into(),
            ))
        }
        None => DataSource::generator(args.generator.as_deref().ok_or_else(|| {
            CliError::Usage("generate needs --generator or a configuration with a generator".into())
        })?),
    };
    let run_seed = common.seed.or(cfg.as_ref().map(|c| c.tier.seed)).unwrap_or(0);
    if let DataSource::Generator {
        generator,
        n_samples,
        noise,
        seed,
        ..
    } = &mut source
    {
        if let Some(g) = &args.generator {
            *generator = g.clone();
        }
        if let Some(n) = args.samples {
            *n_samples = n;
        }
        if let Some(x) = args.noise {
            *noise = x;
        }
        if common.seed.is_some() {
            *seed = common.seed;
        }
    }
    let DataSource::Generator { generator, .. } = &source else {
        unreachable!("generator source");
    };
    let gen: Generator = generator.parse()?;
    let d = source.load(Path::new("."), run_seed)?;
    let dir = out_dir(common, cfg.as_ref());
    ensure_dir(&dir)?;
    let csv_path = dir.join(format!("{}.csv", gen.name()));
    let side_path = dir.join(format!("{}.json", gen.name()));
    write_atomic(&csv_path, &csv_bytes(&d)?)?;
    write_json_atomic(&side_path, &sidecar(gen, &source, run_seed, &d))?;
    Ok(Outcome {
        written: vec![csv_path, side_path],
    })
}

/// Predictions table in physical units: `k`, then actual, one-step and
/// free-run columns for every output.
pub fn predictions_csv(model: &IdentifiedModel, data: &Dataset) -> Result<Vec<u8>, CliError> {
    let one = model.predict(data, PredictionMode::OneStep)?;
    let free = model.predict(data, PredictionMode::FreeRun)?;
    let actual = one.actual(data);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["k".to_string()];
    for name in &model.outputs {
        header.extend([
            format!("{name}_actual"),
            format!("{name}_onestep"),
            format!("{name}_freerun"),
        ]);
    }
    w.write_record(&header).map_err(narx_core::Error::from)?;
    for (i, k) in (one.start..one.end()).enumerate() {
        let mut row = vec![k.to_string()];
        for j in 0..model.outputs.len() {
            row.extend([
                actual[j][i].to_string(),
                one.channels[j][i].to_string(),
                free.channels[j][i].to_string(),
            ]);
        }
        w.write_record(&row).map_err(narx_core::Error::from)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("flushing predictions: {e}")))
}

fn identify_config(common: &Common, args: &IdentifyArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match (&common.config, &args.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(p)) => RunConfig::from_preset(p)?,
        (None, None) => {
            return Err(CliError::Usage("identify needs --config or --preset".into()));
        }
    };
    if let Some(g) = &args.generator {
        cfg.data = Some(DataSource::generator(g));
    } else if let Some(path) = &args.data {
        if args.inputs.is_empty() || args.outputs.is_empty() {
            return Err(CliError::Usage("--data needs --inputs and --outputs".into()));
        }
        cfg.data = Some(DataSource::Csv {
            path: path.clone(),
            inputs: args.inputs.clone(),
            outputs: args.outputs.clone(),
            sample_period: 1.0,
        });
        cfg.base_dir = PathBuf::from(".");
    }
    if let Some(s) = common.seed {
        cfg.tier.seed = s;
    }
    if let Some(l) = args.max_lag {
        cfg.tier.max_lag = l;
    }
    cfg.tier.validate()?;
    Ok(cfg)
}

pub fn cmd_identify(common: &Common, args: &IdentifyArgs) -> Result<Outcome, CliError> {
    let cfg = identify_config(common, args)?;
    let source = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("no data source: set `data` in the configuration, --data or --generator".into()))?;
    let data = source.load(&cfg.base_dir, cfg.tier.seed)?;
    let dir = out_dir(common, Some(&cfg));
    ensure_dir(&dir)?;

    let started = Instant::now();
    let model = evolve_order(&data, &cfg.tier)?;
    let mut report = RunReport::build(&model, &data, cfg.report.epsilon)?;
    report.wall_clock_seconds = Some(started.elapsed().as_secs_f64());

    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), CliError> {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    put(DATA_FILE, csv_bytes(&data)?)?;
    if let DataSource::Generator { generator, .. } = &source {
        let gen: Generator = generator.parse()?;
        let side = sidecar(gen, &source, cfg.tier.seed, &data);
        put(TRUTH_FILE, json_bytes(&side))?;
    }
    put(PREDICTIONS_FILE, predictions_csv(&model, &data)?)?;
    put(MODEL_FILE, json_bytes(&model))?;
    put(REPORT_FILE, json_bytes(&report))?;
    Ok(Outcome { written })
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s.into_bytes()
}

/// Load a CSV holding the model's channels. A missing channel is reported as
/// an incompatibility naming the model's channel set.
pub fn load_for_model(model: &IdentifiedModel, path: &Path) -> Result<Dataset, CliError> {
    let schema = Schema::new(model.inputs.clone(), model.outputs.clone());
    match narx_core::data::load_csv(path, &schema) {
        Err(narx_core::Error::Schema { column }) => Err(narx_core::Error::Compatibility(format!(
            "data file {} lacks channel `{column}`; model needs inputs {:?} and outputs {:?}",
            path.display(),
            model.inputs,
            model.outputs
        ))
        .into()),
        other => Ok(other?),
    }
}

pub fn cmd_evaluate(common: &Common, args: &EvaluateArgs) -> Result<Outcome, CliError> {
    let model = IdentifiedModel::load(&args.model)?;
    let data = load_for_model(&model, &args.data)?;
    let report = RunReport::build(&model, &data, args.epsilon)?;
    let dir = out_dir(common, None);
    ensure_dir(&dir)?;
    let path = dir.join(EVALUATION_FILE);
    write_atomic(&path, &json_bytes(&report))?;
    Ok(Outcome { written: vec![path] })
}

pub fn cmd_report(common: &Common, args: &ReportArgs) -> Result<Outcome, CliError> {
    let model = IdentifiedModel::load(&args.model)?;
    let data = load_for_model(&model, &args.data)?;
    match &args.verify {
        Some(stored_path) => {
            let stored: serde_json::Value = read_json(stored_path)?;
            let epsilon = stored
                .pointer("/tolerance/epsilon")
                .and_then(serde_json::Value::as_f64)
                .or(args.epsilon);
            let fresh = RunReport::build(&model, &data, epsilon)?;
            report::verify(&stored, &fresh)?;
            Ok(Outcome::default())
        }
        None => {
            let fresh = RunReport::build(&model, &data, args.epsilon)?;
            let dir = out_dir(common, None);
            ensure_dir(&dir)?;
            let path = dir.join(REPORT_FILE);
            write_atomic(&path, &json_bytes(&fresh))?;
            Ok(Outcome { written: vec![path] })
        }
    }
}

/// Run a parsed command line on a pool of the requested size.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(&cli.common, a),
        Command::Identify(a) => cmd_identify(&cli.common, a),
        Command::Evaluate(a) => cmd_evaluate(&cli.common, a),
        Command::Report(a) => cmd_report(&cli.common, a),
    })
}
