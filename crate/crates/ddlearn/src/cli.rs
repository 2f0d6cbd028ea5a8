//! Command-line front end: train / eval / sweep / synth subcommands, flat
//! key-value config files (flags win), run manifests, and CSV outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::classifiers::LabelMatrix;
use crate::data_io::{self, Dataset, SyntheticSpec};
use crate::dictionary::InitKind;
use crate::error::{Error, Result};
use crate::inference::{self, PredictMode, PredictOptions};
use crate::losses::{LossKind, DEFAULT_HINGE_EPS, DEFAULT_HINGE_RHO};
use crate::model;
use crate::trainer::{self, DdlModel, TrainConfig};

pub const TRACE_SCHEMA: &str = "ddlearn.trace.v1";
pub const SWEEP_SCHEMA: &str = "ddlearn.sweep.v1";
pub const SWEEP_ARGMIN_SCHEMA: &str = "ddlearn.sweep_argmin.v1";

/// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::NonFinite(_) => 2,
        Error::NonConvergence(_) | Error::Numeric(_) => 4,
        _ => 3,
    }
}

#[derive(Parser, Debug)]
#[command(name = "ddlearn", version, about = "Discriminative dictionary learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model (joint by default, decoupled with --baseline).
    Train(TrainArgs),
    /// Evaluate a saved model on a test set.
    Eval(EvalArgs),
    /// Train and evaluate over a (K, T, loss) grid, joint vs baseline.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset with its planted ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct CommonDataArgs {
    /// Config file of `key = value` lines; flags override file entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Samples file (IDX images or delimited table).
    #[arg(long)]
    data: Option<String>,
    /// Labels file (IDX labels; unused for delimited tables).
    #[arg(long)]
    labels: Option<String>,
    /// Input format: idx | csv.
    #[arg(long)]
    format: Option<String>,
    /// Label column for delimited tables.
    #[arg(long)]
    label_column: Option<usize>,
    /// Cell delimiter for delimited tables.
    #[arg(long)]
    delimiter: Option<char>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Master RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default, Clone)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonDataArgs,
    /// Dictionary size (atom count).
    #[arg(long)]
    k: Option<usize>,
    /// Sparsity budget per code.
    #[arg(long)]
    t: Option<usize>,
    /// Classification loss: square | exp | logistic | hinge.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    q_max: Option<usize>,
    #[arg(long)]
    p_max: Option<usize>,
    /// Relative-change stop criterion for both loops.
    #[arg(long)]
    stop_rel_change: Option<f64>,
    /// Classifier ridge; defaults to 1e-6 * N.
    #[arg(long)]
    ridge: Option<f64>,
    /// Dictionary initialization: samples | gaussian.
    #[arg(long)]
    init: Option<String>,
    /// Train the decoupled baseline instead of the joint model.
    #[arg(long)]
    baseline: bool,
    /// File of 0/1 lines marking which samples are labeled.
    #[arg(long)]
    semi_supervised_mask: Option<String>,
    /// Smooth hinge transition half-width.
    #[arg(long)]
    hinge_rho: Option<f64>,
    /// Smooth hinge curvature floor.
    #[arg(long)]
    hinge_eps: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonDataArgs,
    /// Saved model file.
    #[arg(long)]
    model: Option<String>,
    /// Inference mode: fast | full.
    #[arg(long)]
    mode: Option<String>,
    /// Encode over the identity-augmented dictionary.
    #[arg(long)]
    robust: bool,
    /// Test-time sparsity budget (defaults to the model's T).
    #[arg(long)]
    t_test: Option<usize>,
    /// Extra budget for identity atoms in robust mode.
    #[arg(long)]
    e_budget: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonDataArgs,
    /// Comma-separated dictionary sizes.
    #[arg(long)]
    k_grid: Option<String>,
    /// Comma-separated sparsity budgets.
    #[arg(long)]
    t_grid: Option<String>,
    /// Comma-separated losses (default: all four).
    #[arg(long)]
    loss_grid: Option<String>,
    /// Held-out fraction when no explicit test set is given.
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    q_max: Option<usize>,
    #[arg(long)]
    p_max: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonDataArgs,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k_true: Option<usize>,
    #[arg(long)]
    c: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_true: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    /// Fraction of labels flipped to a different class.
    #[arg(long)]
    label_noise: Option<f64>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; usage problems are config errors.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Synth(a) => cmd_synth(&a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

// ---------------------------------------------------------------------------
// Config resolution: defaults < config file < flags.

#[derive(Debug, Default, Clone)]
struct ConfigMap {
    values: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "data",
    "labels",
    "format",
    "label_column",
    "delimiter",
    "out_dir",
    "seed",
    "k",
    "t",
    "loss",
    "q_max",
    "p_max",
    "stop_rel_change",
    "ridge",
    "init",
    "baseline",
    "semi_supervised_mask",
    "hinge_rho",
    "hinge_eps",
    "model",
    "mode",
    "robust",
    "t_test",
    "e_budget",
    "k_grid",
    "t_grid",
    "loss_grid",
    "test_fraction",
    "d",
    "k_true",
    "c",
    "n",
    "t_true",
    "noise_std",
    "label_noise",
];

impl ConfigMap {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            for (line_no, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "config line {} is not `key = value`: {line:?}",
                        line_no + 1
                    ))
                })?;
                let key = key.trim().to_string();
                // manifest.* entries are run metadata, not settings.
                if key.starts_with("manifest.") {
                    continue;
                }
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    return Err(Error::InvalidConfig(format!(
                        "unknown config key {key:?} (line {})",
                        line_no + 1
                    )));
                }
                values.insert(key, value.trim().to_string());
            }
        }
        Ok(ConfigMap { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("config key {key} has unparsable value {raw:?}"))
            }),
        }
    }
}

fn parse_loss(name: &str, rho: f64, eps: f64) -> Result<LossKind> {
    match name {
        "square" => Ok(LossKind::Square),
        "exp" => Ok(LossKind::Exponential),
        "logistic" => Ok(LossKind::Logistic),
        "hinge" => LossKind::smooth_hinge(rho, eps),
        other => Err(Error::InvalidConfig(format!(
            "unknown loss {other:?}; expected square | exp | logistic | hinge"
        ))),
    }
}

fn parse_init(name: &str) -> Result<InitKind> {
    match name {
        "samples" => Ok(InitKind::FromSamples),
        "gaussian" => Ok(InitKind::GaussianRandom),
        other => Err(Error::InvalidConfig(format!(
            "unknown init {other:?}; expected samples | gaussian"
        ))),
    }
}

fn parse_mode(name: &str) -> Result<PredictMode> {
    match name {
        "fast" => Ok(PredictMode::FastTsc),
        "full" => Ok(PredictMode::FullDsc),
        other => Err(Error::InvalidConfig(format!(
            "unknown mode {other:?}; expected fast | full"
        ))),
    }
}

#[derive(Debug, Clone)]
struct DataSettings {
    data: String,
    labels: Option<String>,
    format: String,
    label_column: usize,
    delimiter: char,
}

impl DataSettings {
    fn resolve(common: &CommonDataArgs, file: &ConfigMap) -> Result<Self> {
        let data = common
            .data
            .clone()
            .or_else(|| file.get("data").map(String::from))
            .ok_or_else(|| Error::InvalidConfig("missing --data".into()))?;
        let labels = common
            .labels
            .clone()
            .or_else(|| file.get("labels").map(String::from));
        let format = common
            .format
            .clone()
            .or_else(|| file.get("format").map(String::from))
            .unwrap_or_else(|| "csv".to_string());
        if format != "idx" && format != "csv" {
            return Err(Error::InvalidConfig(format!(
                "unknown format {format:?}; expected idx | csv"
            )));
        }
        if format == "idx" && labels.is_none() {
            return Err(Error::InvalidConfig(
                "idx format needs --labels (the IDX label file)".into(),
            ));
        }
        let label_column = match common.label_column {
            Some(v) => v,
            None => file.parsed("label_column")?.unwrap_or(0),
        };
        let delimiter = match common.delimiter {
            Some(v) => v,
            None => file
                .get("delimiter")
                .map(|s| {
                    let mut chars = s.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => Ok(c),
                        _ => Err(Error::InvalidConfig(format!(
                            "delimiter must be one character, got {s:?}"
                        ))),
                    }
                })
                .transpose()?
                .unwrap_or(','),
        };
        Ok(DataSettings {
            data,
            labels,
            format,
            label_column,
            delimiter,
        })
    }

    fn load(&self) -> Result<Dataset> {
        match self.format.as_str() {
            "idx" => data_io::load_idx(&self.data, self.labels.as_ref().unwrap()),
            _ => data_io::load_delimited(&self.data, self.delimiter, self.label_column),
        }
    }
}

fn resolve_out_dir(common: &CommonDataArgs, file: &ConfigMap) -> Result<PathBuf> {
    let dir = common
        .out_dir
        .clone()
        .or_else(|| file.get("out_dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    Ok(dir)
}

fn resolve_seed(common: &CommonDataArgs, file: &ConfigMap) -> Result<u64> {
    Ok(match common.seed {
        Some(s) => s,
        None => file.parsed("seed")?.unwrap_or(0),
    })
}

fn file_digest(path: &str) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Run manifest: metadata plus every resolved setting, written as a config
/// file so the same run can be reproduced with `--config <manifest>`.
fn write_manifest(
    path: &Path,
    command: &str,
    settings: &BTreeMap<String, String>,
    digests: &BTreeMap<String, String>,
    outputs: &[&Path],
) -> Result<()> {
    let mut text = String::new();
    text.push_str("# ddlearn run manifest\n");
    text.push_str(&format!("manifest.command = {command}\n"));
    text.push_str(&format!(
        "manifest.tool_version = {}\n",
        env!("CARGO_PKG_VERSION")
    ));
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    text.push_str(&format!("manifest.created_unix = {created}\n"));
    for (name, digest) in digests {
        text.push_str(&format!("manifest.digest.{name} = sha256:{digest}\n"));
    }
    for out in outputs {
        text.push_str(&format!("manifest.output = {}\n", out.display()));
    }
    for (key, value) in settings {
        text.push_str(&format!("{key} = {value}\n"));
    }
    write_text(path, &text)
}

fn trace_csv(model: &DdlModel) -> String {
    let mut out = format!("# schema: {TRACE_SCHEMA}\n");
    out.push_str("iter,objective,rep_cost,cls_cost,log_prior_terms\n");
    for (i, row) in model.objective_trace.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            row.total, row.rep_cost, row.cls_cost, row.log_prior
        ));
    }
    out
}

fn read_mask_file(path: &str) -> Result<Vec<bool>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut mask = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "0" | "false" => mask.push(false),
            "1" | "true" => mask.push(true),
            other => {
                return Err(Error::Data(format!(
                    "mask line {} must be 0/1, got {other:?}",
                    line_no + 1
                )))
            }
        }
    }
    if mask.is_empty() {
        return Err(Error::Data(format!("mask file {path} is empty")));
    }
    Ok(mask)
}

struct ResolvedTrain {
    data: DataSettings,
    out_dir: PathBuf,
    config: TrainConfig,
    baseline: bool,
    mask_path: Option<String>,
}

fn resolve_train(args: &TrainArgs) -> Result<ResolvedTrain> {
    let file = ConfigMap::load(args.common.config.as_ref())?;
    let data = DataSettings::resolve(&args.common, &file)?;
    let out_dir = resolve_out_dir(&args.common, &file)?;
    let seed = resolve_seed(&args.common, &file)?;

    let k = match args.k {
        Some(v) => v,
        None => file
            .parsed("k")?
            .ok_or_else(|| Error::InvalidConfig("missing --k".into()))?,
    };
    let t = match args.t {
        Some(v) => v,
        None => file
            .parsed("t")?
            .ok_or_else(|| Error::InvalidConfig("missing --t".into()))?,
    };
    let hinge_rho = match args.hinge_rho {
        Some(v) => v,
        None => file.parsed("hinge_rho")?.unwrap_or(DEFAULT_HINGE_RHO),
    };
    let hinge_eps = match args.hinge_eps {
        Some(v) => v,
        None => file.parsed("hinge_eps")?.unwrap_or(DEFAULT_HINGE_EPS),
    };
    let loss_name = args
        .loss
        .clone()
        .or_else(|| file.get("loss").map(String::from))
        .unwrap_or_else(|| "square".to_string());
    let loss = parse_loss(&loss_name, hinge_rho, hinge_eps)?;

    let mut config = TrainConfig::new(k, t, loss);
    config.seed = seed;
    if let Some(q) = args.q_max {
        config.q_max = q;
    } else if let Some(q) = file.parsed("q_max")? {
        config.q_max = q;
    }
    if let Some(p) = args.p_max {
        config.p_max = p;
    } else if let Some(p) = file.parsed("p_max")? {
        config.p_max = p;
    }
    if let Some(s) = args.stop_rel_change {
        config.stop_rel_change = s;
    } else if let Some(s) = file.parsed("stop_rel_change")? {
        config.stop_rel_change = s;
    }
    if let Some(r) = args.ridge {
        config.ridge = Some(r);
    } else if let Some(r) = file.parsed("ridge")? {
        config.ridge = Some(r);
    }
    let init_name = args
        .init
        .clone()
        .or_else(|| file.get("init").map(String::from))
        .unwrap_or_else(|| "samples".to_string());
    config.init_kind = parse_init(&init_name)?;

    let baseline = args.baseline
        || file
            .parsed::<bool>("baseline")?
            .unwrap_or(false);
    let mask_path = args
        .semi_supervised_mask
        .clone()
        .or_else(|| file.get("semi_supervised_mask").map(String::from));
    if let Some(path) = &mask_path {
        config.semi_supervised_mask = Some(read_mask_file(path)?);
    }
    config.validate()?;
    Ok(ResolvedTrain {
        data,
        out_dir,
        config,
        baseline,
        mask_path,
    })
}

fn train_settings_map(r: &ResolvedTrain) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("data".into(), r.data.data.clone());
    if let Some(labels) = &r.data.labels {
        m.insert("labels".into(), labels.clone());
    }
    m.insert("format".into(), r.data.format.clone());
    m.insert("label_column".into(), r.data.label_column.to_string());
    m.insert("delimiter".into(), r.data.delimiter.to_string());
    m.insert("k".into(), r.config.k.to_string());
    m.insert("t".into(), r.config.t.to_string());
    m.insert("loss".into(), r.config.loss.name().into());
    if let LossKind::SmoothHinge { rho, eps } = r.config.loss {
        m.insert("hinge_rho".into(), format!("{rho}"));
        m.insert("hinge_eps".into(), format!("{eps}"));
    }
    m.insert("q_max".into(), r.config.q_max.to_string());
    m.insert("p_max".into(), r.config.p_max.to_string());
    m.insert(
        "stop_rel_change".into(),
        format!("{}", r.config.stop_rel_change),
    );
    if let Some(ridge) = r.config.ridge {
        m.insert("ridge".into(), format!("{ridge}"));
    }
    m.insert(
        "init".into(),
        match r.config.init_kind {
            InitKind::FromSamples => "samples".into(),
            InitKind::GaussianRandom => "gaussian".into(),
        },
    );
    m.insert("seed".into(), r.config.seed.to_string());
    m.insert("baseline".into(), r.baseline.to_string());
    if let Some(path) = &r.mask_path {
        m.insert("semi_supervised_mask".into(), path.clone());
    }
    m
}

/// Labels for training: with a mask, the label matrix covers only the
/// labeled samples (in order).
fn training_labels(dataset: &Dataset, config: &TrainConfig) -> Result<LabelMatrix> {
    match &config.semi_supervised_mask {
        None => dataset.label_matrix(),
        Some(mask) => {
            if mask.len() != dataset.len() {
                return Err(Error::DimensionMismatch {
                    context: "mask length vs dataset size",
                    expected: dataset.len(),
                    got: mask.len(),
                });
            }
            let kept: Vec<usize> = mask
                .iter()
                .enumerate()
                .filter_map(|(i, &m)| m.then(|| dataset.labels[i]))
                .collect();
            LabelMatrix::from_class_indices(&kept, dataset.class_count)
        }
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let resolved = resolve_train(args)?;
    let dataset = resolved.data.load()?;
    let labels = training_labels(&dataset, &resolved.config)?;

    let started = Instant::now();
    let model = if resolved.baseline {
        trainer::train_baseline(&dataset.samples.view(), &labels, &resolved.config)?
    } else {
        trainer::train(&dataset.samples.view(), &labels, &resolved.config)?
    };
    let elapsed = started.elapsed().as_secs_f64();

    let model_path = resolved.out_dir.join("model.ddlm");
    let trace_path = resolved.out_dir.join("objective_trace.csv");
    let manifest_path = resolved.out_dir.join("manifest.txt");
    model::save_model(&model, model_path.to_str().unwrap())?;
    write_text(&trace_path, &trace_csv(&model))?;

    let mut digests = BTreeMap::new();
    digests.insert("data".to_string(), file_digest(&resolved.data.data)?);
    if let Some(labels_path) = &resolved.data.labels {
        digests.insert("labels".to_string(), file_digest(labels_path)?);
    }
    write_manifest(
        &manifest_path,
        "train",
        &train_settings_map(&resolved),
        &digests,
        &[&model_path, &trace_path],
    )?;

    let first = model.objective_trace.first().map(|r| r.total).unwrap_or(0.0);
    let last = model.objective_trace.last().map(|r| r.total).unwrap_or(0.0);
    println!(
        "trained {} model: K={} T={} loss={} iterations={} objective {first} -> {last} ({elapsed:.2}s)",
        if resolved.baseline { "baseline" } else { "ddl" },
        model.dictionary.atom_count(),
        model.config.t,
        model.config.loss.name(),
        model.objective_trace.len() - 1,
    );
    println!("model: {}", model_path.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let file = ConfigMap::load(args.common.config.as_ref())?;
    let data = DataSettings::resolve(&args.common, &file)?;
    let out_dir = resolve_out_dir(&args.common, &file)?;
    let model_path = args
        .model
        .clone()
        .or_else(|| file.get("model").map(String::from))
        .ok_or_else(|| Error::InvalidConfig("missing --model".into()))?;
    let model = model::load_model(&model_path)?;

    let mode_name = args
        .mode
        .clone()
        .or_else(|| file.get("mode").map(String::from))
        .unwrap_or_else(|| "fast".to_string());
    let robust = args.robust || file.parsed::<bool>("robust")?.unwrap_or(false);
    let t_test = match args.t_test {
        Some(v) => v,
        None => file.parsed("t_test")?.unwrap_or(model.config.t),
    };
    let e_budget = match args.e_budget {
        Some(v) => v,
        None => file.parsed("e_budget")?.unwrap_or(0),
    };
    let opts = PredictOptions {
        mode: parse_mode(&mode_name)?,
        robust,
        t_test,
        e_budget,
    };

    let dataset = data.load()?;
    if dataset.signal_dim() != model.dictionary.signal_dim() {
        return Err(Error::DimensionMismatch {
            context: "test sample dimension vs model dictionary",
            expected: model.dictionary.signal_dim(),
            got: dataset.signal_dim(),
        });
    }
    let metrics = inference::evaluate(&model, &dataset.samples.view(), &dataset.labels, &opts)?;

    let metrics_path = out_dir.join("metrics.csv");
    let mut text = format!("# schema: {}\n", inference::METRICS_SCHEMA);
    text.push_str(&inference::metrics_csv_header(
        model.classifiers.class_count(),
    ));
    text.push('\n');
    text.push_str(&inference::metrics_csv_row(
        &dataset.provenance,
        &model,
        &opts,
        &metrics,
    ));
    text.push('\n');
    write_text(&metrics_path, &text)?;

    println!(
        "error_rate = {} over {} samples (mode={mode_name}, robust={robust})",
        metrics.error_rate,
        dataset.len()
    );
    println!("metrics: {}", metrics_path.display());
    Ok(())
}

fn parse_grid<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(part.parse::<T>().map_err(|_| {
            Error::InvalidConfig(format!("bad {what} grid entry {part:?}"))
        })?);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!("empty {what} grid")));
    }
    Ok(out)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let file = ConfigMap::load(args.common.config.as_ref())?;
    let data = DataSettings::resolve(&args.common, &file)?;
    let out_dir = resolve_out_dir(&args.common, &file)?;
    let seed = resolve_seed(&args.common, &file)?;

    let k_grid_raw = args
        .k_grid
        .clone()
        .or_else(|| file.get("k_grid").map(String::from))
        .ok_or_else(|| Error::InvalidConfig("missing --k-grid".into()))?;
    let t_grid_raw = args
        .t_grid
        .clone()
        .or_else(|| file.get("t_grid").map(String::from))
        .ok_or_else(|| Error::InvalidConfig("missing --t-grid".into()))?;
    let loss_grid_raw = args
        .loss_grid
        .clone()
        .or_else(|| file.get("loss_grid").map(String::from))
        .unwrap_or_else(|| "square,exp,logistic,hinge".to_string());
    let k_grid: Vec<usize> = parse_grid(&k_grid_raw, "K")?;
    let t_grid: Vec<usize> = parse_grid(&t_grid_raw, "T")?;
    let loss_names: Vec<String> = loss_grid_raw
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let test_fraction = match args.test_fraction {
        Some(v) => v,
        None => file.parsed("test_fraction")?.unwrap_or(0.3),
    };

    let dataset = data.load()?;
    let (train_set, test_set) = data_io::split(&dataset, test_fraction, seed, true)?;
    let train_labels = train_set.label_matrix()?;

    let mut rows: Vec<(usize, usize, String, &'static str, f64, f64)> = Vec::new();
    for &k in &k_grid {
        for &t in &t_grid {
            for loss_name in &loss_names {
                let loss = parse_loss(loss_name, DEFAULT_HINGE_RHO, DEFAULT_HINGE_EPS)?;
                for method in ["baseline", "ddl"] {
                    let mut config = TrainConfig::new(k, t, loss);
                    config.seed = seed;
                    if let Some(q) = args.q_max {
                        config.q_max = q;
                    } else if let Some(q) = file.parsed("q_max")? {
                        config.q_max = q;
                    }
                    if let Some(p) = args.p_max {
                        config.p_max = p;
                    } else if let Some(p) = file.parsed("p_max")? {
                        config.p_max = p;
                    }
                    let start = Instant::now();
                    let model = if method == "baseline" {
                        trainer::train_baseline(&train_set.samples.view(), &train_labels, &config)?
                    } else {
                        trainer::train(&train_set.samples.view(), &train_labels, &config)?
                    };
                    let opts = PredictOptions::fast(t);
                    let metrics = inference::evaluate(
                        &model,
                        &test_set.samples.view(),
                        &test_set.labels,
                        &opts,
                    )?;
                    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                    let method_tag = if method == "baseline" { "baseline" } else { "ddl" };
                    rows.push((
                        k,
                        t,
                        loss_name.clone(),
                        method_tag,
                        metrics.error_rate,
                        runtime_ms,
                    ));
                }
            }
        }
    }

    let sweep_path = out_dir.join("sweep.csv");
    let mut text = format!("# schema: {SWEEP_SCHEMA}\n");
    text.push_str("k,t,loss,method,error_rate,runtime_ms\n");
    for (k, t, loss, method, err, ms) in &rows {
        text.push_str(&format!("{k},{t},{loss},{method},{err},{ms}\n"));
    }
    write_text(&sweep_path, &text)?;

    // Argmin (K, T) per loss and method.
    let argmin_path = out_dir.join("sweep_argmin.csv");
    let mut text = format!("# schema: {SWEEP_ARGMIN_SCHEMA}\n");
    text.push_str("loss,method,best_k,best_t,error_rate\n");
    for loss_name in &loss_names {
        for method in ["baseline", "ddl"] {
            let best = rows
                .iter()
                .filter(|(_, _, l, m, _, _)| l == loss_name && *m == method)
                .min_by(|a, b| a.4.partial_cmp(&b.4).unwrap());
            if let Some((k, t, _, _, err, _)) = best {
                text.push_str(&format!("{loss_name},{method},{k},{t},{err}\n"));
            }
        }
    }
    write_text(&argmin_path, &text)?;

    let mut settings = BTreeMap::new();
    settings.insert("data".into(), data.data.clone());
    settings.insert("format".into(), data.format.clone());
    settings.insert("k_grid".into(), k_grid_raw);
    settings.insert("t_grid".into(), t_grid_raw);
    settings.insert("loss_grid".into(), loss_names.join(","));
    settings.insert("test_fraction".into(), format!("{test_fraction}"));
    settings.insert("seed".into(), seed.to_string());
    let mut digests = BTreeMap::new();
    digests.insert("data".to_string(), file_digest(&data.data)?);
    write_manifest(
        &out_dir.join("manifest.txt"),
        "sweep",
        &settings,
        &digests,
        &[&sweep_path, &argmin_path],
    )?;

    println!("{} sweep rows -> {}", rows.len(), sweep_path.display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let file = ConfigMap::load(args.common.config.as_ref())?;
    let out_dir = resolve_out_dir(&args.common, &file)?;
    let seed = resolve_seed(&args.common, &file)?;
    let get = |flag: Option<usize>, key: &str, default: usize| -> Result<usize> {
        Ok(match flag {
            Some(v) => v,
            None => file.parsed(key)?.unwrap_or(default),
        })
    };
    let spec = SyntheticSpec {
        d: get(args.d, "d", 30)?,
        k_true: get(args.k_true, "k_true", 40)?,
        c: get(args.c, "c", 3)?,
        n: get(args.n, "n", 600)?,
        t_true: get(args.t_true, "t_true", 3)?,
        noise_std: match args.noise_std {
            Some(v) => v,
            None => file.parsed("noise_std")?.unwrap_or(0.05),
        },
        label_noise_rate: match args.label_noise {
            Some(v) => v,
            None => file.parsed("label_noise")?.unwrap_or(0.0),
        },
        seed,
    };
    let (dataset, truth) = data_io::generate_synthetic(&spec)?;

    let data_path = out_dir.join("synthetic.csv");
    data_io::save_delimited(&dataset, data_path.to_str().unwrap(), ',', 0)?;

    // Ground-truth bundle: dictionary (d rows), codes (sample, atom, value),
    // classifiers (K rows of weights plus a final bias row).
    let dict_path = out_dir.join("truth_dictionary.csv");
    let mut text = String::new();
    for r in 0..spec.d {
        let row: Vec<String> = (0..spec.k_true)
            .map(|c| format!("{}", truth.dictionary.atoms()[(r, c)]))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_text(&dict_path, &text)?;

    let codes_path = out_dir.join("truth_codes.csv");
    let mut text = String::from("sample,atom,value\n");
    for (i, code) in truth.codes.iter().enumerate() {
        for (atom, v) in code.iter() {
            text.push_str(&format!("{i},{atom},{v}\n"));
        }
    }
    write_text(&codes_path, &text)?;

    let cls_path = out_dir.join("truth_classifiers.csv");
    let mut text = String::new();
    for r in 0..spec.k_true {
        let row: Vec<String> = (0..spec.c)
            .map(|c| format!("{}", truth.classifiers.weights()[(r, c)]))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let biases: Vec<String> = (0..spec.c)
        .map(|c| format!("{}", truth.classifiers.biases()[c]))
        .collect();
    text.push_str(&biases.join(","));
    text.push('\n');
    write_text(&cls_path, &text)?;

    let mut settings = BTreeMap::new();
    settings.insert("d".into(), spec.d.to_string());
    settings.insert("k_true".into(), spec.k_true.to_string());
    settings.insert("c".into(), spec.c.to_string());
    settings.insert("n".into(), spec.n.to_string());
    settings.insert("t_true".into(), spec.t_true.to_string());
    settings.insert("noise_std".into(), format!("{}", spec.noise_std));
    settings.insert("label_noise".into(), format!("{}", spec.label_noise_rate));
    settings.insert("seed".into(), seed.to_string());
    write_manifest(
        &out_dir.join("manifest.txt"),
        "synth",
        &settings,
        &BTreeMap::new(),
        &[&data_path, &dict_path, &codes_path, &cls_path],
    )?;

    println!(
        "synthetic dataset: {} samples, d={}, {} classes -> {}",
        dataset.len(),
        spec.d,
        spec.c,
        data_path.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_map_parses_and_rejects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        fs::write(&path, "# comment\nk = 12\nloss = logistic\nmanifest.x = y\n").unwrap();
        let cfg = ConfigMap::load(Some(&path)).unwrap();
        assert_eq!(cfg.parsed::<usize>("k").unwrap(), Some(12));
        assert_eq!(cfg.get("loss"), Some("logistic"));
        assert_eq!(cfg.get("manifest.x"), None);

        fs::write(&path, "bogus_key = 1\n").unwrap();
        assert!(ConfigMap::load(Some(&path)).is_err());
        fs::write(&path, "no equals sign\n").unwrap();
        assert!(ConfigMap::load(Some(&path)).is_err());
    }

    #[test]
    fn loss_and_mode_parsing() {
        assert_eq!(parse_loss("square", 0.05, 1e-4).unwrap(), LossKind::Square);
        assert_eq!(
            parse_loss("hinge", 0.1, 1e-5).unwrap(),
            LossKind::SmoothHinge { rho: 0.1, eps: 1e-5 }
        );
        assert!(parse_loss("l1", 0.05, 1e-4).is_err());
        assert!(parse_mode("fast").is_ok());
        assert!(parse_mode("warp").is_err());
        assert!(parse_init("gaussian").is_ok());
        assert!(parse_init("zeros").is_err());
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code_for(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(
            exit_code_for(&Error::Data("x".into())),
            3
        );
        assert_eq!(
            exit_code_for(&Error::io("p", std::io::Error::other("x"))),
            3
        );
        assert_eq!(exit_code_for(&Error::Numeric("x".into())), 4);
        assert_eq!(exit_code_for(&Error::NonConvergence("x".into())), 4);
    }

    #[test]
    fn mask_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.txt");
        fs::write(&path, "1\n0\ntrue\nfalse\n").unwrap();
        let mask = read_mask_file(path.to_str().unwrap()).unwrap();
        assert_eq!(mask, vec![true, false, true, false]);
        fs::write(&path, "2\n").unwrap();
        assert!(read_mask_file(path.to_str().unwrap()).is_err());
    }
}
