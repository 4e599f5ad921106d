//! Command implementations behind the `ged-aes` binary.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ged_aes::corpus::{
    build_vocabulary, generate_synthetic, load_embeddings, parse_corpus, parse_raw_corpus,
    serialize_corpus, CorpusError, Essay, Label, SyntheticConfig, SCORE_MAX, SCORE_MIN,
};
use ged_aes::metrics::{corpus_prf, qwk, round_half_up, significance_test, MetricError};
use ged_aes::model::{predict, predict_labels, Checkpoint, ModelError, ModelParams};
use ged_aes::training::{
    format_sweep, parse_sweep, sweep_gamma, train, validate_sweep, CorpusEvaluator, TrainError,
    TrainRecord,
};

use config::{read_pairs, set_synthetic, synthetic_snapshot, RunConfig};

pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const TRAIN_RECORD_FILE: &str = "train_record.txt";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.txt";
pub const DIVERGED_MARKER: &str = "DIVERGED";
pub const EVAL_FILE: &str = "eval.txt";
pub const SWEEP_FILE: &str = "sweep.txt";
pub const PREDICTIONS_FILE: &str = "predictions.txt";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::NonFiniteLoss(_) | TrainError::NonFiniteGradient(_) => {
                CliError::Numerical(e.to_string())
            }
            TrainError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ged-aes",
    version,
    about = "Joint grammatical error detection and essay scoring"
)]
pub struct Cli {
    /// Log progress (-v) or debug detail (-vv) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one model and keep its best dev epoch.
    Train(RunArgs),
    /// Score a checkpoint on a labeled corpus.
    Eval(EvalArgs),
    /// Train once per γ_aes grid point.
    Sweep(SweepArgs),
    /// Annotate a corpus with predicted labels and scores.
    Predict(PredictArgs),
    /// Write synthetic train/dev/test corpora.
    GenSynthetic(SynthArgs),
    /// Check that a sweep table parses and is plottable.
    ValidateSweep { path: PathBuf },
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// key=value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(seed) = self.seed {
            out.push(("seed".into(), seed.to_string()));
        }
        if let Some(out_dir) = &self.out {
            out.push(("out".into(), out_dir.display().to_string()));
        }
        Ok(out)
    }
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub gamma_aes: Option<f64>,
    #[arg(long)]
    pub gamma_lm: Option<f64>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub lm_vocab_cap: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    /// auto, f0.5 or qwk.
    #[arg(long)]
    pub selection: Option<String>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        self.resolve_with(Vec::new())
    }

    /// Like [`RunArgs::resolve`], with `extra` applied after every flag.
    pub fn resolve_with(&self, extra: Vec<(String, String)>) -> Result<RunConfig, CliError> {
        let mut o = self.common.overrides()?;
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        push("train", path(&self.train));
        push("dev", path(&self.dev));
        push("test", path(&self.test));
        push("embeddings", path(&self.embeddings));
        push("gamma_aes", self.gamma_aes.map(|v| v.to_string()));
        push("gamma_lm", self.gamma_lm.map(|v| v.to_string()));
        push("embedding_dim", self.embedding_dim.map(|v| v.to_string()));
        push("hidden_dim", self.hidden_dim.map(|v| v.to_string()));
        push("lm_vocab_cap", self.lm_vocab_cap.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("patience", self.patience.map(|v| v.to_string()));
        push("max_epochs", self.max_epochs.map(|v| v.to_string()));
        push("min_count", self.min_count.map(|v| v.to_string()));
        push("selection", self.selection.clone());
        o.extend(extra);
        RunConfig::resolve(self.common.config.as_deref(), &o)
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated γ_aes values; default 0.0,0.1,…,1.0.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Second checkpoint to test for a significant difference.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Metric for the significance test: f0.5 or qwk.
    #[arg(long, default_value = "f0.5")]
    pub metric: String,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corpus to annotate; labels and scores may be absent.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug, Default)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub error_variants: Option<usize>,
    #[arg(long)]
    pub train_essays: Option<usize>,
    #[arg(long)]
    pub dev_essays: Option<usize>,
    #[arg(long)]
    pub test_essays: Option<usize>,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub error_rate_min: Option<f64>,
    #[arg(long)]
    pub error_rate_max: Option<f64>,
    #[arg(long)]
    pub score_noise: Option<u8>,
    #[arg(long)]
    pub agreement_classes: Option<usize>,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::GenSynthetic(args) => cmd_gen_synthetic(&args),
        Command::ValidateSweep { path } => cmd_validate_sweep(&path),
    }
}

struct Prepared {
    train: Vec<Essay>,
    dev: Vec<Essay>,
    vocab: ged_aes::corpus::Vocabulary,
    embeddings: Option<ged_aes::corpus::EmbeddingMatrix>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let train_path = cfg.require("train")?;
    let dev_path = cfg.require("dev")?;
    let embeddings_path = match &cfg.embeddings {
        Some(_) => Some(cfg.require("embeddings")?),
        None => None,
    };
    let train = parse_corpus(train_path)?;
    let dev = parse_corpus(dev_path)?;
    if train.is_empty() {
        return Err(CliError::Data(format!(
            "training corpus {} has no essays",
            train_path.display()
        )));
    }
    if dev.is_empty() {
        return Err(CliError::Data(format!(
            "dev corpus {} has no essays",
            dev_path.display()
        )));
    }
    let vocab = build_vocabulary(&train, cfg.min_count)?;
    let embeddings = match embeddings_path {
        Some(p) => Some(load_embeddings(
            p,
            &vocab,
            cfg.model.embedding_dim,
            cfg.seed,
        )?),
        None => None,
    };
    log::info!(
        "{} train / {} dev essays, vocabulary {}",
        train.len(),
        dev.len(),
        vocab.len()
    );
    Ok(Prepared {
        train,
        dev,
        vocab,
        embeddings,
    })
}

pub fn cmd_train(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let out = cfg.require("out")?.to_path_buf();
    let data = prepare(&cfg)?;
    create_dir(&out)?;
    write(&out.join(RESOLVED_CONFIG_FILE), &cfg.snapshot())?;

    let tc = cfg.train_config();
    let init = ModelParams::init(
        &tc.model,
        data.vocab.len(),
        data.embeddings.clone(),
        cfg.seed,
    )?;
    let mut dev = CorpusEvaluator::new(&tc.model, &data.dev, &data.vocab);
    let outcome = train(&tc, init, &data.train, &data.vocab, &mut dev, &mut |_| {})?;

    let checkpoint = Checkpoint {
        config: tc.model.clone(),
        vocab: data.vocab,
        params: outcome.params,
        seed: cfg.seed,
    };
    checkpoint.save(&out.join(CHECKPOINT_DIR))?;
    write(&out.join(TRAIN_RECORD_FILE), &outcome.record.to_lines())?;
    print_summary(&outcome.record);

    if outcome.record.is_diverged() {
        let msg = format!(
            "training diverged ({}); checkpoint holds epoch {}",
            outcome.record.stop_reason, outcome.record.best_epoch
        );
        write(&out.join(DIVERGED_MARKER), &(msg.clone() + "\n"))?;
        return Err(CliError::Numerical(msg));
    }
    Ok(())
}

fn print_summary(record: &TrainRecord) {
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"));
    match record.best() {
        Some(b) => println!(
            "best_epoch={} epochs={} stop_reason={} dev_f0.5={:.4} dev_qwk={} dev_spearman={}",
            b.epoch,
            record.epochs.len(),
            record.stop_reason,
            b.dev_f_half,
            opt(b.dev_qwk),
            opt(b.dev_spearman)
        ),
        None => println!(
            "best_epoch=0 epochs={} stop_reason={}",
            record.epochs.len(),
            record.stop_reason
        ),
    }
}

fn load_checkpoint(dir: &Path) -> Result<Checkpoint, CliError> {
    if !dir.exists() {
        return Err(CliError::Config(format!(
            "checkpoint {} does not exist",
            dir.display()
        )));
    }
    Ok(Checkpoint::load(dir)?)
}

/// Default output directory for commands that read a checkpoint: the
/// directory that holds it.
fn beside(checkpoint: &Path) -> PathBuf {
    checkpoint
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Per-essay system output used by the significance test.
#[derive(Clone)]
struct Output {
    labels: Vec<Label>,
    score: f64,
}

fn outputs(ck: &Checkpoint, essays: &[Essay]) -> Result<Vec<Output>, CliError> {
    essays
        .iter()
        .map(|e| {
            let out = predict(&ck.params, &ck.config, &ck.vocab.encode(&e.tokens))?;
            Ok(Output {
                labels: predict_labels(&out.ged_probs, ck.config.ged_threshold),
                score: out.predicted_score,
            })
        })
        .collect()
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let overrides = args.common.overrides()?;
    let cfg = RunConfig::resolve(args.common.config.as_deref(), &overrides)?;
    let ck = load_checkpoint(&args.checkpoint)?;
    if !args.test.exists() {
        return Err(CliError::Config(format!(
            "`test` path {} does not exist",
            args.test.display()
        )));
    }
    let test = parse_corpus(&args.test)?;
    let mut report = CorpusEvaluator::new(&ck.config, &test, &ck.vocab).report(&ck.params)?;

    if let Some(other) = &args.compare {
        let other = load_checkpoint(other)?;
        let a = outputs(&ck, &test)?;
        let b = outputs(&other, &test)?;
        let gold: Vec<&Essay> = test.iter().collect();
        let p = match args.metric.as_str() {
            "f0.5" => significance_test(
                |sys: &[Output], gold: &[&Essay]| {
                    let pred: Vec<&[Label]> = sys.iter().map(|o| o.labels.as_slice()).collect();
                    let g: Vec<&[Label]> = gold.iter().map(|e| e.labels.as_slice()).collect();
                    corpus_prf(&pred, &g).map_or(0.0, |p| p.f_half())
                },
                &a,
                &b,
                &gold,
                args.iterations,
                cfg.seed,
            )?,
            "qwk" => significance_test(
                |sys: &[Output], gold: &[&Essay]| {
                    let pred: Vec<i64> = sys
                        .iter()
                        .map(|o| round_half_up(o.score).clamp(SCORE_MIN as i64, SCORE_MAX as i64))
                        .collect();
                    let g: Vec<i64> = gold.iter().map(|e| e.gold_score as i64).collect();
                    qwk(&pred, &g, SCORE_MIN as i64, SCORE_MAX as i64).unwrap_or(0.0)
                },
                &a,
                &b,
                &gold,
                args.iterations,
                cfg.seed,
            )?,
            m => {
                return Err(CliError::Config(format!(
                    "--metric: expected f0.5 or qwk, got {m:?}"
                )))
            }
        };
        report.p_value = Some(p);
    }

    print!("{}", report.table());
    let out = cfg.out.clone().unwrap_or_else(|| beside(&args.checkpoint));
    create_dir(&out)?;
    write(&out.join(EVAL_FILE), &report.to_key_value())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let grid = args
        .grid
        .iter()
        .map(|g| ("grid".to_string(), g.clone()))
        .collect();
    let cfg = args.run.resolve_with(grid)?;
    let out = cfg.require("out")?.to_path_buf();
    let data = prepare(&cfg)?;
    let test = match &cfg.test {
        Some(_) => Some(parse_corpus(cfg.require("test")?)?),
        None => None,
    };
    create_dir(&out)?;
    write(&out.join(RESOLVED_CONFIG_FILE), &cfg.snapshot())?;

    let tc = cfg.train_config();
    let vocab_len = data.vocab.len();
    let init = |m: &ged_aes::model::ModelConfig| -> Result<ModelParams, TrainError> {
        Ok(ModelParams::init(
            m,
            vocab_len,
            data.embeddings.clone(),
            cfg.seed,
        )?)
    };
    let summary = sweep_gamma(
        &tc,
        &cfg.grid,
        &data.train,
        &data.dev,
        test.as_deref(),
        &data.vocab,
        &init,
        &mut |r| log::info!("{}", ged_aes::training::format_row(r)),
    )?;
    let text = format_sweep(&summary);
    write(&out.join(SWEEP_FILE), &text)?;
    print!("{text}");
    Ok(())
}

pub fn cmd_validate_sweep(path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let summary = parse_sweep(&text)?;
    validate_sweep(&summary)?;
    println!("ok rows={}", summary.rows.len());
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let overrides = args.common.overrides()?;
    let cfg = RunConfig::resolve(args.common.config.as_deref(), &overrides)?;
    let ck = load_checkpoint(&args.checkpoint)?;
    if !args.input.exists() {
        return Err(CliError::Config(format!(
            "`input` path {} does not exist",
            args.input.display()
        )));
    }
    let raw = parse_raw_corpus(&args.input)?;
    let mut annotated = Vec::with_capacity(raw.len());
    for r in raw {
        let out = predict(&ck.params, &ck.config, &ck.vocab.encode(&r.tokens))?;
        let labels = predict_labels(&out.ged_probs, ck.config.ged_threshold);
        let score =
            round_half_up(out.predicted_score).clamp(SCORE_MIN as i64, SCORE_MAX as i64) as u8;
        annotated.push(Essay::new(r.id, r.tokens, labels, score)?);
    }
    let out = cfg.out.clone().unwrap_or_else(|| beside(&args.checkpoint));
    create_dir(&out)?;
    write(&out.join(PREDICTIONS_FILE), &serialize_corpus(&annotated))?;
    println!(
        "essays={} out={}",
        annotated.len(),
        out.join(PREDICTIONS_FILE).display()
    );
    Ok(())
}

pub fn cmd_gen_synthetic(args: &SynthArgs) -> Result<(), CliError> {
    let mut cfg = SyntheticConfig::default();
    let mut out = None;
    let mut apply = |k: &str, v: &str, cfg: &mut SyntheticConfig| -> Result<(), CliError> {
        if k == "out" {
            out = Some(PathBuf::from(v));
        }
        set_synthetic(cfg, k, v)
    };
    if let Some(path) = &args.common.config {
        for (k, v) in read_pairs(path)? {
            apply(&k, &v, &mut cfg)?;
        }
    }
    let mut overrides = args.common.overrides()?;
    let s = |v: Option<String>, k: &str| v.map(|v| (k.to_string(), v));
    overrides.extend(
        [
            s(args.vocab_size.map(|v| v.to_string()), "vocab_size"),
            s(args.error_variants.map(|v| v.to_string()), "error_variants"),
            s(args.train_essays.map(|v| v.to_string()), "train_essays"),
            s(args.dev_essays.map(|v| v.to_string()), "dev_essays"),
            s(args.test_essays.map(|v| v.to_string()), "test_essays"),
            s(args.min_len.map(|v| v.to_string()), "min_len"),
            s(args.max_len.map(|v| v.to_string()), "max_len"),
            s(args.error_rate_min.map(|v| v.to_string()), "error_rate_min"),
            s(args.error_rate_max.map(|v| v.to_string()), "error_rate_max"),
            s(args.score_noise.map(|v| v.to_string()), "score_noise"),
            s(
                args.agreement_classes.map(|v| v.to_string()),
                "agreement_classes",
            ),
        ]
        .into_iter()
        .flatten(),
    );
    for (k, v) in &overrides {
        apply(k, v, &mut cfg)?;
    }
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let out = out.ok_or_else(|| {
        CliError::Config("missing required field `out` (set out=DIR or --out)".into())
    })?;
    let corpus = generate_synthetic(&cfg)?;
    create_dir(&out)?;
    write(&out.join(RESOLVED_CONFIG_FILE), &synthetic_snapshot(&cfg))?;
    for (name, essays) in [
        ("train", &corpus.train),
        ("dev", &corpus.dev),
        ("test", &corpus.test),
    ] {
        write(&out.join(format!("{name}.txt")), &serialize_corpus(essays))?;
    }
    println!(
        "train={} dev={} test={} out={}",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        out.display()
    );
    Ok(())
}
