//! Command-line entry point.
//!
//! ```text
//! convtopic synth    --out FILE [--config FILE] [--seed N] ...
//! convtopic train    --corpus FILE --out FILE [--task --model --context --acts --act-model] ...
//! convtopic eval     --model FILE --corpus FILE [--split test] [--act-model FILE]
//! convtopic predict  --corpus FILE [--model FILE] [--act-model FILE] [--j N]
//! convtopic keywords --model FILE --corpus FILE [--j N | --j-from-gold]
//! convtopic metrics  --corpus FILE [--statistic total|max] [--exclude-other]
//! convtopic kappa    --corpus FILE --other FILE [--task topic|act]
//! ```
//!
//! Reports go to standard output, the resolved configuration and progress
//! to standard error. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 numeric failure.

mod pipeline;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::corpus::{
    build_all_examples, downsample_class, generate_synthetic, make_splits, parse_corpus,
    write_corpus, ClassificationExample, Conversation, Label, Side, SplitName, SynthConfig, Task,
    Topic,
};
use crate::error::{Error, Result};
use crate::keywords::{evaluate_keywords, extract_keywords, KeywordPrediction};
use crate::metrics::{cohens_kappa, correlate_depth, DepthStatistic, DepthSummary, MetricReport};
use crate::models::{ContextMode, DanModel, Family, ModelConfig};
use crate::text::EmbeddingSource;
use crate::training::{
    encode_examples, evaluate, load_model, save_model, train, vocabulary_for, ActSource,
    EncodedExample, TrainConfig, TrainedModel,
};

pub use pipeline::{pipeline_predict, KeywordToken, UtterancePrediction};

/// Train/dev/test proportions of the conversation-level split.
pub const SPLIT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Parser)]
#[command(
    name = "convtopic",
    version,
    about = "Contextual topic and dialog-act classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus.
    Synth(SynthArgs),
    /// Train a classifier and write the model file.
    Train(TrainArgs),
    /// Accuracy of a trained model on one split.
    Eval(EvalArgs),
    /// Per-utterance topic, act and keyword predictions.
    Predict(PredictArgs),
    /// Keyword extraction with an attention model, scored against gold.
    Keywords(KeywordArgs),
    /// Topical depth and its correlation with response ratings.
    Metrics(MetricsArgs),
    /// Agreement between two annotations of the same conversations.
    Kappa(KappaArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed of `--config`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 2000, conflicts_with = "config")]
    conversations: usize,
    #[arg(long, default_value_t = 8, conflicts_with = "config")]
    turns: usize,
    #[arg(long, default_value_t = 0.5, conflicts_with = "config")]
    anaphora: f64,
    #[arg(long, default_value_t = 8, conflicts_with = "config")]
    topics: usize,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Seed of the conversation split; defaults to the training seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "user")]
    side: Side,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: SplitArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "topic")]
    task: TaskArg,
    #[arg(long, default_value = "dan")]
    model: Family,
    #[arg(long, default_value = "none")]
    context: ContextMode,
    #[arg(long, default_value = "none")]
    acts: ActSource,
    #[arg(long)]
    act_model: Option<PathBuf>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 2)]
    patience: usize,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    /// Word vector file (`word v1 .. vD` per line).
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Keep this fraction of `Other` training examples.
    #[arg(long)]
    downsample_other: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: SplitArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "test")]
    split: SplitName,
    #[arg(long)]
    act_model: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    act_model: Option<PathBuf>,
    /// Keywords reported per utterance by attention models.
    #[arg(long, default_value_t = 3)]
    j: usize,
}

#[derive(Debug, Args)]
struct KeywordArgs {
    #[command(flatten)]
    data: SplitArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "test")]
    split: SplitName,
    #[arg(long)]
    act_model: Option<PathBuf>,
    #[arg(long, default_value_t = 3, conflicts_with = "j_from_gold")]
    j: usize,
    /// Select as many keywords as the utterance has gold keywords.
    #[arg(long)]
    j_from_gold: bool,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "total")]
    statistic: DepthStatistic,
    /// Leave `Other` turns out of sub-conversations.
    #[arg(long)]
    exclude_other: bool,
    #[arg(long, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct KappaArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Second annotation of the same conversations.
    #[arg(long)]
    other: PathBuf,
    #[arg(long, default_value = "topic")]
    task: TaskArg,
    #[arg(long, default_value = "both")]
    side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TaskArg(Task);

impl std::str::FromStr for TaskArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topic" => Ok(TaskArg(Task::Topic)),
            "act" => Ok(TaskArg(Task::DialogAct)),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Table,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "table" => Ok(Format::Table),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

impl Format {
    fn render(self, report: &MetricReport) -> String {
        match self {
            Format::Json => format!("{}\n", report.to_json()),
            Format::Table => report.to_table(),
        }
    }
}

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        3
    } else if matches!(e, Error::InvalidArgument(_)) {
        1
    } else {
        2
    }
}

/// Parse `argv` (program name first) and run the command against the
/// process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut ctx = Ctx { out, err };
    let result = match cli.command {
        Command::Synth(a) => synth(&mut ctx, a),
        Command::Train(a) => train_cmd(&mut ctx, a),
        Command::Eval(a) => eval_cmd(&mut ctx, a),
        Command::Predict(a) => predict_cmd(&mut ctx, a),
        Command::Keywords(a) => keywords_cmd(&mut ctx, a),
        Command::Metrics(a) => metrics_cmd(&mut ctx, a),
        Command::Kappa(a) => kappa_cmd(&mut ctx, a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            exit_code(&e)
        }
    }
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn config(&mut self, value: &impl Serialize) {
        let text = serde_json::to_string(value).expect("configs always serialize");
        let _ = writeln!(self.err, "config: {text}");
    }

    fn log(&mut self, msg: impl std::fmt::Display) {
        let _ = writeln!(self.err, "{msg}");
    }

    fn emit(&mut self, text: &str) -> Result<()> {
        self.out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))
    }

    fn line(&mut self, text: &str) -> Result<()> {
        self.emit(text)?;
        self.emit("\n")
    }
}

fn synth(ctx: &mut Ctx, a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => SynthConfig::from_file(path)?,
        None => SynthConfig::builtin(
            a.seed.unwrap_or(0),
            a.conversations,
            a.turns,
            a.anaphora,
            a.topics,
        ),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    ctx.config(&json!({ "command": "synth", "out": a.out, "synth": cfg }));
    let convs = generate_synthetic(&cfg)?;
    write_corpus(&a.out, &convs)?;
    let utterances: usize = convs.iter().map(|c| 2 * c.turns.len()).sum();
    ctx.line(
        &json!({ "conversations": convs.len(), "utterances": utterances, "out": a.out })
            .to_string(),
    )
}

/// Conversation-level split of a corpus file.
pub fn split_corpus(
    convs: &[Conversation],
    seed: u64,
    name: SplitName,
) -> Result<Vec<Conversation>> {
    Ok(make_splits(convs, SPLIT_RATIOS, seed)?.get(name).to_vec())
}

fn load_act_model(path: &Option<PathBuf>, acts: ActSource) -> Result<Option<TrainedModel>> {
    match (path, acts) {
        (Some(p), ActSource::Predicted) => {
            let m = load_model(p)?;
            pipeline::act_dan(&m)?;
            Ok(Some(m))
        }
        (None, ActSource::Predicted) => Err(Error::InvalidArgument(
            "--acts predicted needs --act-model".into(),
        )),
        (Some(_), _) => Err(Error::InvalidArgument(
            "--act-model is only used with predicted acts".into(),
        )),
        (None, _) => Ok(None),
    }
}

fn dan_of(m: &Option<TrainedModel>) -> Option<&DanModel> {
    m.as_ref().and_then(|m| pipeline::act_dan(m).ok())
}

/// Train configuration assembled from flags, before any data is read.
fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut model = ModelConfig::defaults(a.model, a.task.0);
    model.context = a.context;
    model.act_feature = a.acts != ActSource::None;
    model.window = a.window;
    if let Some(d) = a.embed_dim {
        model.embed_dim = d;
    }
    if let Some(h) = a.hidden {
        model.hidden = h;
    }
    if let Some(p) = a.dropout {
        model.dropout = p;
    }
    let seed = a.data.seed.unwrap_or(0);
    let mut cfg = TrainConfig::new(model, seed);
    cfg.acts = a.acts;
    cfg.lr = a.lr;
    cfg.batch_size = a.batch_size;
    cfg.max_epochs = a.epochs;
    cfg.patience = a.patience;
    cfg.min_count = a.min_count;
    if let Some(path) = &a.pretrained {
        cfg.embeddings = EmbeddingSource::Pretrained {
            path: path.clone(),
            seed,
            scale: 0.1,
        };
    }
    if a.downsample_other.is_some() && a.task.0 != Task::Topic {
        return Err(Error::InvalidArgument(
            "--downsample-other applies to topic models".into(),
        ));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_cmd(ctx: &mut Ctx, a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a)?;
    ctx.config(&json!({
        "command": "train",
        "corpus": a.data.corpus,
        "side": a.data.side,
        "out": a.out,
        "act_model": a.act_model,
        "downsample_other": a.downsample_other,
        "train": cfg,
    }));
    let act = load_act_model(&a.act_model, cfg.acts)?;
    let convs = parse_corpus(&a.data.corpus)?;
    let splits = make_splits(&convs, SPLIT_RATIOS, cfg.seed)?;
    let vocab = match &act {
        Some(m) => m.vocab.clone(),
        None => vocabulary_for(&splits.train, cfg.min_count)?,
    };
    let task = cfg.model.task;
    let window = cfg.model.window;
    let mut train_ex = build_all_examples(&splits.train, task, a.data.side, window);
    if let Some(keep) = a.downsample_other {
        train_ex = downsample_class(train_ex, Label::Topic(Topic::Other), keep, cfg.seed)?;
    }
    let dev_ex = build_all_examples(&splits.dev, task, a.data.side, window);
    ctx.log(format!(
        "vocabulary {} words, {} train / {} dev examples",
        vocab.len(),
        train_ex.len(),
        dev_ex.len()
    ));
    let train_enc = encode_examples(&train_ex, &vocab, cfg.acts, dan_of(&act))?;
    let dev_enc = encode_examples(&dev_ex, &vocab, cfg.acts, dan_of(&act))?;
    let (model, history) = train(&cfg, &vocab, &train_enc, &dev_enc)?;
    for e in &history.epochs {
        ctx.log(format!(
            "epoch {:>3}  loss {:.5}  dev accuracy {:.4}",
            e.epoch, e.train_loss, e.dev_accuracy
        ));
    }
    let trained = TrainedModel {
        model,
        vocab,
        acts: cfg.acts,
        train_config: Some(cfg),
    };
    save_model(&trained, &a.out)?;
    ctx.line(&history.to_json())
}

/// Examples of one split encoded for `model`.
fn split_examples(
    model: &TrainedModel,
    act: &Option<TrainedModel>,
    data: &SplitArgs,
    split: SplitName,
) -> Result<(Vec<ClassificationExample>, Vec<EncodedExample>)> {
    if let Some(a) = act {
        pipeline::check_vocab(&model.vocab, &a.vocab)?;
    }
    let convs = parse_corpus(&data.corpus)?;
    let convs = split_corpus(&convs, resolved_seed(model, data), split)?;
    let cfg = model.model.config();
    let examples = build_all_examples(&convs, cfg.task, data.side, cfg.window);
    let encoded = encode_examples(&examples, &model.vocab, model.acts, dan_of(act))?;
    Ok((examples, encoded))
}

fn resolved_seed(model: &TrainedModel, data: &SplitArgs) -> u64 {
    data.seed
        .or(model.train_config.as_ref().map(|c| c.seed))
        .unwrap_or(0)
}

fn eval_cmd(ctx: &mut Ctx, a: EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let act = load_act_model(&a.act_model, model.acts)?;
    ctx.config(&json!({
        "command": "eval",
        "model": a.model,
        "corpus": a.data.corpus,
        "split": a.split,
        "seed": resolved_seed(&model, &a.data),
        "side": a.data.side,
        "act_model": a.act_model,
        "model_config": model.model.config(),
        "acts": model.acts,
    }));
    let (_, encoded) = split_examples(&model, &act, &a.data, a.split)?;
    let eval = evaluate(&model.model, &encoded)?;
    let report = eval.to_report(&model.task().label_names());
    ctx.emit(&a.format.render(&report))
}

fn predict_cmd(ctx: &mut Ctx, a: PredictArgs) -> Result<()> {
    let topic = a.model.as_ref().map(load_model).transpose()?;
    let act = a.act_model.as_ref().map(load_model).transpose()?;
    ctx.config(&json!({
        "command": "predict",
        "corpus": a.corpus,
        "model": a.model,
        "act_model": a.act_model,
        "j": a.j,
    }));
    let convs = parse_corpus(&a.corpus)?;
    for p in pipeline_predict(topic.as_ref(), act.as_ref(), &convs, a.j)? {
        ctx.line(&p.to_json())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct KeywordReport<'a> {
    conversation_id: &'a str,
    turn_index: usize,
    speaker: &'static str,
    utterance: String,
    topic: &'static str,
    tokens: Vec<&'a str>,
    positions: &'a [usize],
    scores: &'a [f64],
    gold: &'a [usize],
}

fn keywords_cmd(ctx: &mut Ctx, a: KeywordArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    model.expect_task(Task::Topic)?;
    let adan = model
        .model
        .as_adan()
        .ok_or_else(|| Error::InvalidArgument("keyword extraction needs an adan model".into()))?;
    let act = load_act_model(&a.act_model, model.acts)?;
    ctx.config(&json!({
        "command": "keywords",
        "model": a.model,
        "corpus": a.data.corpus,
        "split": a.split,
        "seed": resolved_seed(&model, &a.data),
        "side": a.data.side,
        "act_model": a.act_model,
        "j": if a.j_from_gold { json!("gold") } else { json!(a.j) },
    }));
    let (examples, encoded) = split_examples(&model, &act, &a.data, a.split)?;
    let mut preds: Vec<KeywordPrediction> = Vec::new();
    let mut gold: Vec<Vec<usize>> = Vec::new();
    for (ex, enc) in examples.iter().zip(&encoded) {
        if ex.keyword_positions.is_empty() {
            continue;
        }
        let j = if a.j_from_gold {
            ex.keyword_positions.len()
        } else {
            a.j
        };
        let p = extract_keywords(adan, &enc.input(), j)?;
        let report = KeywordReport {
            conversation_id: &ex.conversation_id,
            turn_index: ex.turn_index,
            speaker: pipeline::speaker_name(ex.speaker),
            utterance: ex.tokens.join(" "),
            topic: Task::Topic.label_name(p.label).unwrap_or("?"),
            tokens: p.positions.iter().map(|&i| ex.tokens[i].as_str()).collect(),
            positions: &p.positions,
            scores: &p.scores,
            gold: &ex.keyword_positions,
        };
        ctx.line(&serde_json::to_string(&report).expect("reports always serialize"))?;
        gold.push(ex.keyword_positions.clone());
        preds.push(p);
    }
    let (precision, recall) = evaluate_keywords(&preds, &gold)?;
    let summary = MetricReport {
        examples: Some(preds.len()),
        keyword_precision: Some(precision),
        keyword_recall: Some(recall),
        ..Default::default()
    };
    ctx.line(&summary.to_json())
}

fn metrics_cmd(ctx: &mut Ctx, a: MetricsArgs) -> Result<()> {
    ctx.config(&json!({
        "command": "metrics",
        "corpus": a.corpus,
        "statistic": format!("{:?}", a.statistic).to_lowercase(),
        "include_other": !a.exclude_other,
    }));
    let convs = parse_corpus(&a.corpus)?;
    let include_other = !a.exclude_other;
    let rated = convs
        .iter()
        .filter(|c| crate::metrics::conversation_ratings(c).is_some())
        .count();
    let correlations = if rated >= 2 {
        correlate_depth(&convs, a.statistic, include_other)?
    } else {
        ctx.log(format!("{rated} rated conversations; correlations skipped"));
        Vec::new()
    };
    let report = MetricReport {
        depth: Some(DepthSummary::from_conversations(&convs, include_other)?),
        correlations,
        ..Default::default()
    };
    ctx.emit(&a.format.render(&report))
}

/// Label pairs of two annotations of the same conversations.
pub fn paired_labels(
    a: &[Conversation],
    b: &[Conversation],
    task: Task,
    side: Side,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mismatch = |m: String| {
        Err(Error::LabelSpace(format!(
            "annotations differ in structure: {m}"
        )))
    };
    if a.len() != b.len() {
        return mismatch(format!("{} vs {} conversations", a.len(), b.len()));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (ca, cb) in a.iter().zip(b) {
        if ca.id != cb.id || ca.turns.len() != cb.turns.len() {
            return mismatch(format!("conversation `{}` vs `{}`", ca.id, cb.id));
        }
        let ea = build_all_examples(std::slice::from_ref(ca), task, side, 0);
        let eb = build_all_examples(std::slice::from_ref(cb), task, side, 0);
        for p in &ea {
            if let Some(q) = eb
                .iter()
                .find(|q| q.turn_index == p.turn_index && q.speaker == p.speaker)
            {
                x.push(p.label.index());
                y.push(q.label.index());
            }
        }
    }
    Ok((x, y))
}

fn kappa_cmd(ctx: &mut Ctx, a: KappaArgs) -> Result<()> {
    ctx.config(&json!({
        "command": "kappa",
        "corpus": a.corpus,
        "other": a.other,
        "task": format!("{:?}", a.task.0),
        "side": a.side,
    }));
    let first = parse_corpus(&a.corpus)?;
    let second = parse_corpus(&a.other)?;
    let (x, y) = paired_labels(&first, &second, a.task.0, a.side)?;
    let kappa = cohens_kappa(&x, &y)?;
    ctx.line(&json!({ "items": x.len(), "kappa": kappa }).to_string())
}
