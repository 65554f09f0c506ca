//! The `ctp` executable: data generation, training, evaluation, rule
//! extraction and gradient checking.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error, 3 a failed
//! `--assert` or gradient tolerance.

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::embeddings::Table;
use crate::error::{Error, Result};
use crate::evaluation::{
    candidate_auc_pr, extract_rules, link_prediction_metrics, overall_accuracy, per_hop_accuracy, ModelClassifier,
    ModelScorer,
};
use crate::logic::countries::{countries_split, CountriesTask, World};
use crate::logic::{format_atom, parse_kb, write_instances, Atom, CompositionTable, FactFormat, GeneratorConfig};
use crate::model::{Model, ModelConfig};
use crate::prover::{prove_grad_check, ProverConfig};
use crate::reformulate::{parse_specs, ReformulatorSpec, Variant};
use crate::training::{train, write_metric_log, Checkpoint, DataConfig, Task, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ctp", version, about = "Differentiable backward chaining with goal-conditioned rule generation")]
pub struct Cli {
    /// Log warnings and errors only
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic dataset together with a training config
    Generate(GenerateArgs),
    /// Train a model; writes best.json, last.json and metrics.jsonl
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split and print a JSON report
    Eval(EvalArgs),
    /// Decode every goal and reformulator into its nearest symbolic rule
    ExtractRules(ExtractArgs),
    /// Compare prover gradients with central finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    /// Relation-composition chains for classification
    Kinship,
    /// Country geography for link prediction
    Countries,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Level {
    S1,
    S2,
    S3,
}

impl From<Level> for CountriesTask {
    fn from(l: Level) -> Self {
        match l {
            Level::S1 => CountriesTask::S1,
            Level::S2 => CountriesTask::S2,
            Level::S3 => CountriesTask::S3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    LinkPrediction,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::LinkPrediction => Task::LinkPrediction,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Dataset family
    #[arg(long, value_enum, default_value = "kinship")]
    pub task: DatasetKind,
    /// Composition table for kinship data: grandparent or cyclic<n>
    #[arg(long, default_value = "cyclic6")]
    pub table: String,
    /// Chain lengths of the training instances
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub train_hops: Vec<usize>,
    /// Chain lengths of the evaluation instances
    #[arg(long, value_delimiter = ',', default_value = "4,5")]
    pub eval_hops: Vec<usize>,
    /// Instances per hop count
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Leaf edges attached to each chain
    #[arg(long, default_value_t = 0)]
    pub distractors: usize,
    /// Countries difficulty level
    #[arg(long, value_enum, default_value = "s1")]
    pub level: Level,
    /// Countries table (country, subregion, region, neighbours) [default: bundled]
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Held-out validation countries
    #[arg(long, default_value_t = 24)]
    pub n_valid: usize,
    /// Held-out test countries
    #[arg(long, default_value_t = 24)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

/// Data file flags shared by `train` and `eval`; each replaces the entry of
/// the config or checkpoint.
#[derive(Args, Debug, Default)]
pub struct DataArgs {
    /// Background facts and rules [default: none]
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Training facts or JSONL instances [default: from config]
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation split [default: from config]
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Test split [default: from config]
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Extra classification split [default: from config]
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Fact file layout: prolog or tsv [default: prolog]
    #[arg(long)]
    pub format: Option<String>,
    /// Comma-separated answer candidates; switches validation to AUC-PR [default: none]
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<String>>,
}

impl DataArgs {
    fn apply(&self, data: &mut DataConfig) -> std::result::Result<(), Failure> {
        let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
            if v.is_some() {
                slot.clone_from(v);
            }
        };
        set(&mut data.kb, &self.kb);
        set(&mut data.train, &self.train);
        set(&mut data.valid, &self.valid);
        set(&mut data.test, &self.test);
        set(&mut data.eval, &self.eval);
        if let Some(f) = &self.format {
            data.format = f.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
        }
        if self.candidates.is_some() {
            data.candidates.clone_from(&self.candidates);
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON training config [default: built-in defaults]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// link-prediction or classification [default: link-prediction]
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum rule applications per proof [default: 2]
    #[arg(long)]
    pub depth: Option<usize>,
    /// Embedding size [default: 50]
    #[arg(long)]
    pub dim: Option<usize>,
    /// [default: 100]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam step size [default: 0.01]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Reformulators as [variant:]template, comma-separated [default: chain,chain,direct,inverse,chain]
    #[arg(long)]
    pub reformulators: Option<String>,
    /// Variant of reformulators given without one: linear, attentive or memory [default: linear]
    #[arg(long)]
    pub variant: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// train, valid, test or eval [default: test, eval for classification]
    #[arg(long)]
    pub split: Option<String>,
    /// Proof depth [default: the training depth]
    #[arg(long)]
    pub depth: Option<usize>,
    /// Seed echoed in the report [default: the training seed]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Threshold such as "accuracy>=0.9"; repeatable; failure exits with 3
    #[arg(long = "assert")]
    pub asserts: Vec<String>,
    /// Add the best proof of every evaluated goal to the report
    #[arg(long)]
    pub trace: bool,
    /// Also write the report to this file [default: stdout only]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Keep the best N rules [default: all]
    #[arg(long)]
    pub top: Option<usize>,
    /// Print JSON instead of text
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reformulator variant: linear, attentive or memory
    #[arg(long, default_value = "linear")]
    pub variant: String,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Finite-difference step
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Largest accepted relative error
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
    Assert(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Results go to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    let result = match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Train(a) => train_command(&a),
        Command::Eval(a) => eval_command(&a),
        Command::ExtractRules(a) => extract_command(&a),
        Command::Gradcheck(a) => gradcheck_command(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
        Err(Failure::Assert(m)) => {
            eprintln!("{m}");
            EXIT_ASSERT
        }
    }
}

fn parse_variant(s: &str) -> std::result::Result<Variant, Failure> {
    s.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn generate(a: &GenerateArgs) -> Outcome {
    create_dir(&a.out)?;
    let mut cfg = TrainConfig::default();
    match a.task {
        DatasetKind::Kinship => {
            let table = CompositionTable::builtin(&a.table)?;
            let gen = GeneratorConfig {
                table: table.clone(),
                train_hops: a.train_hops.clone(),
                eval_hops: a.eval_hops.clone(),
                instances_per_hop: a.n,
                distractors: a.distractors,
            };
            let splits = crate::logic::generate_kinship_instances(&gen, a.seed)?;
            let (train, eval) = (a.out.join("train.jsonl"), a.out.join("eval.jsonl"));
            write_instances(&train, &splits.train)?;
            write_instances(&eval, &splits.eval)?;
            let max_hops = a.train_hops.iter().chain(&a.eval_hops).copied().max().unwrap_or(1);
            cfg.task = Task::Classification;
            cfg.entity_pool = max_hops + 1 + a.distractors;
            cfg.data.train = Some(train);
            cfg.data.eval = Some(eval);
            cfg.data.relations = Some(table.relations.clone());
            log::info!("wrote {} training and {} evaluation instances", splits.train.len(), splits.eval.len());
        }
        DatasetKind::Countries => {
            let world = match &a.world {
                Some(p) => World::parse(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
                None => World::builtin(),
            };
            let split = countries_split(&world, a.level.into(), a.n_valid, a.n_test, a.seed)?;
            let lines = |facts: &[Atom]| -> String {
                facts.iter().map(|f| format_atom(f, FactFormat::Prolog) + "\n").collect()
            };
            let paths = [a.out.join("train.pl"), a.out.join("valid.pl"), a.out.join("test.pl")];
            for (path, facts) in paths.iter().zip([&split.train, &split.dev, &split.test]) {
                write_text(path, &lines(facts))?;
            }
            let [train, valid, test] = paths;
            cfg.task = Task::LinkPrediction;
            cfg.depth = if a.level == Level::S3 { 2 } else { 1 };
            cfg.epochs = 20;
            cfg.eval_every = 5;
            cfg.data.train = Some(train);
            cfg.data.valid = Some(valid);
            cfg.data.test = Some(test);
            cfg.data.candidates = Some(split.regions.clone());
            log::info!("wrote {} training facts, {} validation and {} test queries", split.train.len(), split.dev.len(), split.test.len());
        }
    }
    cfg.seed = a.seed;
    write_text(&a.out.join("config.json"), &serde_json::to_string_pretty(&cfg)?)?;
    Ok(())
}

fn train_command(a: &TrainArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(t) = a.task {
        cfg.task = t.into();
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.depth {
        cfg.depth = v;
    }
    if let Some(v) = a.dim {
        cfg.dim = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    let variant = a.variant.as_deref().map(parse_variant).transpose()?;
    match (&a.reformulators, variant) {
        (Some(list), v) => {
            cfg.reformulators =
                parse_specs(list, v.unwrap_or(Variant::Linear)).map_err(|e| Failure::Usage(e.to_string()))?;
        }
        (None, Some(v)) => {
            for r in &mut cfg.reformulators {
                r.variant = v;
            }
        }
        (None, None) => {}
    }
    a.data.apply(&mut cfg.data)?;
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let data = cfg.data.load(cfg.task)?;
    let outcome = train(&cfg, &data)?;
    create_dir(&a.out)?;
    write_metric_log(a.out.join("metrics.jsonl"), &outcome.log)?;
    let mut best = outcome.best;
    let mut last = outcome.last;
    best.metric_log = Some("metrics.jsonl".into());
    last.metric_log = Some("metrics.jsonl".into());
    best.save(a.out.join("best.json"))?;
    last.save(a.out.join("last.json"))?;
    print_json(&json!({
        "metric": best.metric,
        "best": {"epoch": best.epoch, "validation": best.validation},
        "last": {"epoch": last.epoch, "validation": last.validation},
        "diverged": outcome.diverged.map(|(epoch, loss)| json!({"epoch": epoch, "loss": loss.to_string()})),
    }))?;
    if let Some((epoch, loss)) = outcome.diverged {
        return Err(Error::Diverged { epoch, loss }.into());
    }
    Ok(())
}

/// A parsed `--assert` threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Assertion {
    pub metric: String,
    pub op: String,
    pub value: f64,
}

impl Assertion {
    pub fn parse(s: &str) -> Result<Self> {
        for op in [">=", "<=", ">", "<"] {
            if let Some((m, v)) = s.split_once(op) {
                let value = v
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad threshold in `{s}`")))?;
                let metric = m.trim();
                if metric.is_empty() {
                    break;
                }
                return Ok(Assertion {
                    metric: metric.to_string(),
                    op: op.to_string(),
                    value,
                });
            }
        }
        Err(Error::Invalid(format!("expected `metric>=value`, got `{s}`")))
    }

    pub fn holds(&self, actual: f64) -> bool {
        match self.op.as_str() {
            ">=" => actual >= self.value,
            "<=" => actual <= self.value,
            ">" => actual > self.value,
            _ => actual < self.value,
        }
    }
}

fn rules_json(model: &Model) -> Result<Value> {
    Ok(serde_json::to_value(extract_rules(model)?)?)
}

fn eval_command(a: &EvalArgs) -> Outcome {
    let asserts = a
        .asserts
        .iter()
        .map(|s| Assertion::parse(s))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let model = ckpt.to_model()?;
    let mut cfg = ckpt.config.clone();
    a.data.apply(&mut cfg.data)?;
    let prover = ProverConfig {
        depth: a.depth.unwrap_or(cfg.depth),
        ..cfg.prover_config()
    };
    let mut metrics = BTreeMap::new();
    let mut report = serde_json::Map::new();
    let split;
    match cfg.task {
        Task::Classification => {
            split = a.split.clone().unwrap_or_else(|| "eval".into());
            let instances = cfg.data.instances(&split)?;
            let relations = ckpt.relations.clone().unwrap_or_else(|| cfg.data.relations_for(&instances));
            let mut c = ModelClassifier::new(&model, &relations, prover.clone())?;
            let per_hop = per_hop_accuracy(&mut c, &instances)?;
            metrics.insert("accuracy".to_string(), overall_accuracy(&per_hop));
            for (h, s) in &per_hop {
                metrics.insert(format!("accuracy@{h}"), s.accuracy);
            }
            report.insert("per_hop".into(), serde_json::to_value(&per_hop)?);
            if a.trace {
                let traces = instances
                    .iter()
                    .map(|i| c.trace(i, &i.target))
                    .collect::<Result<Vec<_>>>()?;
                report.insert("traces".into(), serde_json::to_value(traces)?);
            }
        }
        Task::LinkPrediction => {
            split = a.split.clone().unwrap_or_else(|| "test".into());
            let facts = cfg.data.facts(&split)?;
            let (kb, _) = cfg.data.knowledge_base()?;
            let mut known: HashSet<Atom> = kb.facts().iter().chain(&facts).cloned().collect();
            for name in ["valid", "test"] {
                if cfg.data.split(name).is_ok() {
                    known.extend(cfg.data.facts(name)?);
                }
            }
            let mut scorer = ModelScorer::new(&model, &kb, prover.clone())?;
            let entities = model.store.vocab(Table::Entities).symbols().to_vec();
            let (_, ranking) = link_prediction_metrics(&mut scorer, &facts, &entities, &known)?;
            metrics.extend(ranking);
            if let Some(c) = &cfg.data.candidates {
                metrics.insert("auc_pr".into(), candidate_auc_pr(&mut scorer, &facts, c)?);
            }
            if a.trace {
                let traces = facts.iter().map(|f| scorer.trace(f)).collect::<Result<Vec<_>>>()?;
                report.insert("traces".into(), serde_json::to_value(traces)?);
            }
        }
    }
    report.insert("task".into(), serde_json::to_value(cfg.task)?);
    report.insert("split".into(), json!(split));
    report.insert("checkpoint_epoch".into(), json!(ckpt.epoch));
    report.insert("depth".into(), json!(prover.depth));
    report.insert("metrics".into(), serde_json::to_value(&metrics)?);
    report.insert("rules".into(), rules_json(&model)?);
    report.insert("config".into(), serde_json::to_value(&cfg)?);
    report.insert("seed".into(), json!(a.seed.unwrap_or(cfg.seed)));
    let report = Value::Object(report);
    print_json(&report)?;
    if let Some(p) = &a.out {
        write_text(p, &serde_json::to_string_pretty(&report)?)?;
    }

    let mut failed = Vec::new();
    for t in &asserts {
        match metrics.get(&t.metric) {
            None => {
                let known: Vec<&String> = metrics.keys().collect();
                return Err(Failure::Usage(format!("unknown metric `{}`; available: {known:?}", t.metric)));
            }
            Some(&v) if !t.holds(v) => failed.push(format!("assertion failed: {} = {v} is not {} {}", t.metric, t.op, t.value)),
            Some(_) => {}
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assert(failed.join("\n")))
    }
}

fn extract_command(a: &ExtractArgs) -> Outcome {
    let model = Checkpoint::load(&a.checkpoint)?.to_model()?;
    let mut rules = extract_rules(&model)?;
    if let Some(n) = a.top {
        rules.truncate(n);
    }
    if a.json {
        print_json(&serde_json::to_value(&rules)?)?;
    } else {
        let mut out = std::io::stdout().lock();
        for r in &rules {
            writeln!(out, "{:.4}\t{}\t#{}", r.mean_similarity, r.rule, r.reformulator)
                .map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

/// Random model over `p(rick,beth), p(beth,morty)` with an extra goal
/// predicate `g`, and every ground goal over it.
pub fn gradcheck_problem(seed: u64, variant: Variant, dim: usize) -> Result<(Model, crate::logic::KnowledgeBase, Vec<Atom>)> {
    let (mut kb, _) = parse_kb("p(rick,beth).\np(beth,morty).\n", FactFormat::Prolog)?;
    kb.add_predicate("g");
    let spec = |t: &str| -> Result<ReformulatorSpec> { Ok(ReformulatorSpec { variant, template: t.parse()? }) };
    let mut cfg = ModelConfig {
        dim,
        predicate_scale: 0.5,
        entity_scale: 0.5,
        reformulators: vec![spec("chain")?, spec("inverse")?, spec("direct")?],
        ..Default::default()
    };
    cfg.reformulator_init.weight_scale = 0.5;
    cfg.reformulator_init.memory_size = 3;
    let model = Model::new(kb.predicates(), kb.entities(), &cfg, seed)?;
    let mut goals = Vec::new();
    for p in kb.predicates().symbols() {
        for s in kb.entities().symbols() {
            for o in kb.entities().symbols() {
                goals.push(Atom::ground(p, s, o));
            }
        }
    }
    Ok((model, kb, goals))
}

fn gradcheck_command(a: &GradcheckArgs) -> Outcome {
    let variant = parse_variant(&a.variant)?;
    if a.dim == 0 {
        return Err(Failure::Usage("--dim must be positive".into()));
    }
    let (model, kb, goals) = gradcheck_problem(a.seed, variant, a.dim)?;
    let config = ProverConfig {
        depth: a.depth,
        unify_facts: true,
        min_score: 0.0,
    };
    let err = prove_grad_check(&model, &kb, &goals, &config, a.epsilon)?;
    println!("max relative error: {err:e}");
    if err <= a.tolerance {
        Ok(())
    } else {
        Err(Failure::Assert(format!("relative error {err:e} exceeds {:e}", a.tolerance)))
    }
}
