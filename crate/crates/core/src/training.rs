//! Losses, negative sampling, Adam and the training loop.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, ParamGrads, ParamId, ParamStore, Tensor};
use crate::embeddings::Table;
use crate::error::{Error, Result};
use crate::evaluation::{
    argmax, candidate_auc_pr, encode_instance, link_prediction_metrics, per_hop_accuracy, overall_accuracy,
    pool_entity, ModelClassifier, ModelScorer,
};
use crate::logic::{load_kb, read_instances, Atom, FactFormat, GraphInstance, KnowledgeBase, Term, Vocab};
use crate::model::{Model, ModelConfig, ModelSegment};
use crate::prover::{CompiledKb, ProverConfig, Session};
use crate::reformulate::{ReformulatorInit, ReformulatorSpec};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    LinkPrediction,
    Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub dim: usize,
    pub depth: usize,
    pub reformulators: Vec<ReformulatorSpec>,
    pub reformulator_init: ReformulatorInit,
    pub bandwidth: f64,
    pub predicate_scale: f64,
    pub entity_scale: f64,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_every: usize,
    /// Softmax temperature of the classification loss.
    pub temperature: f64,
    /// Proof paths scoring below this are pruned.
    pub min_score: f64,
    /// Size of the shared entity pool for classification instances.
    pub entity_pool: usize,
    pub data: DataConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        TrainConfig {
            task: Task::LinkPrediction,
            dim: model.dim,
            depth: 2,
            reformulators: model.reformulators,
            reformulator_init: model.reformulator_init,
            bandwidth: model.bandwidth,
            predicate_scale: model.predicate_scale,
            entity_scale: model.entity_scale,
            negatives_per_positive: 4,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            eval_every: 1,
            temperature: 0.1,
            min_score: ProverConfig::default().min_score,
            entity_pool: 64,
            data: DataConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim as f64),
            ("batch_size", self.batch_size as f64),
            ("eval_every", self.eval_every as f64),
            ("negatives_per_positive", self.negatives_per_positive as f64),
            ("entity_pool", self.entity_pool as f64),
            ("learning_rate", self.learning_rate),
            ("bandwidth", self.bandwidth),
            ("temperature", self.temperature),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.min_score >= 0.0 && self.min_score < 1.0) {
            return Err(Error::Config(format!("min_score must lie in [0, 1), got {}", self.min_score)));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            bandwidth: self.bandwidth,
            predicate_scale: self.predicate_scale,
            entity_scale: self.entity_scale,
            reformulators: self.reformulators.clone(),
            reformulator_init: self.reformulator_init,
        }
    }

    pub fn prover_config(&self) -> ProverConfig {
        ProverConfig {
            depth: self.depth,
            unify_facts: true,
            min_score: self.min_score,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Up to `n` distinct corruptions of `fact`, alternating object and subject
/// replacement. Corruptions that are facts of `kb` are never returned.
pub fn sample_negatives(kb: &KnowledgeBase, fact: &Atom, n: usize, rng: &mut impl Rng) -> Vec<Atom> {
    let entities = kb.entities().symbols();
    let mut pools: [Vec<Atom>; 2] = [Vec::new(), Vec::new()];
    for (side, pool) in [1usize, 0].into_iter().zip(pools.iter_mut()) {
        for e in entities {
            if e == fact.args[side].name() {
                continue;
            }
            let mut a = fact.clone();
            a.args[side] = Term::constant(e.clone());
            if !kb.contains(&a) {
                pool.push(a);
            }
        }
    }
    let available = pools[0].len() + pools[1].len();
    if available < n {
        log::warn!("only {available} corruptions of {fact} exist, {n} requested");
    }
    let mut out = Vec::with_capacity(n.min(available));
    for i in 0..n.min(available) {
        let side = if pools[i % 2].is_empty() { 1 - i % 2 } else { i % 2 };
        let k = rng.random_range(0..pools[side].len());
        out.push(pools[side].swap_remove(k));
    }
    out
}

/// `log(clamp(x))`; the gradient vanishes where the clamp is active.
fn clamped_log(g: &mut Graph, x: NodeId) -> Result<NodeId> {
    let v = g.scalar(x);
    if v < CLAMP {
        let c = g.constant(CLAMP.ln());
        Ok(c)
    } else if v > 1.0 - CLAMP {
        Ok(g.constant((1.0 - CLAMP).ln()))
    } else {
        g.log(x)
    }
}

fn mean(g: &mut Graph, terms: &[NodeId], scale: f64) -> Result<NodeId> {
    let v = g.concat(terms)?;
    let s = g.sum(v)?;
    g.scale(s, scale / terms.len() as f64)
}

/// Binary cross-entropy on prover scores, averaged over all atoms.
pub fn loss_link_prediction(g: &mut Graph, positives: &[NodeId], negatives: &[NodeId]) -> Result<NodeId> {
    if positives.is_empty() && negatives.is_empty() {
        return Err(Error::Invalid("no scores for the loss".into()));
    }
    let one = g.constant(1.0);
    let mut terms = Vec::with_capacity(positives.len() + negatives.len());
    for &p in positives {
        terms.push(clamped_log(g, p)?);
    }
    for &n in negatives {
        let c = g.sub(one, n)?;
        terms.push(clamped_log(g, c)?);
    }
    mean(g, &terms, -1.0)
}

/// Cross-entropy of `softmax(scores / temperature)` against `target`.
pub fn loss_classification(g: &mut Graph, scores: &[NodeId], target: usize, temperature: f64) -> Result<NodeId> {
    if target >= scores.len() {
        return Err(Error::Invalid(format!("target {target} out of {} classes", scores.len())));
    }
    let v = g.concat(scores)?;
    let logits = g.scale(v, 1.0 / temperature)?;
    let p = g.softmax(logits)?;
    let pt = g.index(p, target)?;
    let l = g.log(pt)?;
    g.scale(l, -1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        TrainConfig::default().adam()
    }
}

/// First and second moment estimates per parameter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: BTreeMap<ParamId, Tensor>,
    pub v: BTreeMap<ParamId, Tensor>,
    pub step: u64,
}

/// One bias-corrected Adam update. Parameters without a gradient, frozen
/// parameters and parameters with a non-finite gradient are left alone; an
/// all-zero gradient only decays the moments.
pub fn adam_step(params: &mut ParamStore, grads: &ParamGrads, state: &mut OptimizerState, hyper: &AdamConfig) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    for (&id, grad) in grads {
        if id.0 >= params.len() || !params.get(id).trainable {
            continue;
        }
        let shape = params.value(id).shape().to_vec();
        if grad.shape() != shape.as_slice() {
            return Err(Error::Shape(format!(
                "gradient {:?} for parameter `{}` of shape {shape:?}",
                grad.shape(),
                params.get(id).name
            )));
        }
        if !grad.is_finite() {
            log::warn!("skipping non-finite gradient of `{}`", params.get(id).name);
            continue;
        }
        let m = state.m.entry(id).or_insert_with(|| Tensor::zeros(&shape));
        let v = state.v.entry(id).or_insert_with(|| Tensor::zeros(&shape));
        let zero = grad.is_zero();
        let value = params.value_mut(id).data_mut();
        for i in 0..grad.len() {
            let gi = grad.data()[i];
            let mi = hyper.beta1 * m.data()[i] + (1.0 - hyper.beta1) * gi;
            let vi = hyper.beta2 * v.data()[i] + (1.0 - hyper.beta2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            if !zero {
                value[i] -= hyper.learning_rate * (mi / c1) / ((vi / c2).sqrt() + hyper.epsilon);
            }
        }
    }
    Ok(())
}

/// Link-prediction data. Validation uses AUC-PR over `candidates` when
/// given, filtered MRR otherwise.
#[derive(Clone, Debug, Default)]
pub struct LinkData {
    pub train: KnowledgeBase,
    /// Facts used as training positives; every fact of `train` when absent.
    pub positives: Option<Vec<Atom>>,
    pub valid: Vec<Atom>,
    /// Held-out facts that must stay invisible to training; also filtered
    /// out when ranking.
    pub test: Vec<Atom>,
    pub candidates: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default)]
pub struct ClassificationData {
    pub relations: Vec<String>,
    pub train: Vec<GraphInstance>,
    /// Falls back to the training instances when empty.
    pub valid: Vec<GraphInstance>,
}

#[derive(Clone, Debug)]
pub enum TrainData {
    Link(LinkData),
    Classification(ClassificationData),
}

impl TrainData {
    fn task(&self) -> Task {
        match self {
            TrainData::Link(_) => Task::LinkPrediction,
            TrainData::Classification(_) => Task::Classification,
        }
    }
}

/// Data files of a run. Relative paths resolve against the working
/// directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub format: FactFormat,
    /// Background facts and rules, visible to the prover but never used as
    /// training positives.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kb: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    /// Extra classification split, typically longer chains.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<PathBuf>,
    /// Answer candidates for AUC-PR link prediction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
    /// Classification labels; derived from the instances when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<String>>,
}

impl DataConfig {
    pub fn split(&self, name: &str) -> Result<&Path> {
        let path = match name {
            "train" => &self.train,
            "valid" => &self.valid,
            "test" => &self.test,
            "eval" => &self.eval,
            other => return Err(Error::Config(format!("unknown split `{other}`"))),
        };
        path.as_deref()
            .ok_or_else(|| Error::Config(format!("no `{name}` file configured")))
    }

    /// The proving knowledge base: background facts plus training facts.
    pub fn knowledge_base(&self) -> Result<(KnowledgeBase, Vec<Atom>)> {
        let mut kb = match &self.kb {
            Some(p) => load_kb(p, self.format)?.0,
            None => KnowledgeBase::new(),
        };
        let background = kb.len();
        if let Some(p) = &self.train {
            let (train, _) = load_kb(p, self.format)?;
            for f in train.facts() {
                kb.add_fact(f.clone())?;
            }
            for r in train.rules() {
                kb.add_rule(r.clone());
            }
        }
        if kb.is_empty() && self.kb.is_none() && self.train.is_none() {
            return Err(Error::Config("no `kb` or `train` file configured".into()));
        }
        let positives = kb.facts()[background..].to_vec();
        Ok((kb, positives))
    }

    pub fn facts(&self, split: &str) -> Result<Vec<Atom>> {
        Ok(load_kb(self.split(split)?, self.format)?.0.facts().to_vec())
    }

    pub fn instances(&self, split: &str) -> Result<Vec<GraphInstance>> {
        read_instances(self.split(split)?)
    }

    /// Sorted labels of `instances` unless given explicitly.
    pub fn relations_for(&self, instances: &[GraphInstance]) -> Vec<String> {
        if let Some(r) = &self.relations {
            return r.clone();
        }
        let mut set = std::collections::BTreeSet::new();
        for i in instances {
            set.insert(i.target.clone());
            for (_, p, _) in &i.edges {
                set.insert(p.clone());
            }
        }
        set.into_iter().collect()
    }

    /// Reads the training data for `task`.
    pub fn load(&self, task: Task) -> Result<TrainData> {
        match task {
            Task::LinkPrediction => {
                let (kb, positives) = self.knowledge_base()?;
                let opt = |name: &str, p: &Option<PathBuf>| p.as_ref().map(|_| self.facts(name)).transpose();
                Ok(TrainData::Link(LinkData {
                    train: kb,
                    positives: Some(positives),
                    valid: opt("valid", &self.valid)?.unwrap_or_default(),
                    test: opt("test", &self.test)?.unwrap_or_default(),
                    candidates: self.candidates.clone(),
                }))
            }
            Task::Classification => {
                let train = self.instances("train")?;
                let valid = match &self.valid {
                    Some(_) => self.instances("valid")?,
                    None => Vec::new(),
                };
                let all: Vec<GraphInstance> = train.iter().chain(&valid).cloned().collect();
                Ok(TrainData::Classification(ClassificationData {
                    relations: self.relations_for(&all),
                    train,
                    valid,
                }))
            }
        }
    }
}

/// Fails when any evaluation fact is visible to the loss, or when a
/// multi-hop instance states its own answer.
pub fn check_leakage(data: &TrainData) -> Result<()> {
    match data {
        TrainData::Link(d) => {
            if let Some(f) = d.valid.iter().chain(&d.test).find(|f| d.train.contains(f)) {
                return Err(Error::Invalid(format!("evaluation fact {f} is part of the training facts")));
            }
        }
        TrainData::Classification(d) => {
            for inst in d.train.iter().chain(&d.valid).filter(|i| i.hops > 1) {
                let (s, o) = &inst.query;
                if inst.edges.iter().any(|(a, p, b)| a == s && b == o && *p == inst.target) {
                    return Err(Error::Invalid(format!(
                        "instance states its own answer {}({s}, {o}) as an edge",
                        inst.target
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<f64>,
    pub metric: String,
    pub wall_time: f64,
}

/// Saved model with the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub epoch: usize,
    pub metric: String,
    pub validation: Option<f64>,
    /// Candidate relations of a classification model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_log: Option<String>,
    #[serde(flatten)]
    pub model: ModelSegment,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_model(&self) -> Result<Model> {
        Model::from_segment(&self.model)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Checkpoint with the best validation metric; the initial model when
    /// validation never ran.
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: Vec<MetricRecord>,
    /// Epoch and loss at which training stopped on a non-finite loss.
    pub diverged: Option<(usize, f64)>,
}

/// Builds the initial model for `data`. Rules of a link-prediction
/// knowledge base become fixed reformulators.
pub fn init_model(config: &TrainConfig, data: &TrainData) -> Result<Model> {
    let (preds, ents) = match data {
        TrainData::Link(d) => {
            let mut preds = d.train.predicates().clone();
            let mut ents = d.train.entities().clone();
            for f in d.valid.iter().chain(&d.test) {
                preds.insert(&f.predicate);
                ents.insert(f.args[0].name());
                ents.insert(f.args[1].name());
            }
            if let Some(c) = &d.candidates {
                for e in c {
                    ents.insert(e);
                }
            }
            (preds, ents)
        }
        TrainData::Classification(d) => {
            let mut preds = Vocab::new();
            for r in &d.relations {
                preds.insert(r);
            }
            for inst in d.train.iter().chain(&d.valid) {
                for (_, p, _) in &inst.edges {
                    preds.insert(p);
                }
                preds.insert(&inst.target);
            }
            let mut ents = Vocab::new();
            for i in 0..config.entity_pool {
                ents.insert(&pool_entity(i));
            }
            (preds, ents)
        }
    };
    let mut model = Model::new(&preds, &ents, &config.model_config(), config.seed)?;
    if let TrainData::Link(d) = data {
        for r in d.train.rules() {
            model.install_rule(r.clone())?;
        }
    }
    Ok(model)
}

struct Trainer<'c> {
    config: &'c TrainConfig,
    prover: ProverConfig,
    adam: AdamConfig,
    state: OptimizerState,
    rng: ChaCha8Rng,
}

impl Trainer<'_> {
    fn apply(&mut self, model: &mut Model, grads: &ParamGrads) -> Result<()> {
        adam_step(model.params_mut(), grads, &mut self.state, &self.adam)
    }

    fn link_epoch(&mut self, model: &mut Model, d: &LinkData, compiled: &CompiledKb) -> Result<f64> {
        let positives = d.positives.as_deref().unwrap_or(d.train.facts());
        let mut order: Vec<usize> = (0..positives.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for batch in order.chunks(self.config.batch_size) {
            let mut negatives = Vec::with_capacity(batch.len());
            for &i in batch {
                negatives.push(sample_negatives(&d.train, &positives[i], self.config.negatives_per_positive, &mut self.rng));
            }
            let mut g = Graph::new();
            let loss = {
                let mut s = Session::new(&mut g, model, compiled, &self.prover)?;
                let mut pos = Vec::with_capacity(batch.len());
                let mut neg = Vec::new();
                for (&i, negs) in batch.iter().zip(&negatives) {
                    let fact = &positives[i];
                    s.set_mask(compiled.find_atom(fact, &model.store));
                    pos.push(s.prove(fact)?);
                    s.set_mask(None);
                    for n in negs {
                        neg.push(s.prove(n)?);
                    }
                }
                loss_link_prediction(s.graph(), &pos, &neg)?
            };
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Ok(value);
            }
            let grads = g.param_grads(&g.backward(loss)?);
            self.apply(model, &grads)?;
            total += value * batch.len() as f64;
            count += batch.len();
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    fn classification_epoch(
        &mut self,
        model: &mut Model,
        d: &ClassificationData,
        encoded: &[crate::evaluation::EncodedInstance],
        targets: &[usize],
        rows: &[u32],
    ) -> Result<(f64, f64)> {
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut total, mut correct) = (0.0, 0usize);
        for batch in order.chunks(self.config.batch_size) {
            let mut g = Graph::new();
            let loss = {
                let mut s = Session::new(&mut g, model, &encoded[batch[0]].kb, &self.prover)?;
                let mut losses = Vec::with_capacity(batch.len());
                for &i in batch {
                    let enc = &encoded[i];
                    s.set_kb(&enc.kb);
                    let scores = rows
                        .iter()
                        .map(|&p| s.prove_rows(p, enc.query[0], enc.query[1]))
                        .collect::<Result<Vec<_>>>()?;
                    let values: Vec<f64> = scores.iter().map(|&n| s.graph().scalar(n)).collect();
                    correct += (argmax(&values) == targets[i]) as usize;
                    losses.push(loss_classification(s.graph(), &scores, targets[i], self.config.temperature)?);
                }
                mean(s.graph(), &losses, 1.0)?
            };
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Ok((value, 0.0));
            }
            let grads = g.param_grads(&g.backward(loss)?);
            self.apply(model, &grads)?;
            total += value * batch.len() as f64;
        }
        let n = d.train.len().max(1) as f64;
        Ok((total / n, correct as f64 / n))
    }
}

/// Validation metric name and value.
pub fn validate_model(model: &Model, config: &TrainConfig, data: &TrainData) -> Result<(String, f64)> {
    let prover = config.prover_config();
    match data {
        TrainData::Link(d) => {
            if d.valid.is_empty() {
                return Err(Error::Invalid("no validation facts".into()));
            }
            let mut scorer = ModelScorer::new(model, &d.train, prover)?;
            match &d.candidates {
                Some(c) => Ok(("auc_pr".into(), candidate_auc_pr(&mut scorer, &d.valid, c)?)),
                None => {
                    let known: HashSet<Atom> = d.train.facts().iter().chain(&d.valid).chain(&d.test).cloned().collect();
                    let ents = model.store.vocab(Table::Entities).symbols().to_vec();
                    let (_, m) = link_prediction_metrics(&mut scorer, &d.valid, &ents, &known)?;
                    Ok(("mrr".into(), m["mrr"]))
                }
            }
        }
        TrainData::Classification(d) => {
            let set = if d.valid.is_empty() { &d.train } else { &d.valid };
            let mut c = ModelClassifier::new(model, &d.relations, prover)?;
            Ok(("accuracy".into(), overall_accuracy(&per_hop_accuracy(&mut c, set)?)))
        }
    }
}

fn metric_name(data: &TrainData) -> &'static str {
    match data {
        TrainData::Link(LinkData { candidates: Some(_), .. }) => "auc_pr",
        TrainData::Link(_) => "mrr",
        TrainData::Classification(_) => "accuracy",
    }
}

/// Trains from a fresh model. The returned log holds one record per epoch.
pub fn train(config: &TrainConfig, data: &TrainData) -> Result<TrainOutcome> {
    config.validate()?;
    if config.task != data.task() {
        return Err(Error::Config(format!("config task {:?} does not match the data", config.task)));
    }
    check_leakage(data)?;
    let mut model = init_model(config, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let mut trainer = Trainer {
        config,
        prover: config.prover_config(),
        adam: config.adam(),
        state: OptimizerState::default(),
        rng,
    };
    let metric = metric_name(data).to_string();
    let relations = match data {
        TrainData::Classification(d) => Some(d.relations.clone()),
        TrainData::Link(_) => None,
    };
    let snapshot = |model: &Model, epoch: usize, validation: Option<f64>| Checkpoint {
        config: config.clone(),
        epoch,
        metric: metric.clone(),
        validation,
        relations: relations.clone(),
        metric_log: None,
        model: model.to_segment(),
    };
    let mut best = snapshot(&model, 0, None);
    let mut log = Vec::new();
    let mut diverged = None;

    let compiled = match data {
        TrainData::Link(d) => Some(CompiledKb::new(&d.train, &model.store)?),
        TrainData::Classification(_) => None,
    };
    let (encoded, targets, rows) = match data {
        TrainData::Classification(d) => {
            if d.train.is_empty() {
                return Err(Error::Invalid("no training instances".into()));
            }
            let encoded = d
                .train
                .iter()
                .map(|i| encode_instance(i, &model))
                .collect::<Result<Vec<_>>>()?;
            let targets = d
                .train
                .iter()
                .map(|i| {
                    d.relations
                        .iter()
                        .position(|r| *r == i.target)
                        .ok_or_else(|| Error::Invalid(format!("target `{}` is not a candidate relation", i.target)))
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = d
                .relations
                .iter()
                .map(|r| model.store.index(Table::Predicates, r).map(|i| i as u32))
                .collect::<Result<Vec<_>>>()?;
            (encoded, targets, rows)
        }
        TrainData::Link(_) => (Vec::new(), Vec::new(), Vec::new()),
    };

    let start = Instant::now();
    for epoch in 1..=config.epochs {
        let (loss, train_accuracy) = match data {
            TrainData::Link(d) => (
                trainer.link_epoch(&mut model, d, compiled.as_ref().expect("compiled link data"))?,
                None,
            ),
            TrainData::Classification(d) => {
                let (l, a) = trainer.classification_epoch(&mut model, d, &encoded, &targets, &rows)?;
                (l, Some(a))
            }
        };
        if !loss.is_finite() {
            log::warn!("non-finite loss {loss} at epoch {epoch}; keeping the last good checkpoint");
            diverged = Some((epoch, loss));
            break;
        }
        let validation = if epoch % config.eval_every == 0 || epoch == config.epochs {
            Some(validate_model(&model, config, data)?.1)
        } else {
            None
        };
        if let Some(v) = validation {
            if best.validation.is_none_or(|b| v > b) {
                best = snapshot(&model, epoch, Some(v));
            }
        }
        log::info!(
            "epoch {epoch}: loss {loss:.6}{}{}",
            train_accuracy.map(|a| format!(" train_accuracy {a:.4}")).unwrap_or_default(),
            validation.map(|v| format!(" {metric} {v:.4}")).unwrap_or_default()
        );
        log.push(MetricRecord {
            epoch,
            loss,
            train_accuracy,
            validation,
            metric: metric.clone(),
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    let last_epoch = log.last().map(|r| r.epoch).unwrap_or(0);
    let last_validation = log.last().and_then(|r| r.validation);
    let last = if diverged.is_some() {
        best.clone()
    } else {
        snapshot(&model, last_epoch, last_validation)
    };
    Ok(TrainOutcome {
        best,
        last,
        log,
        diverged,
    })
}

/// Writes records as JSON Lines.
pub fn write_metric_log(path: impl AsRef<Path>, log: &[MetricRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in log {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
