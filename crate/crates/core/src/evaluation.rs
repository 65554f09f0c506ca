//! Ranking metrics, AUC-PR, per-hop accuracy and rule extraction.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::embeddings::Table;
use crate::error::{Error, Result};
use crate::logic::{symbolic_entails, Atom, CompositionTable, GraphInstance, KnowledgeBase, Term};
use crate::model::Model;
use crate::prover::{CompiledKb, EntityKernels, ProofTrace, ProverConfig, Session};

/// Scores ground atoms.
pub trait Scorer {
    fn score_all(&mut self, atoms: &[Atom]) -> Result<Vec<f64>>;
}

impl<F: FnMut(&Atom) -> Result<f64>> Scorer for F {
    fn score_all(&mut self, atoms: &[Atom]) -> Result<Vec<f64>> {
        atoms.iter().map(self).collect()
    }
}

/// Prover scores against a fixed knowledge base and frozen model.
pub struct ModelScorer<'a> {
    model: &'a Model,
    kb: CompiledKb,
    config: ProverConfig,
    entities: EntityKernels,
}

impl<'a> ModelScorer<'a> {
    pub fn new(model: &'a Model, kb: &KnowledgeBase, config: ProverConfig) -> Result<Self> {
        Ok(ModelScorer {
            model,
            kb: CompiledKb::new(kb, &model.store)?,
            config,
            entities: EntityKernels::new(&model.store),
        })
    }

    /// Best proof of `goal` as a JSON tree.
    pub fn trace(&self, goal: &Atom) -> Result<ProofTrace> {
        let mut g = Graph::new();
        let mut s = Session::with_entities(&mut g, self.model, &self.kb, &self.config, &self.entities)?;
        s.trace(goal)
    }
}

impl Scorer for ModelScorer<'_> {
    fn score_all(&mut self, atoms: &[Atom]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let mut s = Session::with_entities(&mut g, self.model, &self.kb, &self.config, &self.entities)?;
        atoms.iter().map(|a| s.score(a)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Subject,
    Object,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub query: Atom,
    pub corrupted_slot: Slot,
    pub rank: usize,
    pub candidate_count: usize,
}

/// Rank of the true score among `others`: one plus the number of strictly
/// higher scores plus half the ties, rounded up.
pub fn tie_rank(truth: f64, others: &[f64]) -> usize {
    let higher = others.iter().filter(|&&s| s > truth).count();
    let ties = others.iter().filter(|&&s| s == truth).count();
    1 + higher + ties.div_ceil(2)
}

/// Filtered rank of the true entity in `slot` of `query` among `entities`.
/// Corruptions that are known facts are dropped.
pub fn rank_entities(
    scorer: &mut impl Scorer,
    query: &Atom,
    slot: Slot,
    entities: &[String],
    known: &HashSet<Atom>,
) -> Result<RankingResult> {
    if !query.is_ground() {
        return Err(Error::Invalid(format!("query {query} is not ground")));
    }
    let pos = match slot {
        Slot::Subject => 0,
        Slot::Object => 1,
    };
    let truth = query.args[pos].name();
    if !entities.iter().any(|e| e == truth) {
        return Err(Error::UnknownSymbol {
            kind: "entity",
            symbol: truth.to_string(),
        });
    }
    let mut atoms = vec![query.clone()];
    for e in entities {
        if e == truth {
            continue;
        }
        let mut a = query.clone();
        a.args[pos] = Term::constant(e.clone());
        if !known.contains(&a) {
            atoms.push(a);
        }
    }
    let scores = scorer.score_all(&atoms)?;
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {bad} while ranking {query}")));
    }
    Ok(RankingResult {
        query: query.clone(),
        corrupted_slot: slot,
        rank: tie_rank(scores[0], &scores[1..]),
        candidate_count: atoms.len(),
    })
}

/// Mean reciprocal rank (`mrr`) and `hits@k` for every `k` in `ks`.
pub fn mrr_hits(results: &[RankingResult], ks: &[usize]) -> Result<BTreeMap<String, f64>> {
    if results.is_empty() {
        return Err(Error::Invalid("no ranking results".into()));
    }
    let n = results.len() as f64;
    let mut out = BTreeMap::new();
    out.insert("mrr".to_string(), results.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / n);
    for &k in ks {
        let hits = results.iter().filter(|r| r.rank <= k).count() as f64;
        out.insert(format!("hits@{k}"), hits / n);
    }
    Ok(out)
}

/// Ranks both slots of every fact in `test`.
pub fn link_prediction_metrics(
    scorer: &mut impl Scorer,
    test: &[Atom],
    entities: &[String],
    known: &HashSet<Atom>,
) -> Result<(Vec<RankingResult>, BTreeMap<String, f64>)> {
    let mut results = Vec::with_capacity(2 * test.len());
    for fact in test {
        for slot in [Slot::Subject, Slot::Object] {
            results.push(rank_entities(scorer, fact, slot, entities, known)?);
        }
    }
    let metrics = mrr_hits(&results, &[1, 3, 10])?;
    Ok((results, metrics))
}

/// Area under the precision-recall curve. Thresholds run over the distinct
/// scores in descending order; each recall step is weighted by the highest
/// precision reached at that recall or beyond.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auc_pr scores".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Invalid("auc_pr needs at least one positive label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points: Vec<(f64, f64)> = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += labels[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        points.push((tp as f64 / positives as f64, tp as f64 / seen as f64));
    }
    let mut area = 0.0;
    let mut envelope = 0.0f64;
    for k in (0..points.len()).rev() {
        envelope = envelope.max(points[k].1);
        let lower = if k == 0 { 0.0 } else { points[k - 1].0 };
        area += (points[k].0 - lower) * envelope;
    }
    Ok(area)
}

/// AUC-PR over every `(subject, candidate)` pair for the subjects of
/// `positives`, which must share one predicate. A pair is positive when it
/// occurs in `positives`.
pub fn candidate_auc_pr(scorer: &mut impl Scorer, positives: &[Atom], candidates: &[String]) -> Result<f64> {
    let Some(first) = positives.first() else {
        return Err(Error::Invalid("no positive facts".into()));
    };
    let truth: HashSet<&Atom> = positives.iter().collect();
    let mut subjects: Vec<&str> = Vec::new();
    for p in positives {
        if p.predicate != first.predicate {
            return Err(Error::Invalid("positive facts must share one predicate".into()));
        }
        if !subjects.contains(&p.args[0].name()) {
            subjects.push(p.args[0].name());
        }
    }
    let atoms: Vec<Atom> = subjects
        .iter()
        .flat_map(|s| candidates.iter().map(move |c| Atom::ground(&first.predicate, s, c)))
        .collect();
    let labels: Vec<bool> = atoms.iter().map(|a| truth.contains(a)).collect();
    let scores = scorer.score_all(&atoms)?;
    auc_pr(&scores, &labels)
}

/// Predicts the relation holding between the query entities of an instance.
pub trait Classifier {
    fn classify(&mut self, instance: &GraphInstance) -> Result<String>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopStat {
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
}

/// Accuracy per hop count; hops without instances are absent.
pub type HopAccuracy = BTreeMap<usize, HopStat>;

pub fn per_hop_accuracy(classifier: &mut impl Classifier, instances: &[GraphInstance]) -> Result<HopAccuracy> {
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for inst in instances {
        let predicted = classifier.classify(inst)?;
        let c = counts.entry(inst.hops).or_default();
        c.0 += (predicted == inst.target) as usize;
        c.1 += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(h, (correct, n))| {
            (
                h,
                HopStat {
                    accuracy: correct as f64 / n as f64,
                    correct,
                    n,
                },
            )
        })
        .collect())
}

/// Accuracy over all instances, or 0 for an empty set.
pub fn overall_accuracy(per_hop: &HopAccuracy) -> f64 {
    let (c, n) = per_hop.values().fold((0, 0), |(c, n), s| (c + s.correct, n + s.n));
    if n == 0 {
        0.0
    } else {
        c as f64 / n as f64
    }
}

/// Exact symbolic reasoning with the rules of a composition table.
pub struct OracleClassifier<'a> {
    pub table: &'a CompositionTable,
}

impl Classifier for OracleClassifier<'_> {
    fn classify(&mut self, instance: &GraphInstance) -> Result<String> {
        let mut kb = instance.to_kb()?;
        for r in &self.table.ground_rules {
            kb.add_rule(r.clone());
        }
        for rel in &self.table.relations {
            if symbolic_entails(&kb, &instance.query_atom(rel), instance.hops) {
                return Ok(rel.clone());
            }
        }
        Ok(self.table.relations.first().cloned().unwrap_or_default())
    }
}

/// Name of pool entity `i`.
pub fn pool_entity(i: usize) -> String {
    format!("e{i}")
}

/// An instance mapped onto the shared entity pool of a model: the `i`-th
/// entity in order of first appearance takes pool row `i`.
pub struct EncodedInstance {
    pub kb: CompiledKb,
    pub query: [u32; 2],
}

pub fn encode_instance(instance: &GraphInstance, model: &Model) -> Result<EncodedInstance> {
    let ents = instance.entities();
    let pool = model.store.vocab(Table::Entities).len();
    if ents.len() > pool {
        return Err(Error::Config(format!(
            "instance has {} entities but the entity pool holds {pool}",
            ents.len()
        )));
    }
    let row_of = |e: &str| -> Result<usize> {
        let i = ents
            .iter()
            .position(|x| *x == e)
            .ok_or_else(|| Error::Invalid(format!("entity `{e}` not in instance")))?;
        model.store.index(Table::Entities, &pool_entity(i))
    };
    let kb = CompiledKb::with_entity_rows(&instance.to_kb()?, &model.store, row_of)?;
    let query = [row_of(&instance.query.0)? as u32, row_of(&instance.query.1)? as u32];
    Ok(EncodedInstance { kb, query })
}

/// Index of the largest score; the first one on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Prover-based classification over a list of candidate relations.
pub struct ModelClassifier<'a> {
    model: &'a Model,
    relations: Vec<String>,
    rows: Vec<u32>,
    config: ProverConfig,
    entities: EntityKernels,
}

impl<'a> ModelClassifier<'a> {
    pub fn new(model: &'a Model, relations: &[String], config: ProverConfig) -> Result<Self> {
        let rows = relations
            .iter()
            .map(|r| model.store.index(Table::Predicates, r).map(|i| i as u32))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Config("no candidate relations".into()));
        }
        Ok(ModelClassifier {
            model,
            relations: relations.to_vec(),
            rows,
            config,
            entities: EntityKernels::new(&model.store),
        })
    }

    /// Score of every candidate relation, in order.
    pub fn scores(&self, instance: &GraphInstance) -> Result<Vec<f64>> {
        let enc = encode_instance(instance, self.model)?;
        let mut g = Graph::new();
        let mut s = Session::with_entities(&mut g, self.model, &enc.kb, &self.config, &self.entities)?;
        self.rows
            .iter()
            .map(|&p| s.score_rows(p, enc.query[0], enc.query[1]))
            .collect()
    }

    /// Best proof of `relation` between the query entities. Entities appear
    /// under their pool names.
    pub fn trace(&self, instance: &GraphInstance, relation: &str) -> Result<ProofTrace> {
        let enc = encode_instance(instance, self.model)?;
        let ents = self.model.store.vocab(Table::Entities);
        let goal = Atom::ground(relation, ents.symbol(enc.query[0] as usize), ents.symbol(enc.query[1] as usize));
        let mut g = Graph::new();
        Session::with_entities(&mut g, self.model, &enc.kb, &self.config, &self.entities)?.trace(&goal)
    }
}

impl Classifier for ModelClassifier<'_> {
    fn classify(&mut self, instance: &GraphInstance) -> Result<String> {
        let scores = self.scores(instance)?;
        Ok(self.relations[argmax(&scores)].clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRule {
    pub goal: String,
    pub reformulator: usize,
    pub rule: String,
    pub similarities: Vec<f64>,
    pub mean_similarity: f64,
}

/// Decodes the rule of every reformulator for every predicate; sorted by
/// mean similarity, highest first.
pub fn extract_rules(model: &Model) -> Result<Vec<ExtractedRule>> {
    let mut out = Vec::new();
    for goal in model.store.vocab(Table::Predicates).symbols() {
        for (i, r) in model.reformulators.iter().enumerate() {
            let (rule, sims) = r.decode_rule(goal, &model.store)?;
            let mean = if sims.is_empty() {
                1.0
            } else {
                sims.iter().sum::<f64>() / sims.len() as f64
            };
            out.push(ExtractedRule {
                goal: goal.clone(),
                reformulator: i,
                rule: rule.to_string(),
                similarities: sims,
                mean_similarity: mean,
            });
        }
    }
    out.sort_by(|a, b| b.mean_similarity.total_cmp(&a.mean_similarity));
    Ok(out)
}
