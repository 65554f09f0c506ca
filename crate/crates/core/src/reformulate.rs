//! Goal-conditioned rule generation.
//!
//! A [`Reformulator`] maps the predicate embedding of a goal to one rule
//! whose variable pattern is fixed by a [`Template`] and whose body
//! predicates are produced by a trainable function of that embedding.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::embeddings::{EmbeddingStore, Table};
use crate::error::{Error, Result};
use crate::logic::{Atom, Rule, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    /// `H(X,Y) :- B(X,Y)`
    Direct,
    /// `H(X,Y) :- B(Y,X)`
    Inverse,
    /// `H(X,Y) :- B1(X,Z), B2(Z,Y)`
    Chain,
}

impl Template {
    pub fn body_len(self) -> usize {
        match self {
            Template::Direct | Template::Inverse => 1,
            Template::Chain => 2,
        }
    }

    fn body_args(self) -> Vec<[&'static str; 2]> {
        match self {
            Template::Direct => vec![["X", "Y"]],
            Template::Inverse => vec![["Y", "X"]],
            Template::Chain => vec![["X", "Z"], ["Z", "Y"]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Template::Direct => "direct",
            Template::Inverse => "inverse",
            Template::Chain => "chain",
        }
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "direct" => Ok(Template::Direct),
            "inverse" => Ok(Template::Inverse),
            "chain" => Ok(Template::Chain),
            other => Err(Error::Config(format!("unknown rule template `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Linear,
    Attentive,
    Memory,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Linear => "linear",
            Variant::Attentive => "attentive",
            Variant::Memory => "memory",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(Variant::Linear),
            "attentive" => Ok(Variant::Attentive),
            "memory" => Ok(Variant::Memory),
            other => Err(Error::Config(format!("unknown reformulator variant `{other}`"))),
        }
    }
}

/// A trainable reformulator description: `variant:template`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ReformulatorSpec {
    pub variant: Variant,
    pub template: Template,
}

impl fmt::Display for ReformulatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.variant.name(), self.template.name())
    }
}

impl FromStr for ReformulatorSpec {
    type Err = Error;

    /// `variant:template`, or a bare template for the linear variant.
    fn from_str(s: &str) -> Result<Self> {
        parse_specs(s, Variant::Linear)?
            .into_iter()
            .next()
            .filter(|_| !s.contains(','))
            .ok_or_else(|| Error::Config(format!("expected one reformulator spec, got `{s}`")))
    }
}

impl TryFrom<String> for ReformulatorSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ReformulatorSpec> for String {
    fn from(spec: ReformulatorSpec) -> String {
        spec.to_string()
    }
}

/// Parses a comma-separated list such as `chain,attentive:inverse`. Items
/// without a variant use `default`.
pub fn parse_specs(list: &str, default: Variant) -> Result<Vec<ReformulatorSpec>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| match item.split_once(':') {
            Some((v, t)) => Ok(ReformulatorSpec {
                variant: v.parse()?,
                template: t.parse()?,
            }),
            None => Ok(ReformulatorSpec {
                variant: default,
                template: item.parse()?,
            }),
        })
        .collect()
}

/// Initialisation settings for trainable reformulators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReformulatorInit {
    /// Standard deviation of the entries of every weight matrix.
    pub weight_scale: f64,
    /// Rows of the memory variant.
    pub memory_size: usize,
    /// Produce the head predicate with its own slot instead of reusing the
    /// goal predicate.
    pub transformed_head: bool,
}

impl Default for ReformulatorInit {
    fn default() -> Self {
        ReformulatorInit {
            weight_scale: 0.1,
            memory_size: 32,
            transformed_head: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Slot {
    Linear { weight: ParamId, bias: ParamId },
    Attentive { weight: ParamId },
    Memory { values: ParamId },
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Learned {
        spec: ReformulatorSpec,
        /// Memory key matrix, shared by all slots.
        keys: Option<ParamId>,
        head: Option<Slot>,
        body: Vec<Slot>,
    },
    Fixed {
        rule: Rule,
    },
}

/// One `select` module.
#[derive(Clone, Debug, PartialEq)]
pub struct Reformulator {
    kind: Kind,
}

/// Predicate of a generated atom: a graph vector plus, for installed
/// symbolic rules, the predicate symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleAtom {
    pub predicate: NodeId,
    pub symbol: Option<String>,
    pub args: [Term; 2],
}

/// A rule whose predicates are graph vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedRule {
    pub head: RuleAtom,
    pub body: Vec<RuleAtom>,
}

/// Per-graph memo for values shared by all `select` calls.
#[derive(Clone, Debug, Default)]
pub struct SelectCache {
    predicate_matrix: Option<NodeId>,
}

impl SelectCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn predicate_matrix(&mut self, g: &mut Graph, store: &EmbeddingStore) -> Result<NodeId> {
        if let Some(m) = self.predicate_matrix {
            return Ok(m);
        }
        let rows: Vec<NodeId> = (0..store.vocab(Table::Predicates).len())
            .map(|i| store.row_node(g, Table::Predicates, i))
            .collect();
        let m = g.stack_rows(&rows)?;
        self.predicate_matrix = Some(m);
        Ok(m)
    }
}

fn gaussian(rng: &mut impl Rng, scale: f64, shape: &[usize]) -> Result<Tensor> {
    let normal = Normal::new(0.0, scale).map_err(|e| Error::Config(format!("init scale {scale}: {e}")))?;
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| normal.sample(rng)).collect())
}

impl Reformulator {
    /// Registers the parameters of a trainable reformulator in the store.
    pub fn new(
        spec: ReformulatorSpec,
        store: &mut EmbeddingStore,
        init: &ReformulatorInit,
        rng: &mut impl Rng,
        name: &str,
    ) -> Result<Self> {
        let k = store.dim();
        let n_rel = store.vocab(Table::Predicates).len();
        if spec.variant == Variant::Memory && init.memory_size == 0 {
            return Err(Error::Config("memory size must be positive".into()));
        }
        let n_mem = init.memory_size;
        let s = init.weight_scale;
        let params = store.params_mut();
        let keys = match spec.variant {
            Variant::Memory => Some(params.add(format!("{name}/keys"), gaussian(rng, s, &[n_mem, k])?, true)),
            _ => None,
        };
        let mut make_slot = |params: &mut ParamStore, slot: &str| -> Result<Slot> {
            Ok(match spec.variant {
                Variant::Linear => Slot::Linear {
                    weight: params.add(format!("{name}/{slot}/weight"), gaussian(rng, s, &[k, k])?, true),
                    bias: params.add(format!("{name}/{slot}/bias"), Tensor::zeros(&[k]), true),
                },
                Variant::Attentive => Slot::Attentive {
                    weight: params.add(format!("{name}/{slot}/weight"), gaussian(rng, s, &[n_rel, k])?, true),
                },
                Variant::Memory => Slot::Memory {
                    values: params.add(format!("{name}/{slot}/values"), gaussian(rng, s, &[n_mem, k])?, true),
                },
            })
        };
        let head = if init.transformed_head {
            Some(make_slot(params, "head")?)
        } else {
            None
        };
        let body = (0..spec.template.body_len())
            .map(|i| make_slot(params, &format!("body{i}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Reformulator {
            kind: Kind::Learned { spec, keys, head, body },
        })
    }

    /// An installed symbolic rule, returned unchanged for every goal. Its
    /// predicates must be in the store and every head variable must occur
    /// in the body.
    pub fn fixed(rule: Rule, store: &EmbeddingStore) -> Result<Self> {
        if rule.body.is_empty() {
            return Err(Error::Config(format!("cannot install fact `{rule}` as a rule")));
        }
        for a in std::iter::once(&rule.head).chain(&rule.body) {
            store.index(Table::Predicates, &a.predicate)?;
            for t in &a.args {
                if let Term::Const(c) = t {
                    store.index(Table::Entities, c)?;
                }
            }
        }
        let body_vars: Vec<&str> = rule.body.iter().flat_map(|a| a.variables()).collect();
        if let Some(v) = rule.head.variables().find(|v| !body_vars.contains(v)) {
            return Err(Error::Config(format!("head variable {v} of `{rule}` does not occur in its body")));
        }
        Ok(Reformulator {
            kind: Kind::Fixed { rule },
        })
    }

    pub fn spec(&self) -> Option<ReformulatorSpec> {
        match &self.kind {
            Kind::Learned { spec, .. } => Some(*spec),
            Kind::Fixed { .. } => None,
        }
    }

    pub fn fixed_rule(&self) -> Option<&Rule> {
        match &self.kind {
            Kind::Fixed { rule } => Some(rule),
            Kind::Learned { .. } => None,
        }
    }

    /// Number of atoms in every generated body.
    pub fn body_len(&self) -> usize {
        match &self.kind {
            Kind::Learned { spec, .. } => spec.template.body_len(),
            Kind::Fixed { rule } => rule.body.len(),
        }
    }

    pub fn has_transformed_head(&self) -> bool {
        matches!(&self.kind, Kind::Learned { head: Some(_), .. })
    }

    /// Parameters owned by this reformulator, in registration order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut out = Vec::new();
        if let Kind::Learned { keys, head, body, .. } = &self.kind {
            out.extend(keys);
            for slot in head.iter().chain(body) {
                match slot {
                    Slot::Linear { weight, bias } => out.extend([*weight, *bias]),
                    Slot::Attentive { weight } => out.push(*weight),
                    Slot::Memory { values } => out.push(*values),
                }
            }
        }
        out
    }

    fn apply_slot(
        &self,
        slot: &Slot,
        g: &mut Graph,
        store: &EmbeddingStore,
        goal: NodeId,
        attention: &mut Option<NodeId>,
        cache: &mut SelectCache,
    ) -> Result<NodeId> {
        let params = store.params();
        match slot {
            Slot::Linear { weight, bias } => {
                let w = g.param(*weight, params);
                let b = g.param(*bias, params);
                let wx = g.matvec(w, goal)?;
                g.add(wx, b)
            }
            Slot::Attentive { weight } => {
                let w = g.param(*weight, params);
                let logits = g.matvec(w, goal)?;
                let alpha = g.softmax(logits)?;
                let e = cache.predicate_matrix(g, store)?;
                g.vecmat(alpha, e)
            }
            Slot::Memory { values } => {
                let alpha = match *attention {
                    Some(a) => a,
                    None => {
                        let Kind::Learned { keys: Some(keys), .. } = &self.kind else {
                            unreachable!("memory slots come with a key matrix")
                        };
                        let w = g.param(*keys, params);
                        let logits = g.matvec(w, goal)?;
                        let a = g.softmax(logits)?;
                        *attention = Some(a);
                        a
                    }
                };
                let m = g.param(*values, params);
                g.vecmat(alpha, m)
            }
        }
    }

    /// The rule generated for a goal whose predicate embedding is `goal`.
    /// Variables are named `X`, `Y` and `Z` for templates; installed rules
    /// keep their own names.
    pub fn select(&self, g: &mut Graph, store: &EmbeddingStore, goal: NodeId, cache: &mut SelectCache) -> Result<EmbeddedRule> {
        let dim = g.value(goal).shape().to_vec();
        if dim != [store.dim()] {
            return Err(Error::Shape(format!(
                "select: goal predicate of shape {dim:?}, store dimension {}",
                store.dim()
            )));
        }
        match &self.kind {
            Kind::Fixed { rule } => {
                let embed = |g: &mut Graph, a: &Atom| -> Result<RuleAtom> {
                    Ok(RuleAtom {
                        predicate: store.lookup(g, Table::Predicates, &a.predicate)?,
                        symbol: Some(a.predicate.clone()),
                        args: a.args.clone(),
                    })
                };
                let head = embed(g, &rule.head)?;
                let body = rule.body.iter().map(|a| embed(g, a)).collect::<Result<Vec<_>>>()?;
                Ok(EmbeddedRule { head, body })
            }
            Kind::Learned { spec, head, body, .. } => {
                let mut attention = None;
                let head_pred = match head {
                    Some(slot) => self.apply_slot(slot, g, store, goal, &mut attention, cache)?,
                    None => goal,
                };
                let var = |s: &str| Term::var(s);
                let mut atoms = Vec::with_capacity(body.len());
                for (slot, args) in body.iter().zip(spec.template.body_args()) {
                    let p = self.apply_slot(slot, g, store, goal, &mut attention, cache)?;
                    atoms.push(RuleAtom {
                        predicate: p,
                        symbol: None,
                        args: [var(args[0]), var(args[1])],
                    });
                }
                Ok(EmbeddedRule {
                    head: RuleAtom {
                        predicate: head_pred,
                        symbol: None,
                        args: [var("X"), var("Y")],
                    },
                    body: atoms,
                })
            }
        }
    }

    /// Runs `select` on the embedding of `goal_predicate` and maps each
    /// generated predicate to its nearest vocabulary predicate. Returns the
    /// decoded rule and one similarity per generated predicate (head first
    /// when it is transformed).
    pub fn decode_rule(&self, goal_predicate: &str, store: &EmbeddingStore) -> Result<(Rule, Vec<f64>)> {
        let mut g = Graph::new();
        let goal = store.lookup(&mut g, Table::Predicates, goal_predicate)?;
        let rule = self.select(&mut g, store, goal, &mut SelectCache::new())?;
        let mut sims = Vec::new();
        let mut decode = |a: &RuleAtom| -> Atom {
            let predicate = match &a.symbol {
                Some(s) => {
                    sims.push(1.0);
                    s.clone()
                }
                None if a.predicate == goal => goal_predicate.to_string(),
                None => {
                    let (s, k) = store.nearest_symbol(g.value(a.predicate).data(), Table::Predicates);
                    sims.push(k);
                    s
                }
            };
            Atom::new(predicate, a.args[0].clone(), a.args[1].clone())
        };
        let head = decode(&rule.head);
        let body: Vec<Atom> = rule.body.iter().map(&mut decode).collect();
        Ok((Rule::new(head, body)?, sims))
    }

    pub fn to_segment(&self, params: &ParamStore) -> ReformulatorSegment {
        match &self.kind {
            Kind::Fixed { rule } => ReformulatorSegment {
                variant: "fixed".into(),
                template: None,
                rule: Some(rule.to_string()),
                transformed_head: false,
                tensors: Vec::new(),
            },
            Kind::Learned { spec, head, .. } => ReformulatorSegment {
                variant: spec.variant.name().into(),
                template: Some(spec.template),
                rule: None,
                transformed_head: head.is_some(),
                tensors: self
                    .param_ids()
                    .into_iter()
                    .map(|id| {
                        let p = params.get(id);
                        (p.name.clone(), p.value.clone())
                    })
                    .collect(),
            },
        }
    }

    /// Rebuilds a reformulator and registers its tensors in `store`.
    pub fn from_segment(seg: &ReformulatorSegment, store: &mut EmbeddingStore) -> Result<Self> {
        if seg.variant == "fixed" {
            let text = seg
                .rule
                .as_deref()
                .ok_or_else(|| Error::Config("fixed reformulator without a rule".into()))?;
            let rule = crate::logic::parse_rule_line(text)?;
            return Reformulator::fixed(rule, store);
        }
        let variant: Variant = seg.variant.parse()?;
        let template = seg
            .template
            .ok_or_else(|| Error::Config("learned reformulator without a template".into()))?;
        let spec = ReformulatorSpec { variant, template };
        let mut tensors = seg.tensors.iter();
        let mut next = |store: &mut EmbeddingStore, expect: &[usize]| -> Result<ParamId> {
            let (name, t) = tensors
                .next()
                .ok_or_else(|| Error::Config(format!("reformulator {spec} is missing tensors")))?;
            if t.shape() != expect {
                return Err(Error::Shape(format!("{name}: expected {expect:?}, got {:?}", t.shape())));
            }
            if !t.is_finite() {
                return Err(Error::NonFinite(name.clone()));
            }
            Ok(store.params_mut().add(name.clone(), t.clone(), true))
        };
        let k = store.dim();
        let n_rel = store.vocab(Table::Predicates).len();
        let n_mem = match variant {
            Variant::Memory => seg.tensors.first().map(|(_, t)| t.shape()[0]).unwrap_or(0),
            _ => 0,
        };
        let keys = match variant {
            Variant::Memory => Some(next(store, &[n_mem, k])?),
            _ => None,
        };
        let mut slot = |store: &mut EmbeddingStore| -> Result<Slot> {
            Ok(match variant {
                Variant::Linear => Slot::Linear {
                    weight: next(store, &[k, k])?,
                    bias: next(store, &[k])?,
                },
                Variant::Attentive => Slot::Attentive {
                    weight: next(store, &[n_rel, k])?,
                },
                Variant::Memory => Slot::Memory {
                    values: next(store, &[n_mem, k])?,
                },
            })
        };
        let head = if seg.transformed_head { Some(slot(store)?) } else { None };
        let body = (0..template.body_len()).map(|_| slot(store)).collect::<Result<Vec<_>>>()?;
        if tensors.next().is_some() {
            return Err(Error::Config(format!("reformulator {spec} has extra tensors")));
        }
        Ok(Reformulator {
            kind: Kind::Learned { spec, keys, head, body },
        })
    }
}

/// Serialized reformulator: variant tag, template tag and named tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReformulatorSegment {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<Template>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(default)]
    pub transformed_head: bool,
    #[serde(default)]
    pub tensors: Vec<(String, Tensor)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::init_store;
    use crate::logic::{parse_kb, parse_rule_line, FactFormat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store(dim: usize) -> EmbeddingStore {
        let (mut kb, _) = parse_kb("child(a,b).\nchild(b,c).\n", FactFormat::Prolog).unwrap();
        kb.add_predicate("grand");
        kb.add_predicate("other");
        init_store(&kb, dim, 1, 1.0).unwrap()
    }

    fn spec(variant: Variant, template: Template) -> ReformulatorSpec {
        ReformulatorSpec { variant, template }
    }

    #[test]
    fn parse_spec_lists() {
        let specs = parse_specs("chain,attentive:inverse", Variant::Linear).unwrap();
        assert_eq!(specs[0], spec(Variant::Linear, Template::Chain));
        assert_eq!(specs[1], spec(Variant::Attentive, Template::Inverse));
        assert!(parse_specs("zigzag", Variant::Linear).is_err());
        assert_eq!(specs[1].to_string(), "attentive:inverse");
    }

    #[test]
    fn linear_identity_reproduces_goal() {
        let mut st = store(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = Reformulator::new(spec(Variant::Linear, Template::Direct), &mut st, &ReformulatorInit::default(), &mut rng, "r0")
            .unwrap();
        let ids = r.param_ids();
        *st.params_mut().value_mut(ids[0]) = Tensor::identity(4);
        let mut g = Graph::new();
        let goal = st.lookup(&mut g, Table::Predicates, "grand").unwrap();
        let rule = r.select(&mut g, &st, goal, &mut SelectCache::new()).unwrap();
        assert_eq!(rule.head.predicate, goal);
        assert_eq!(g.value(rule.body[0].predicate).data(), g.value(goal).data());
    }

    #[test]
    fn attentive_output_is_a_convex_combination() {
        let mut st = store(6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let init = ReformulatorInit {
            weight_scale: 3.0,
            ..Default::default()
        };
        let r = Reformulator::new(spec(Variant::Attentive, Template::Chain), &mut st, &init, &mut rng, "r0").unwrap();
        let mut g = Graph::new();
        let goal = st.lookup(&mut g, Table::Predicates, "grand").unwrap();
        let w = g.param(r.param_ids()[0], st.params());
        let logits = g.matvec(w, goal).unwrap();
        let alpha = g.softmax(logits).unwrap();
        let a = g.value(alpha).data().to_vec();
        assert!(a.iter().all(|&x| x >= 0.0));
        assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let rule = r.select(&mut g, &st, goal, &mut SelectCache::new()).unwrap();
        let out = g.value(rule.body[0].predicate).data().to_vec();
        for j in 0..6 {
            let mix: f64 = (0..3).map(|i| a[i] * st.row(Table::Predicates, i)[j]).sum();
            assert!((mix - out[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn attentive_dominant_weight_selects_a_row() {
        let mut st = store(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = Reformulator::new(spec(Variant::Attentive, Template::Direct), &mut st, &ReformulatorInit::default(), &mut rng, "r")
            .unwrap();
        // Logits 40 * <row, goal> on the child row only.
        let goal_vec = st.vector(Table::Predicates, "grand").unwrap().to_vec();
        let norm: f64 = goal_vec.iter().map(|v| v * v).sum();
        let mut w = Tensor::zeros(&[3, 5]);
        for j in 0..5 {
            w.data_mut()[j] = 40.0 * goal_vec[j] / norm;
        }
        *st.params_mut().value_mut(r.param_ids()[0]) = w;
        let (rule, sims) = r.decode_rule("grand", &st).unwrap();
        assert_eq!(rule.to_string(), "grand(X, Y) :- child(X, Y)");
        assert!(sims[0] > 0.99);
    }

    #[test]
    fn memory_with_one_row_ignores_the_goal() {
        let mut st = store(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let init = ReformulatorInit {
            memory_size: 1,
            ..Default::default()
        };
        let r = Reformulator::new(spec(Variant::Memory, Template::Chain), &mut st, &init, &mut rng, "m").unwrap();
        let ids = r.param_ids();
        let child = st.vector(Table::Predicates, "child").unwrap().to_vec();
        *st.params_mut().value_mut(ids[1]) = Tensor::matrix(1, 4, child.clone());
        *st.params_mut().value_mut(ids[2]) = Tensor::matrix(1, 4, child.clone());
        for goal in ["grand", "other", "child"] {
            let (rule, sims) = r.decode_rule(goal, &st).unwrap();
            assert_eq!(rule.body[0].predicate, "child");
            assert_eq!(rule.body[1].predicate, "child");
            assert_eq!(sims, vec![1.0, 1.0]);
        }
    }

    #[test]
    fn untrained_decoding_is_well_formed() {
        let mut st = store(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for v in [Variant::Linear, Variant::Attentive, Variant::Memory] {
            let r = Reformulator::new(spec(v, Template::Chain), &mut st, &ReformulatorInit::default(), &mut rng, "r").unwrap();
            let (rule, sims) = r.decode_rule("grand", &st).unwrap();
            assert_eq!(rule.body.len(), 2);
            assert!(sims.iter().all(|&s| s > 0.0 && s <= 1.0));
        }
    }

    #[test]
    fn fixed_rules_are_validated() {
        let st = store(4);
        assert!(Reformulator::fixed(parse_rule_line("grand(X,Y) :- child(X,Z), child(Z,Y).").unwrap(), &st).is_ok());
        assert!(Reformulator::fixed(parse_rule_line("grand(X,Y) :- child(X,Z).").unwrap(), &st).is_err());
        assert!(Reformulator::fixed(parse_rule_line("nope(X,Y) :- child(X,Y).").unwrap(), &st).is_err());
    }

    #[test]
    fn segments_round_trip() {
        let mut st = store(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let init = ReformulatorInit {
            transformed_head: true,
            memory_size: 3,
            ..Default::default()
        };
        for v in [Variant::Linear, Variant::Attentive, Variant::Memory] {
            let r = Reformulator::new(spec(v, Template::Chain), &mut st, &init, &mut rng, "r").unwrap();
            let seg = r.to_segment(st.params());
            let json = serde_json::to_string(&seg).unwrap();
            let mut st2 = st.clone();
            let back = Reformulator::from_segment(&serde_json::from_str(&json).unwrap(), &mut st2).unwrap();
            assert_eq!(back.to_segment(st2.params()), seg);
        }
    }
}
