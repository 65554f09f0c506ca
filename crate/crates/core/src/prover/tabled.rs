//! Memoised proof search.
//!
//! Sub-goals are keyed by predicate, bound arguments and remaining depth.
//! Each key maps to a table holding, for every grounding of the free
//! arguments, the best score together with the one kernel comparison that
//! bounds it. Partial proofs scoring below the current floor are pruned;
//! the floor is lowered until the goal has an answer.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::Deref;
use std::rc::Rc;

use super::trace::{ProofTrace, TraceNode};
use super::{CompiledKb, ProverConfig};
use crate::autodiff::{gaussian_kernel, Graph, NodeId};
use crate::embeddings::{EmbeddingStore, Table};
use crate::error::{Error, Result};
use crate::logic::{Atom, Term};
use crate::model::Model;
use crate::reformulate::SelectCache;

type PredId = u32;

const MAX_VARS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VecRef {
    Pred(PredId),
    Ent(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Factor {
    One,
    Kernel(VecRef, VecRef),
}

/// Score value and the comparison that attains it.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Score {
    value: f64,
    factor: Factor,
}

impl Score {
    const ONE: Score = Score {
        value: 1.0,
        factor: Factor::One,
    };

    fn kernel(value: f64, a: VecRef, b: VecRef) -> Score {
        Score {
            value,
            factor: Factor::Kernel(a, b),
        }
    }

    /// Keeps `self` on ties.
    fn min(self, other: Score) -> Score {
        if other.value < self.value {
            other
        } else {
            self
        }
    }
}

/// Pairwise entity kernels with cached neighbour lists.
#[derive(Debug)]
pub struct EntityKernels {
    rows: Vec<Vec<f64>>,
    bandwidth: f64,
    near: RefCell<HashMap<(u32, u64), Rc<[(u32, f64)]>>>,
}

impl EntityKernels {
    /// Snapshot of the entity table of `store`. Only valid while the
    /// embeddings stay unchanged.
    pub fn new(store: &EmbeddingStore) -> Self {
        let n = store.vocab(Table::Entities).len();
        let rows = (0..n).map(|i| store.row(Table::Entities, i).to_vec()).collect();
        EntityKernels {
            rows,
            bandwidth: store.bandwidth(),
            near: RefCell::new(HashMap::new()),
        }
    }

    fn from_graph(g: &mut Graph, store: &EmbeddingStore) -> Self {
        let n = store.vocab(Table::Entities).len();
        let rows = (0..n)
            .map(|i| {
                let node = store.row_node(g, Table::Entities, i);
                g.value(node).data().to_vec()
            })
            .collect();
        EntityKernels {
            rows,
            bandwidth: store.bandwidth(),
            near: RefCell::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Kernel between two entity rows; exactly 1 for a row and itself.
    pub fn kernel(&self, a: u32, b: u32) -> f64 {
        if a == b {
            1.0
        } else {
            gaussian_kernel(&self.rows[a as usize], &self.rows[b as usize], self.bandwidth)
        }
    }

    /// Rows whose kernel with `e` is at least `tau`, in row order.
    fn near(&self, e: u32, tau: f64) -> Rc<[(u32, f64)]> {
        let key = (e, tau.to_bits());
        if let Some(list) = self.near.borrow().get(&key) {
            return list.clone();
        }
        let list: Rc<[(u32, f64)]> = (0..self.rows.len() as u32)
            .filter_map(|o| {
                let k = self.kernel(o, e);
                (k >= tau).then_some((o, k))
            })
            .collect();
        self.near.borrow_mut().insert(key, list.clone());
        list
    }
}

enum Entities<'a> {
    Owned(EntityKernels),
    Borrowed(&'a EntityKernels),
}

impl Deref for Entities<'_> {
    type Target = EntityKernels;

    fn deref(&self) -> &EntityKernels {
        match self {
            Entities::Owned(e) => e,
            Entities::Borrowed(e) => e,
        }
    }
}

struct PredEntry {
    node: NodeId,
    row: Option<u32>,
    value: Vec<f64>,
    /// Kernel against every predicate row.
    row_kernels: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RArg {
    Var(u8),
    Const(u32),
}

struct RuleInst {
    /// `None` when the head predicate is the goal predicate itself.
    head_pred: Option<PredId>,
    head_args: [RArg; 2],
    body: Vec<(PredId, [RArg; 2])>,
    var_names: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Key {
    pred: PredId,
    args: [Option<u32>; 2],
    same: bool,
    depth: u16,
    level: u8,
    mask: Option<u32>,
}

#[derive(Clone, Debug)]
enum How {
    Fact(u32),
    Rule { reformulator: u16, children: Vec<(u32, u32)> },
}

#[derive(Clone, Debug)]
struct Answer {
    args: [u32; 2],
    score: Score,
    how: How,
}

#[derive(Default)]
struct AnswerSet {
    answers: Vec<Answer>,
    index: HashMap<[u32; 2], usize>,
}

impl AnswerSet {
    fn offer(&mut self, args: [u32; 2], score: Score, how: impl FnOnce() -> How) {
        match self.index.get(&args) {
            Some(&i) => {
                if score.value > self.answers[i].score.value {
                    self.answers[i].score = score;
                    self.answers[i].how = how();
                }
            }
            None => {
                self.index.insert(args, self.answers.len());
                self.answers.push(Answer { args, score, how: how() });
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Val {
    Unbound,
    Ent(u32),
    Goal(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Resolved {
    C(u32),
    Local(u8),
    Goal(u8),
}

#[derive(Clone, Copy)]
struct Env {
    local: [Val; MAX_VARS],
    goal: [Option<u32>; 2],
    /// Goal variable slot of each goal argument; `None` for constants.
    goal_slot: [Option<u8>; 2],
    goal_args: [Option<u32>; 2],
}

impl Env {
    fn new(key: &Key) -> Self {
        let goal_slot = [
            key.args[0].is_none().then_some(0),
            key.args[1].is_none().then_some(if key.same { 0 } else { 1 }),
        ];
        Env {
            local: [Val::Unbound; MAX_VARS],
            goal: [None; 2],
            goal_slot,
            goal_args: key.args,
        }
    }

    fn goal_var(&self, j: u8) -> Resolved {
        match self.goal[j as usize] {
            Some(e) => Resolved::C(e),
            None => Resolved::Goal(j),
        }
    }

    fn local_var(&self, v: u8) -> Resolved {
        match self.local[v as usize] {
            Val::Unbound => Resolved::Local(v),
            Val::Ent(e) => Resolved::C(e),
            Val::Goal(j) => self.goal_var(j),
        }
    }

    fn goal_term(&self, i: usize) -> Resolved {
        match (self.goal_args[i], self.goal_slot[i]) {
            (Some(e), _) => Resolved::C(e),
            (None, Some(j)) => self.goal_var(j),
            (None, None) => unreachable!("free goal arguments have a slot"),
        }
    }

    fn rarg(&self, a: RArg) -> Resolved {
        match a {
            RArg::Const(e) => Resolved::C(e),
            RArg::Var(v) => self.local_var(v),
        }
    }

    fn bind(&mut self, slot: Resolved, e: u32) {
        match slot {
            Resolved::Local(v) => self.local[v as usize] = Val::Ent(e),
            Resolved::Goal(j) => self.goal[j as usize] = Some(e),
            Resolved::C(_) => {}
        }
    }
}

/// Memoised prover over one graph.
pub struct Session<'a, 'g> {
    graph: &'g mut Graph,
    model: &'a Model,
    kb: &'a CompiledKb,
    config: &'a ProverConfig,
    entities: Entities<'a>,
    floors: Vec<f64>,
    mask: Option<u32>,
    cache: SelectCache,
    pred_rows: Vec<Vec<f64>>,
    preds: Vec<PredEntry>,
    pred_of_node: HashMap<NodeId, PredId>,
    rules: HashMap<(PredId, u16), Rc<RuleInst>>,
    tables: Vec<(Key, Rc<[Answer]>)>,
    memo: HashMap<Key, u32>,
}

impl<'a, 'g> Session<'a, 'g> {
    /// Entity kernels are taken from the graph leaves, so parameters bound
    /// with [`Graph::bind_param`] beforehand are honoured.
    pub fn new(graph: &'g mut Graph, model: &'a Model, kb: &'a CompiledKb, config: &'a ProverConfig) -> Result<Self> {
        let entities = Entities::Owned(EntityKernels::from_graph(graph, &model.store));
        Self::build(graph, model, kb, config, entities)
    }

    /// Reuses precomputed entity kernels, which must match the store.
    pub fn with_entities(
        graph: &'g mut Graph,
        model: &'a Model,
        kb: &'a CompiledKb,
        config: &'a ProverConfig,
        entities: &'a EntityKernels,
    ) -> Result<Self> {
        if entities.len() != model.store.vocab(Table::Entities).len() {
            return Err(Error::Invalid(format!(
                "entity kernels cover {} rows, store has {}",
                entities.len(),
                model.store.vocab(Table::Entities).len()
            )));
        }
        Self::build(graph, model, kb, config, Entities::Borrowed(entities))
    }

    fn build(
        graph: &'g mut Graph,
        model: &'a Model,
        kb: &'a CompiledKb,
        config: &'a ProverConfig,
        entities: Entities<'a>,
    ) -> Result<Self> {
        if config.depth > u16::MAX as usize {
            return Err(Error::Config(format!("depth {} is too large", config.depth)));
        }
        if config.min_score.is_nan() || config.min_score < 0.0 {
            return Err(Error::Config(format!("min_score must be non-negative, got {}", config.min_score)));
        }
        if model.reformulators.len() > u16::MAX as usize {
            return Err(Error::Config("too many reformulators".into()));
        }
        let n = model.store.vocab(Table::Predicates).len();
        let pred_rows = (0..n)
            .map(|i| {
                let node = model.store.row_node(graph, Table::Predicates, i);
                graph.value(node).data().to_vec()
            })
            .collect();
        let mut s = Session {
            graph,
            model,
            kb,
            config,
            entities,
            floors: config.floors(),
            mask: None,
            cache: SelectCache::new(),
            pred_rows,
            preds: Vec::new(),
            pred_of_node: HashMap::new(),
            rules: HashMap::new(),
            tables: Vec::new(),
            memo: HashMap::new(),
        };
        for i in 0..n {
            let node = model.store.row_node(s.graph, Table::Predicates, i);
            s.intern(node, Some(i as u32));
        }
        Ok(s)
    }

    pub fn graph(&mut self) -> &mut Graph {
        self.graph
    }

    /// Excludes one fact from subsequent proofs, e.g. the positive example
    /// being scored during training.
    pub fn set_mask(&mut self, fact: Option<u32>) {
        self.mask = fact;
    }

    /// Switches to another knowledge base over the same entity rows. Rule
    /// generations are kept; memoised answers and the mask are dropped.
    pub fn set_kb(&mut self, kb: &'a CompiledKb) {
        self.kb = kb;
        self.mask = None;
        self.memo.clear();
        self.tables.clear();
    }

    fn intern(&mut self, node: NodeId, row: Option<u32>) -> PredId {
        if let Some(&p) = self.pred_of_node.get(&node) {
            return p;
        }
        let value = self.graph.value(node).data().to_vec();
        let bw = self.model.store.bandwidth();
        let row_kernels = self
            .pred_rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if row == Some(i as u32) {
                    1.0
                } else {
                    gaussian_kernel(&value, r, bw)
                }
            })
            .collect();
        let id = self.preds.len() as PredId;
        self.preds.push(PredEntry {
            node,
            row,
            value,
            row_kernels,
        });
        self.pred_of_node.insert(node, id);
        id
    }

    fn pred_kernel(&self, head: PredId, goal: PredId) -> Score {
        if head == goal {
            return Score::ONE;
        }
        let (h, g) = (&self.preds[head as usize], &self.preds[goal as usize]);
        let value = match h.row {
            Some(r) => g.row_kernels[r as usize],
            None => match g.row {
                Some(r) => h.row_kernels[r as usize],
                None => gaussian_kernel(&h.value, &g.value, self.model.store.bandwidth()),
            },
        };
        Score::kernel(value, VecRef::Pred(head), VecRef::Pred(goal))
    }

    fn ent_score(&self, head: u32, goal: u32, k: f64) -> Score {
        if head == goal {
            Score::ONE
        } else {
            Score::kernel(k, VecRef::Ent(head), VecRef::Ent(goal))
        }
    }

    fn rule_inst(&mut self, goal: PredId, r: u16) -> Result<Rc<RuleInst>> {
        if let Some(inst) = self.rules.get(&(goal, r)) {
            return Ok(inst.clone());
        }
        let model = self.model;
        let goal_node = self.preds[goal as usize].node;
        let rule = model.reformulators[r as usize].select(self.graph, &model.store, goal_node, &mut self.cache)?;
        let mut var_names: Vec<String> = Vec::new();
        let store = &model.store;
        let mut arg = |t: &Term| -> Result<RArg> {
            Ok(match t {
                Term::Const(c) => RArg::Const(store.index(Table::Entities, c)? as u32),
                Term::Var(v) => {
                    let i = match var_names.iter().position(|n| n == v) {
                        Some(i) => i,
                        None => {
                            var_names.push(v.clone());
                            var_names.len() - 1
                        }
                    };
                    if i >= MAX_VARS {
                        return Err(Error::Invalid(format!("rules may use at most {MAX_VARS} variables")));
                    }
                    RArg::Var(i as u8)
                }
            })
        };
        let head_args = [arg(&rule.head.args[0])?, arg(&rule.head.args[1])?];
        let mut body_atoms = Vec::with_capacity(rule.body.len());
        for a in &rule.body {
            body_atoms.push((a.predicate, [arg(&a.args[0])?, arg(&a.args[1])?]));
        }
        let head_pred = if rule.head.predicate == goal_node {
            None
        } else {
            Some(self.intern_node(rule.head.predicate))
        };
        let body = body_atoms.into_iter().map(|(p, args)| (self.intern_node(p), args)).collect();
        let inst = Rc::new(RuleInst {
            head_pred,
            head_args,
            body,
            var_names,
        });
        self.rules.insert((goal, r), inst.clone());
        Ok(inst)
    }

    fn intern_node(&mut self, node: NodeId) -> PredId {
        self.intern(node, None)
    }

    fn solve(&mut self, key: Key) -> Result<u32> {
        if let Some(&t) = self.memo.get(&key) {
            return Ok(t);
        }
        let tau = self.floors[key.level as usize];
        let mut set = AnswerSet::default();
        if self.config.unify_facts {
            self.fact_answers(&key, tau, &mut set);
        }
        if key.depth > 0 {
            for r in 0..self.model.reformulators.len() as u16 {
                self.rule_answers(&key, r, tau, &mut set)?;
            }
        }
        let id = self.tables.len() as u32;
        self.tables.push((key, set.answers.into()));
        self.memo.insert(key, id);
        Ok(id)
    }

    fn fact_answers(&self, key: &Key, tau: f64, out: &mut AnswerSet) {
        let kb = self.kb;
        let goal = &self.preds[key.pred as usize];
        for p in 0..self.pred_rows.len() as u32 {
            let kp = goal.row_kernels[p as usize];
            if kp < tau {
                continue;
            }
            let sp = self.pred_kernel(p, key.pred);
            match key.args {
                [Some(a), b] => {
                    for &(e, ka) in self.entities.near(a, tau).iter() {
                        let s1 = sp.min(self.ent_score(e, a, ka));
                        if s1.value < tau {
                            continue;
                        }
                        for &fid in kb.with_subject(p, e) {
                            if key.mask == Some(fid) {
                                continue;
                            }
                            let o = kb.fact(fid)[2];
                            let (s2, obj) = match b {
                                Some(b) => (s1.min(self.ent_score(o, b, self.entities.kernel(o, b))), b),
                                None => (s1, o),
                            };
                            if s2.value >= tau {
                                out.offer([a, obj], s2, || How::Fact(fid));
                            }
                        }
                    }
                }
                [None, Some(b)] => {
                    for &(e, kb_) in self.entities.near(b, tau).iter() {
                        let s2 = sp.min(self.ent_score(e, b, kb_));
                        if s2.value < tau {
                            continue;
                        }
                        for &fid in kb.with_object(p, e) {
                            if key.mask == Some(fid) {
                                continue;
                            }
                            let s = kb.fact(fid)[1];
                            out.offer([s, b], s2, || How::Fact(fid));
                        }
                    }
                }
                [None, None] => {
                    for &fid in kb.with_pred(p) {
                        if key.mask == Some(fid) {
                            continue;
                        }
                        let f = kb.fact(fid);
                        if key.same && f[1] != f[2] {
                            continue;
                        }
                        out.offer([f[1], f[2]], sp, || How::Fact(fid));
                    }
                }
            }
        }
    }

    fn rule_answers(&mut self, key: &Key, r: u16, tau: f64, out: &mut AnswerSet) -> Result<()> {
        let inst = self.rule_inst(key.pred, r)?;
        let mut score = match inst.head_pred {
            None => Score::ONE,
            Some(h) => self.pred_kernel(h, key.pred),
        };
        if score.value < tau {
            return Ok(());
        }
        let mut env = Env::new(key);
        for i in 0..2 {
            let h_orig = inst.head_args[i];
            let h = env.rarg(h_orig);
            let g = env.goal_term(i);
            match (h, g) {
                (Resolved::Local(v), g) => {
                    env.local[v as usize] = match g {
                        Resolved::C(e) => Val::Ent(e),
                        Resolved::Goal(j) => Val::Goal(j),
                        Resolved::Local(_) => unreachable!("goal terms are never rule variables"),
                    };
                }
                (Resolved::Goal(j), Resolved::Goal(k)) => {
                    if j != k {
                        return Err(Error::Invalid(
                            "rule head would alias two distinct goal variables; use the literal prover".into(),
                        ));
                    }
                }
                (Resolved::Goal(j), Resolved::C(e)) | (Resolved::C(e), Resolved::Goal(j)) => {
                    env.goal[j as usize] = Some(e);
                }
                (Resolved::C(hc), Resolved::C(gc)) => {
                    let any_var = matches!(h_orig, RArg::Var(_)) || key.args[i].is_none();
                    if hc != gc {
                        if any_var {
                            return Ok(());
                        }
                        score = score.min(self.ent_score(hc, gc, self.entities.kernel(hc, gc)));
                        if score.value < tau {
                            return Ok(());
                        }
                    }
                }
                (_, Resolved::Local(_)) => unreachable!("goal terms are never rule variables"),
            }
        }
        let mut children = Vec::with_capacity(inst.body.len());
        self.body_step(key, r, &inst, 0, env, score, tau, &mut children, out)
    }

    #[allow(clippy::too_many_arguments)]
    fn body_step(
        &mut self,
        key: &Key,
        r: u16,
        inst: &RuleInst,
        i: usize,
        env: Env,
        score: Score,
        tau: f64,
        children: &mut Vec<(u32, u32)>,
        out: &mut AnswerSet,
    ) -> Result<()> {
        let Some(&(pred, args)) = inst.body.get(i) else {
            let (Resolved::C(s), Resolved::C(o)) = (env.goal_term(0), env.goal_term(1)) else {
                return Err(Error::Invalid("rule leaves a goal argument unbound".into()));
            };
            out.offer([s, o], score, || How::Rule {
                reformulator: r,
                children: children.clone(),
            });
            return Ok(());
        };
        let a = [env.rarg(args[0]), env.rarg(args[1])];
        let bound = |x: Resolved| match x {
            Resolved::C(e) => Some(e),
            _ => None,
        };
        let sub = Key {
            pred,
            args: [bound(a[0]), bound(a[1])],
            same: bound(a[0]).is_none() && a[0] == a[1],
            depth: key.depth - 1,
            level: key.level,
            mask: key.mask,
        };
        let t = self.solve(sub)?;
        let table = self.tables[t as usize].1.clone();
        for (idx, ans) in table.iter().enumerate() {
            let s = score.min(ans.score);
            if s.value < tau {
                continue;
            }
            let mut next = env;
            next.bind(a[0], ans.args[0]);
            next.bind(a[1], ans.args[1]);
            children.push((t, idx as u32));
            self.body_step(key, r, inst, i + 1, next, s, tau, children, out)?;
            children.pop();
        }
        Ok(())
    }

    fn goal_rows(&self, goal: &Atom) -> Result<[u32; 3]> {
        if !goal.is_ground() {
            return Err(Error::Invalid(format!("goal {goal} is not ground")));
        }
        let store = &self.model.store;
        Ok([
            store.index(Table::Predicates, &goal.predicate)? as u32,
            store.index(Table::Entities, goal.args[0].name())? as u32,
            store.index(Table::Entities, goal.args[1].name())? as u32,
        ])
    }

    fn best(&mut self, p: u32, s: u32, o: u32) -> Result<Option<(u32, u32)>> {
        let n_ent = self.entities.len() as u32;
        if p as usize >= self.pred_rows.len() || s >= n_ent || o >= n_ent {
            return Err(Error::Invalid(format!("goal rows ({p}, {s}, {o}) out of range")));
        }
        for level in 0..self.floors.len() {
            let t = self.solve(Key {
                pred: p,
                args: [Some(s), Some(o)],
                same: false,
                depth: self.config.depth as u16,
                level: level as u8,
                mask: self.mask,
            })?;
            if !self.tables[t as usize].1.is_empty() {
                return Ok(Some((t, 0)));
            }
        }
        Ok(None)
    }

    fn materialize(&mut self, score: Score) -> Result<NodeId> {
        match score.factor {
            Factor::One => Ok(self.graph.constant(1.0)),
            Factor::Kernel(a, b) => {
                let na = self.vec_node(a);
                let nb = self.vec_node(b);
                let k = self.graph.kernel(na, nb, self.model.store.bandwidth())?;
                debug_assert_eq!(self.graph.scalar(k), score.value);
                Ok(k)
            }
        }
    }

    fn vec_node(&mut self, v: VecRef) -> NodeId {
        match v {
            VecRef::Pred(p) => self.preds[p as usize].node,
            VecRef::Ent(e) => self.model.store.row_node(self.graph, Table::Entities, e as usize),
        }
    }

    /// Score of the ground goal given as (predicate row, subject row,
    /// object row), as a graph node; the constant 0 when unprovable.
    pub fn prove_rows(&mut self, p: u32, s: u32, o: u32) -> Result<NodeId> {
        match self.best(p, s, o)? {
            Some((t, i)) => {
                let score = self.tables[t as usize].1[i as usize].score;
                self.materialize(score)
            }
            None => Ok(self.graph.constant(0.0)),
        }
    }

    /// Score value only; adds nothing to the graph.
    pub fn score_rows(&mut self, p: u32, s: u32, o: u32) -> Result<f64> {
        Ok(match self.best(p, s, o)? {
            Some((t, i)) => self.tables[t as usize].1[i as usize].score.value,
            None => 0.0,
        })
    }

    pub fn prove(&mut self, goal: &Atom) -> Result<NodeId> {
        let [p, s, o] = self.goal_rows(goal)?;
        self.prove_rows(p, s, o)
    }

    pub fn score(&mut self, goal: &Atom) -> Result<f64> {
        let [p, s, o] = self.goal_rows(goal)?;
        self.score_rows(p, s, o)
    }

    /// The best proof of `goal` as a tree.
    pub fn trace(&mut self, goal: &Atom) -> Result<ProofTrace> {
        let [p, s, o] = self.goal_rows(goal)?;
        let best = self.best(p, s, o)?;
        Ok(match best {
            Some((t, i)) => {
                let node = self.trace_node(t, i);
                ProofTrace {
                    goal: goal.to_string(),
                    score: node.score,
                    proof: Some(node),
                }
            }
            None => ProofTrace {
                goal: goal.to_string(),
                score: 0.0,
                proof: None,
            },
        })
    }

    fn entity_name(&self, e: u32) -> String {
        self.model.store.vocab(Table::Entities).symbol(e as usize).to_string()
    }

    fn pred_name(&self, p: PredId) -> String {
        let entry = &self.preds[p as usize];
        match entry.row {
            Some(r) => self.model.store.vocab(Table::Predicates).symbol(r as usize).to_string(),
            None => {
                let (sym, k) = self.model.store.nearest_symbol(&entry.value, Table::Predicates);
                format!("{sym}~{k:.3}")
            }
        }
    }

    fn trace_node(&self, t: u32, i: u32) -> TraceNode {
        let (key, table) = &self.tables[t as usize];
        let ans = &table[i as usize];
        let goal = format!(
            "{}({}, {})",
            self.pred_name(key.pred),
            self.entity_name(ans.args[0]),
            self.entity_name(ans.args[1])
        );
        match &ans.how {
            How::Fact(fid) => {
                let f = self.kb.fact(*fid);
                let mut kernels = vec![self.preds[key.pred as usize].row_kernels[f[0] as usize]];
                for pos in 0..2 {
                    kernels.push(match key.args[pos] {
                        Some(e) => self.entities.kernel(f[pos + 1], e),
                        None => 1.0,
                    });
                }
                TraceNode {
                    goal,
                    score: ans.score.value,
                    fact: Some(format!(
                        "{}({}, {})",
                        self.pred_name(f[0]),
                        self.entity_name(f[1]),
                        self.entity_name(f[2])
                    )),
                    reformulator: None,
                    rule: None,
                    kernels,
                    children: Vec::new(),
                }
            }
            How::Rule { reformulator, children } => {
                let inst = &self.rules[&(key.pred, *reformulator)];
                let kernels = vec![match inst.head_pred {
                    None => 1.0,
                    Some(h) => self.pred_kernel(h, key.pred).value,
                }];
                TraceNode {
                    goal,
                    score: ans.score.value,
                    fact: None,
                    reformulator: Some(*reformulator as usize),
                    rule: Some(self.rule_text(key.pred, inst)),
                    kernels,
                    children: children.iter().map(|&(ct, ci)| self.trace_node(ct, ci)).collect(),
                }
            }
        }
    }

    fn rule_text(&self, goal: PredId, inst: &RuleInst) -> String {
        let arg = |a: RArg| match a {
            RArg::Var(v) => inst.var_names[v as usize].clone(),
            RArg::Const(e) => self.entity_name(e),
        };
        let atom = |p: PredId, args: [RArg; 2]| format!("{}({}, {})", self.pred_name(p), arg(args[0]), arg(args[1]));
        let body: Vec<String> = inst.body.iter().map(|&(p, a)| atom(p, a)).collect();
        format!("{} :- {}", atom(inst.head_pred.unwrap_or(goal), inst.head_args), body.join(", "))
    }
}
