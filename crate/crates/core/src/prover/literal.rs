//! Proof search that materialises every proof path in the graph.
//!
//! States are enumerated depth-first in the order facts, then reformulators
//! in declared order, and every unification score becomes a graph node.
//! The cost grows with the number of proof paths, so this prover is meant
//! for small knowledge bases and as a reference for [`super::Session`].

use serde::Serialize;

use super::ProverConfig;
use crate::autodiff::{Graph, NodeId};
use crate::embeddings::Table;
use crate::error::{Error, Result};
use crate::logic::{Atom, KnowledgeBase, Substitution, Term};
use crate::model::Model;
use crate::reformulate::{RuleAtom, SelectCache};

/// A constant with its embedding, or a variable.
#[derive(Clone, Debug, PartialEq)]
pub enum EmbeddedTerm {
    Const { symbol: String, node: NodeId },
    Var(String),
}

impl EmbeddedTerm {
    fn term(&self) -> Term {
        match self {
            EmbeddedTerm::Const { symbol, .. } => Term::Const(symbol.clone()),
            EmbeddedTerm::Var(v) => Term::Var(v.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedAtom {
    pub predicate: NodeId,
    pub args: [EmbeddedTerm; 2],
}

/// Bindings and success score of one partial proof.
#[derive(Clone, Debug, PartialEq)]
pub struct ProofState {
    pub subst: Substitution,
    pub success: NodeId,
}

/// Score and bindings of one complete proof path, for inspection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathScore {
    pub score: f64,
    pub bindings: Vec<(String, String)>,
}

pub struct LiteralProver<'a, 'g> {
    graph: &'g mut Graph,
    model: &'a Model,
    kb: &'a KnowledgeBase,
    config: &'a ProverConfig,
    counter: u64,
    cache: SelectCache,
}

fn walk(term: &Term, subst: &Substitution) -> Term {
    let mut cur = term.clone();
    let mut steps = 0;
    while let Term::Var(v) = &cur {
        match subst.get(v) {
            Some(next) if steps <= subst.len() => {
                cur = next.clone();
                steps += 1;
            }
            _ => break,
        }
    }
    cur
}

impl<'a, 'g> LiteralProver<'a, 'g> {
    pub fn new(graph: &'g mut Graph, model: &'a Model, kb: &'a KnowledgeBase, config: &'a ProverConfig) -> Self {
        LiteralProver {
            graph,
            model,
            kb,
            config,
            counter: 0,
            cache: SelectCache::new(),
        }
    }

    pub fn graph(&mut self) -> &mut Graph {
        self.graph
    }

    /// State with no bindings and success 1.
    pub fn initial_state(&mut self) -> ProofState {
        ProofState {
            subst: Substitution::new(),
            success: self.graph.constant(1.0),
        }
    }

    fn embed_term(&mut self, term: &Term, subst: &Substitution) -> Result<EmbeddedTerm> {
        Ok(match walk(term, subst) {
            Term::Const(c) => EmbeddedTerm::Const {
                node: self.model.store.lookup(self.graph, Table::Entities, &c)?,
                symbol: c,
            },
            Term::Var(v) => EmbeddedTerm::Var(v),
        })
    }

    /// Embeds a symbolic atom after resolving its variables through `subst`.
    pub fn embed_atom(&mut self, atom: &Atom, subst: &Substitution) -> Result<EmbeddedAtom> {
        let predicate = self.model.store.lookup(self.graph, Table::Predicates, &atom.predicate)?;
        Ok(EmbeddedAtom {
            predicate,
            args: [self.embed_term(&atom.args[0], subst)?, self.embed_term(&atom.args[1], subst)?],
        })
    }

    fn embed_rule_atom(&mut self, atom: &RuleAtom, subst: &Substitution) -> Result<EmbeddedAtom> {
        Ok(EmbeddedAtom {
            predicate: atom.predicate,
            args: [self.embed_term(&atom.args[0], subst)?, self.embed_term(&atom.args[1], subst)?],
        })
    }

    /// Unifies a clause head with a goal. Returns `None` when a variable
    /// would be bound to two different constants.
    pub fn unify(&mut self, head: &EmbeddedAtom, goal: &EmbeddedAtom, state: &ProofState) -> Result<Option<ProofState>> {
        let bw = self.model.store.bandwidth();
        let mut subst = state.subst.clone();
        let mut factors = vec![state.success];
        if head.predicate != goal.predicate {
            factors.push(self.graph.kernel(head.predicate, goal.predicate, bw)?);
        }
        for i in 0..2 {
            let h_orig = head.args[i].term();
            let g_orig = goal.args[i].term();
            let h = walk(&h_orig, &subst);
            let g = walk(&g_orig, &subst);
            match (&h, &g) {
                (Term::Var(hv), _) => {
                    if h != g {
                        subst.insert(hv.clone(), g.clone());
                    }
                }
                (_, Term::Var(gv)) => {
                    subst.insert(gv.clone(), h.clone());
                }
                (Term::Const(hc), Term::Const(gc)) => {
                    if h_orig.is_var() || g_orig.is_var() {
                        if hc != gc {
                            return Ok(None);
                        }
                    } else if hc != gc {
                        let (EmbeddedTerm::Const { node: hn, .. }, EmbeddedTerm::Const { node: gn, .. }) =
                            (&head.args[i], &goal.args[i])
                        else {
                            unreachable!("constant terms carry embeddings")
                        };
                        factors.push(self.graph.kernel(*hn, *gn, bw)?);
                    }
                }
            }
        }
        let success = if factors.len() == 1 {
            state.success
        } else {
            self.graph.reduce_min(&factors)?
        };
        Ok(Some(ProofState { subst, success }))
    }

    fn rename(&mut self, atoms: &mut [&mut RuleAtom]) {
        let mut map: Vec<(String, String)> = Vec::new();
        for a in atoms.iter_mut() {
            for t in a.args.iter_mut() {
                if let Term::Var(v) = t {
                    let fresh = match map.iter().find(|(old, _)| old == v) {
                        Some((_, new)) => new.clone(),
                        None => {
                            let new = format!("_V{}", self.counter);
                            self.counter += 1;
                            map.push((v.clone(), new.clone()));
                            new
                        }
                    };
                    *t = Term::Var(fresh);
                }
            }
        }
    }

    /// All states proving `goal`: facts first, then the rule of each
    /// reformulator in order when `depth > 0`.
    pub fn or_step(&mut self, goal: &EmbeddedAtom, depth: usize, state: &ProofState) -> Result<Vec<ProofState>> {
        let mut out = Vec::new();
        if self.config.unify_facts {
            let kb = self.kb;
            for fact in kb.facts() {
                let head = self.embed_atom(fact, &Substitution::new())?;
                if let Some(s) = self.unify(&head, goal, state)? {
                    out.push(s);
                }
            }
        }
        if depth > 0 {
            let model = self.model;
            for r in &model.reformulators {
                let mut rule = r.select(self.graph, &model.store, goal.predicate, &mut self.cache)?;
                {
                    let mut atoms: Vec<&mut RuleAtom> = std::iter::once(&mut rule.head).chain(rule.body.iter_mut()).collect();
                    self.rename(&mut atoms);
                }
                let head = self.embed_rule_atom(&rule.head, &Substitution::new())?;
                if let Some(s) = self.unify(&head, goal, state)? {
                    out.extend(self.and_step(&rule.body, depth, &s)?);
                }
            }
        }
        Ok(out)
    }

    /// Proves the body atoms left to right, each with one less unit of depth.
    pub fn and_step(&mut self, body: &[RuleAtom], depth: usize, state: &ProofState) -> Result<Vec<ProofState>> {
        let Some((first, rest)) = body.split_first() else {
            return Ok(vec![state.clone()]);
        };
        if depth == 0 {
            return Ok(Vec::new());
        }
        let goal = self.embed_rule_atom(first, &state.subst)?;
        let mut out = Vec::new();
        for s in self.or_step(&goal, depth - 1, state)? {
            out.extend(self.and_step(rest, depth, &s)?);
        }
        Ok(out)
    }

    /// Every complete proof state of a ground goal.
    pub fn proof_states(&mut self, goal: &Atom) -> Result<Vec<ProofState>> {
        if !goal.is_ground() {
            return Err(Error::Invalid(format!("goal {goal} is not ground")));
        }
        let g = self.embed_atom(goal, &Substitution::new())?;
        let init = self.initial_state();
        self.or_step(&g, self.config.depth, &init)
    }

    /// Maximum success over all proof states, or the constant 0 when there
    /// are none.
    pub fn prove(&mut self, goal: &Atom) -> Result<NodeId> {
        let states = self.proof_states(goal)?;
        if states.is_empty() {
            return Ok(self.graph.constant(0.0));
        }
        let scores: Vec<NodeId> = states.iter().map(|s| s.success).collect();
        self.graph.reduce_max(&scores)
    }

    /// Scores of all proof paths without aggregation.
    pub fn path_scores(&mut self, goal: &Atom) -> Result<Vec<PathScore>> {
        let states = self.proof_states(goal)?;
        Ok(states
            .iter()
            .map(|s| PathScore {
                score: self.graph.scalar(s.success),
                bindings: s.subst.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            })
            .collect())
    }
}
