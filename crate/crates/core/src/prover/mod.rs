//! Differentiable backward chaining.
//!
//! A goal is proven by unifying it with every fact and, while depth
//! remains, with the rule each reformulator generates for it; rule bodies
//! are proven recursively. Unification compares symbols through the
//! Gaussian kernel of their embeddings, a path scores the minimum of its
//! comparisons and a goal scores the maximum over its paths.
//!
//! [`LiteralProver`] enumerates every path as graph nodes. [`Session`]
//! computes the same maximum by memoising sub-goal answers and only adds
//! the single kernel that decides the score to the graph, which yields the
//! same value and the same gradient.

mod compiled;
mod literal;
mod tabled;
mod trace;

use serde::{Deserialize, Serialize};

use crate::autodiff::{grad_check, ParamId, Tensor};
use crate::error::Result;
use crate::logic::{Atom, KnowledgeBase};
use crate::model::Model;

pub use compiled::CompiledKb;
pub use literal::{EmbeddedAtom, EmbeddedTerm, LiteralProver, PathScore, ProofState};
pub use tabled::{EntityKernels, Session};
pub use trace::ProofTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProverConfig {
    /// Maximum number of nested rule applications.
    pub depth: usize,
    /// Unify goals with the facts of the knowledge base.
    pub unify_facts: bool,
    /// Paths scoring below this value are discarded; a goal without any
    /// other path scores 0. Zero keeps every path.
    pub min_score: f64,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            depth: 2,
            unify_facts: true,
            min_score: 1e-8,
        }
    }
}

impl ProverConfig {
    pub fn with_depth(depth: usize) -> Self {
        ProverConfig {
            depth,
            ..Default::default()
        }
    }

    /// Score floors tried in turn; a result at or above the current floor
    /// is exact.
    pub(crate) fn floors(&self) -> Vec<f64> {
        let mut out: Vec<f64> = [0.1, 1e-3, 1e-5].into_iter().filter(|f| *f > self.min_score).collect();
        out.push(self.min_score.max(0.0));
        out
    }
}

/// Largest relative error between the analytic gradient of the summed
/// scores of `goals` and central finite differences, over every trainable
/// parameter of `model`.
pub fn prove_grad_check(
    model: &Model,
    kb: &KnowledgeBase,
    goals: &[Atom],
    config: &ProverConfig,
    epsilon: f64,
) -> Result<f64> {
    let compiled = CompiledKb::new(kb, &model.store)?;
    let ids: Vec<ParamId> = model.params().iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    let values: Vec<Tensor> = ids.iter().map(|&id| model.params().value(id).clone()).collect();
    grad_check(
        |g, leaves| {
            for (&id, &leaf) in ids.iter().zip(leaves) {
                g.bind_param(id, leaf);
            }
            let mut s = Session::new(g, model, &compiled, config)?;
            let mut total = s.graph().constant(0.0);
            for goal in goals {
                let n = s.prove(goal)?;
                total = s.graph().add(total, n)?;
            }
            Ok(total)
        },
        &values,
        epsilon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Graph, Tensor};
    use crate::embeddings::Table;
    use crate::logic::{parse_kb, parse_rule_line, Atom, FactFormat, KnowledgeBase, Vocab};
    use crate::model::{Model, ModelConfig};
    use crate::reformulate::{ReformulatorSpec, Template, Variant};

    fn vocab(items: &[&str]) -> Vocab {
        Vocab::from(items.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    fn one_hot_model(preds: &[&str], ents: &[&str], rules: &[&str]) -> Model {
        let dim = preds.len().max(ents.len());
        let cfg = ModelConfig {
            dim,
            reformulators: Vec::new(),
            ..Default::default()
        };
        let mut m = Model::new(&vocab(preds), &vocab(ents), &cfg, 0).unwrap();
        for (table, syms) in [(Table::Predicates, preds), (Table::Entities, ents)] {
            for (i, s) in syms.iter().enumerate() {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                m.store.set_vector(table, s, &v).unwrap();
            }
        }
        for r in rules {
            m.install_rule(parse_rule_line(r).unwrap()).unwrap();
        }
        m
    }

    fn example_kb() -> KnowledgeBase {
        parse_kb("p(rick,beth).\np(beth,morty).\n", FactFormat::Prolog).unwrap().0
    }

    fn both(model: &Model, kb: &KnowledgeBase, config: &ProverConfig, goal: &Atom) -> (f64, f64) {
        let mut g = Graph::new();
        let lit = {
            let mut p = LiteralProver::new(&mut g, model, kb, config);
            let n = p.prove(goal).unwrap();
            g.scalar(n)
        };
        let compiled = CompiledKb::new(kb, &model.store).unwrap();
        let mut g = Graph::new();
        let mut s = Session::new(&mut g, model, &compiled, config).unwrap();
        let n = s.prove(goal).unwrap();
        (lit, g.scalar(n))
    }

    #[test]
    fn grandparent_goal_scores_one() {
        let m = one_hot_model(&["p", "g"], &["rick", "beth", "morty"], &["g(X,Y) :- p(X,Z), p(Z,Y)."]);
        let cfg = ProverConfig::with_depth(1);
        let (a, b) = both(&m, &example_kb(), &cfg, &Atom::ground("g", "rick", "morty"));
        assert_eq!(a, 1.0);
        assert_eq!(b, 1.0);
    }

    #[test]
    fn distinct_goal_predicate_scores_its_kernel() {
        let m = one_hot_model(
            &["p", "g", "grandPa"],
            &["rick", "beth", "morty"],
            &["g(X,Y) :- p(X,Z), p(Z,Y)."],
        );
        let cfg = ProverConfig::with_depth(1);
        let (a, b) = both(&m, &example_kb(), &cfg, &Atom::ground("grandPa", "rick", "morty"));
        let expected = (-2.0f64).exp();
        assert!((a - expected).abs() < 1e-15);
        assert_eq!(a, b);
    }

    #[test]
    fn soft_match_on_one_hot_embeddings_is_e_minus_two() {
        let m = one_hot_model(&["p"], &["a", "b", "c"], &[]);
        let kb = parse_kb("p(a,b).", FactFormat::Prolog).unwrap().0;
        let cfg = ProverConfig::with_depth(0);
        let (a, b) = both(&m, &kb, &cfg, &Atom::ground("p", "a", "c"));
        assert!((a - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(a, b);
    }

    #[test]
    fn unify_binds_head_variables() {
        let m = one_hot_model(&["p", "g"], &["rick", "morty"], &[]);
        let kb = KnowledgeBase::default();
        let cfg = ProverConfig::default();
        let mut g = Graph::new();
        let mut p = LiteralProver::new(&mut g, &m, &kb, &cfg);
        let init = p.initial_state();
        let head = p.embed_atom(&Atom::parse_args("g", "X", "Y").unwrap(), &Default::default()).unwrap();
        let goal = p.embed_atom(&Atom::ground("g", "rick", "morty"), &Default::default()).unwrap();
        let s = p.unify(&head, &goal, &init).unwrap().unwrap();
        assert_eq!(s.subst["X"].name(), "rick");
        assert_eq!(s.subst["Y"].name(), "morty");
        assert_eq!(p.graph().scalar(s.success), 1.0);
    }

    #[test]
    fn and_step_finds_the_middle_entity() {
        let m = one_hot_model(&["p"], &["rick", "beth", "morty"], &[]);
        let kb = example_kb();
        let cfg = ProverConfig::default();
        let mut g = Graph::new();
        let mut p = LiteralProver::new(&mut g, &m, &kb, &cfg);
        let mut state = p.initial_state();
        state.subst.insert("X".into(), crate::logic::Term::constant("rick"));
        state.subst.insert("Y".into(), crate::logic::Term::constant("morty"));
        let pred = m.store.lookup(p.graph(), Table::Predicates, "p").unwrap();
        let atom = |a: &str, b: &str| crate::reformulate::RuleAtom {
            predicate: pred,
            symbol: None,
            args: [crate::logic::Term::var(a), crate::logic::Term::var(b)],
        };
        let body = [atom("X", "Z"), atom("Z", "Y")];
        let states = p.and_step(&body, 1, &state).unwrap();
        let best = states
            .iter()
            .find(|s| p.graph().scalar(s.success) == 1.0)
            .expect("exact proof");
        assert_eq!(best.subst["Z"].name(), "beth");
        assert!(p.and_step(&body, 0, &state).unwrap().is_empty());
        assert_eq!(p.and_step(&[], 0, &state).unwrap(), vec![state.clone()]);
    }

    #[test]
    fn empty_stream_scores_zero() {
        let m = one_hot_model(&["p"], &["a", "b"], &[]);
        let kb = parse_kb("p(a,b).", FactFormat::Prolog).unwrap().0;
        let cfg = ProverConfig {
            depth: 0,
            unify_facts: false,
            min_score: 0.0,
        };
        let (a, b) = both(&m, &kb, &cfg, &Atom::ground("p", "a", "b"));
        assert_eq!((a, b), (0.0, 0.0));
    }

    fn random_model(seed: u64, variant: Variant, transformed_head: bool) -> (Model, KnowledgeBase) {
        let kb = parse_kb(
            "p(a,b).\np(b,c).\nq(c,d).\nq(a,c).\nr(d,a).\np(d,d).\n",
            FactFormat::Prolog,
        )
        .unwrap()
        .0;
        let spec = |template| ReformulatorSpec { variant, template };
        let mut cfg = ModelConfig {
            dim: 4,
            entity_scale: 0.5,
            predicate_scale: 0.5,
            reformulators: vec![spec(Template::Chain), spec(Template::Inverse), spec(Template::Direct)],
            ..Default::default()
        };
        cfg.reformulator_init.weight_scale = 0.5;
        cfg.reformulator_init.memory_size = 3;
        cfg.reformulator_init.transformed_head = transformed_head;
        let m = Model::new(kb.predicates(), kb.entities(), &cfg, seed).unwrap();
        (m, kb)
    }

    fn all_goals(kb: &KnowledgeBase) -> Vec<Atom> {
        let mut out = Vec::new();
        for p in kb.predicates().symbols() {
            for s in kb.entities().symbols() {
                for o in kb.entities().symbols() {
                    out.push(Atom::ground(p, s, o));
                }
            }
        }
        out
    }

    #[test]
    fn tabled_matches_literal_values_and_gradients() {
        let exact = ProverConfig {
            depth: 2,
            unify_facts: true,
            min_score: 0.0,
        };
        for (seed, variant, th) in [
            (1, Variant::Linear, false),
            (2, Variant::Attentive, false),
            (3, Variant::Memory, true),
        ] {
            let (m, kb) = random_model(seed, variant, th);
            let compiled = CompiledKb::new(&kb, &m.store).unwrap();
            for goal in all_goals(&kb).into_iter().step_by(7) {
                let mut g1 = Graph::new();
                let n1 = LiteralProver::new(&mut g1, &m, &kb, &exact).prove(&goal).unwrap();
                let grads1 = g1.param_grads(&g1.backward(n1).unwrap());
                let pruned = ProverConfig::default();
                for cfg in [&exact, &pruned] {
                    let mut g2 = Graph::new();
                    let n2 = Session::new(&mut g2, &m, &compiled, cfg).unwrap().prove(&goal).unwrap();
                    assert_eq!(g1.scalar(n1), g2.scalar(n2), "{goal} {variant:?}");
                    let grads2 = g2.param_grads(&g2.backward(n2).unwrap());
                    for (id, t1) in &grads1 {
                        let zero = Tensor::zeros(t1.shape());
                        let t2 = grads2.get(id).unwrap_or(&zero);
                        for (x, y) in t1.data().iter().zip(t2.data()) {
                            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{goal}: {x} vs {y}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scores_grow_with_depth_and_reformulators() {
        let (m, kb) = random_model(5, Variant::Linear, false);
        let compiled = CompiledKb::new(&kb, &m.store).unwrap();
        let mut fewer = m.clone();
        fewer.reformulators.truncate(1);
        for goal in all_goals(&kb).into_iter().step_by(5) {
            let mut prev = 0.0;
            for depth in 0..3 {
                let cfg = ProverConfig::with_depth(depth);
                let mut g = Graph::new();
                let v = Session::new(&mut g, &m, &compiled, &cfg).unwrap().score(&goal).unwrap();
                assert!(v >= prev, "{goal} depth {depth}: {v} < {prev}");
                let mut g = Graph::new();
                let w = Session::new(&mut g, &fewer, &compiled, &cfg).unwrap().score(&goal).unwrap();
                assert!(v >= w);
                prev = v;
            }
        }
    }

    #[test]
    fn masking_removes_the_fact() {
        let m = one_hot_model(&["p"], &["a", "b"], &[]);
        let kb = parse_kb("p(a,b).", FactFormat::Prolog).unwrap().0;
        let compiled = CompiledKb::new(&kb, &m.store).unwrap();
        let cfg = ProverConfig::with_depth(0);
        let mut g = Graph::new();
        let mut s = Session::new(&mut g, &m, &compiled, &cfg).unwrap();
        let goal = Atom::ground("p", "a", "b");
        assert_eq!(s.score(&goal).unwrap(), 1.0);
        s.set_mask(compiled.find_atom(&goal, &m.store));
        assert_eq!(s.score(&goal).unwrap(), 0.0);
    }

    #[test]
    fn session_gradients_match_finite_differences() {
        let (m, kb) = random_model(11, Variant::Linear, false);
        let compiled = CompiledKb::new(&kb, &m.store).unwrap();
        let cfg = ProverConfig::with_depth(1);
        let goal = Atom::ground("q", "a", "d");
        let ids: Vec<_> = m.params().ids().collect();
        let values: Vec<Tensor> = ids.iter().map(|&id| m.params().value(id).clone()).collect();
        let err = crate::autodiff::grad_check(
            |g, leaves| {
                for (&id, &leaf) in ids.iter().zip(leaves) {
                    g.bind_param(id, leaf);
                }
                Session::new(g, &m, &compiled, &cfg)?.prove(&goal)
            },
            &values,
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn trace_names_the_fact_path() {
        let m = one_hot_model(&["p", "g"], &["rick", "beth", "morty"], &["g(X,Y) :- p(X,Z), p(Z,Y)."]);
        let kb = example_kb();
        let compiled = CompiledKb::new(&kb, &m.store).unwrap();
        let cfg = ProverConfig::with_depth(1);
        let mut g = Graph::new();
        let t = Session::new(&mut g, &m, &compiled, &cfg)
            .unwrap()
            .trace(&Atom::ground("g", "rick", "morty"))
            .unwrap();
        assert_eq!(t.score, 1.0);
        let root = t.proof.unwrap();
        assert_eq!(root.rule.as_deref(), Some("g(X, Y) :- p(X, Z), p(Z, Y)"));
        assert_eq!(root.children.len(), 2);
        assert_eq!(root.children[0].fact.as_deref(), Some("p(rick, beth)"));
        assert_eq!(root.children[1].goal, "p(beth, morty)");
    }
}
