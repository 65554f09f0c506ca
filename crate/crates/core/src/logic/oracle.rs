//! Exact depth-bounded backward chaining over symbols.
//!
//! Facts are matched at every depth. A rule application consumes one unit of
//! depth for each of its body atoms, so `depth` counts nested rule
//! applications along a proof branch.

use super::subst::{apply_substitution, standardize_apart, Substitution};
use super::{Atom, KnowledgeBase, Term};

fn walk<'a>(t: &'a Term, s: &'a Substitution) -> &'a Term {
    let mut cur = t;
    while let Term::Var(v) = cur {
        match s.get(v) {
            Some(next) => cur = next,
            None => break,
        }
    }
    cur
}

/// Syntactic unification of a clause head with a goal.
pub(crate) fn unify_symbolic(head: &Atom, goal: &Atom, subst: &Substitution) -> Option<Substitution> {
    if head.predicate != goal.predicate {
        return None;
    }
    let mut s = subst.clone();
    for i in 0..2 {
        let h = walk(&head.args[i], &s).clone();
        let g = walk(&goal.args[i], &s).clone();
        if h == g {
            continue;
        }
        match (&h, &g) {
            (Term::Var(v), _) => {
                s.insert(v.clone(), g);
            }
            (_, Term::Var(v)) => {
                s.insert(v.clone(), h);
            }
            _ => return None,
        }
    }
    Some(s)
}

struct Search<'a> {
    kb: &'a KnowledgeBase,
    counter: u64,
}

impl Search<'_> {
    fn solve(&mut self, goals: &[(Atom, usize)], subst: &Substitution) -> bool {
        let Some(((goal, depth), rest)) = goals.split_first() else {
            return true;
        };
        let goal = match apply_substitution(goal, subst) {
            Ok(g) => g,
            Err(_) => return false,
        };
        for fact in self.kb.facts() {
            if let Some(s) = unify_symbolic(fact, &goal, subst) {
                if self.solve(rest, &s) {
                    return true;
                }
            }
        }
        if *depth == 0 {
            return false;
        }
        for rule in self.kb.rules() {
            let rule = standardize_apart(rule, &mut self.counter);
            if let Some(s) = unify_symbolic(&rule.head, &goal, subst) {
                let mut next: Vec<(Atom, usize)> = rule.body.into_iter().map(|b| (b, depth - 1)).collect();
                next.extend_from_slice(rest);
                if self.solve(&next, &s) {
                    return true;
                }
            }
        }
        false
    }
}

/// True when `goal` follows from the facts and rules of `kb` with at most
/// `depth` nested rule applications. Uses exact symbol equality.
pub fn symbolic_entails(kb: &KnowledgeBase, goal: &Atom, depth: usize) -> bool {
    let mut search = Search { kb, counter: 0 };
    search.solve(&[(goal.clone(), depth)], &Substitution::new())
}
