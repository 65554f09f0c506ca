use std::collections::BTreeMap;

use super::{Atom, Rule, Term};
use crate::error::{Error, Result};

/// Variable name to bound term.
pub type Substitution = BTreeMap<String, Term>;

fn resolve(term: &Term, subst: &Substitution) -> Result<Term> {
    let mut current = term;
    let mut steps = 0usize;
    while let Term::Var(name) = current {
        match subst.get(name) {
            Some(next) => {
                steps += 1;
                if steps > subst.len() {
                    return Err(Error::CyclicSubstitution(name.clone()));
                }
                current = next;
            }
            None => break,
        }
    }
    Ok(current.clone())
}

/// Replaces every bound variable, following chains of bindings to a fixed
/// point. Unbound variables are left as they are.
pub fn apply_substitution(atom: &Atom, subst: &Substitution) -> Result<Atom> {
    Ok(Atom::new(
        atom.predicate.clone(),
        resolve(&atom.args[0], subst)?,
        resolve(&atom.args[1], subst)?,
    ))
}

/// Renames the variables of `rule` to `_V<n>` with `n` drawn from `counter`,
/// in order of first appearance.
pub fn standardize_apart(rule: &Rule, counter: &mut u64) -> Rule {
    let mut renaming = Substitution::new();
    for v in rule.variables() {
        renaming.insert(v, Term::Var(format!("_V{}", *counter)));
        *counter += 1;
    }
    let rename = |a: &Atom| {
        let map = |t: &Term| match t {
            Term::Var(v) => renaming[v].clone(),
            c => c.clone(),
        };
        Atom::new(a.predicate.clone(), map(&a.args[0]), map(&a.args[1]))
    };
    Rule {
        head: rename(&rule.head),
        body: rule.body.iter().map(rename).collect(),
    }
}
