//! Symbolic layer: terms, atoms, Horn clauses, knowledge bases, dataset
//! readers, the kinship instance generator and an exact backward-chaining
//! oracle.

pub mod countries;
pub mod generator;
mod kb;
pub mod oracle;
mod parse;
mod subst;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generator::{
    generate_kinship_instances, read_instances, write_instances, CompositionTable, GeneratorConfig, GraphInstance, Splits,
};
pub use kb::{load_kb, parse_kb, KnowledgeBase, LoadReport, Vocab};
pub use oracle::symbolic_entails;
pub use parse::{format_atom, parse_fact_line, parse_rule_line, FactFormat};
pub use subst::{apply_substitution, standardize_apart, Substitution};

/// True when `name` is spelled like a variable: an uppercase letter or an
/// underscore followed by letters, digits and underscores.
pub fn is_variable_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    /// Classifies a token by spelling.
    pub fn parse(token: &str) -> Result<Term> {
        let token = token.trim();
        if token.is_empty() {
            return Err(Error::Invalid("empty term".into()));
        }
        if is_variable_name(token) {
            Ok(Term::Var(token.to_string()))
        } else {
            Ok(Term::Const(token.to_string()))
        }
    }

    pub fn constant(s: impl Into<String>) -> Term {
        Term::Const(s.into())
    }

    pub fn var(s: impl Into<String>) -> Term {
        Term::Var(s.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Const(s) | Term::Var(s) => s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A binary predicate application.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: [Term; 2],
}

impl Atom {
    pub fn new(predicate: impl Into<String>, a: Term, b: Term) -> Self {
        Atom {
            predicate: predicate.into(),
            args: [a, b],
        }
    }

    /// Ground atom from three symbol names.
    pub fn ground(predicate: &str, subject: &str, object: &str) -> Self {
        Atom::new(predicate, Term::constant(subject), Term::constant(object))
    }

    /// Atom whose arguments are classified by spelling (`X` is a variable,
    /// `rick` a constant).
    pub fn parse_args(predicate: &str, a: &str, b: &str) -> Result<Self> {
        Ok(Atom::new(predicate, Term::parse(a)?, Term::parse(b)?))
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.predicate, self.args[0], self.args[1])
    }
}

/// Horn clause `head :- body`. An empty body is a fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Atom>) -> Result<Self> {
        if body.len() > 2 {
            return Err(Error::Invalid(format!(
                "rule bodies hold at most two atoms, got {}",
                body.len()
            )));
        }
        if body.is_empty() && !head.is_ground() {
            return Err(Error::Invalid(format!("fact {head} is not ground")));
        }
        Ok(Rule { head, body })
    }

    pub fn fact(head: Atom) -> Result<Self> {
        Rule::new(head, Vec::new())
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Variables in order of first appearance, head first.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for atom in std::iter::once(&self.head).chain(&self.body) {
            for v in atom.variables() {
                if !out.iter().any(|o| o == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, b) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{b}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_spelling() {
        assert!(is_variable_name("X"));
        assert!(is_variable_name("Xs_1"));
        assert!(is_variable_name("_V7"));
        assert!(!is_variable_name("rick"));
        assert!(!is_variable_name("7"));
        assert!(!is_variable_name(""));
        assert!(!is_variable_name("X-ray"));
    }

    #[test]
    fn facts_must_be_ground() {
        let a = Atom::parse_args("p", "X", "b").unwrap();
        assert!(Rule::fact(a).is_err());
        assert!(Rule::fact(Atom::ground("p", "a", "b")).is_ok());
    }

    #[test]
    fn rule_display_and_variables() {
        let r = Rule::new(
            Atom::parse_args("g", "X", "Y").unwrap(),
            vec![
                Atom::parse_args("p", "X", "Z").unwrap(),
                Atom::parse_args("p", "Z", "Y").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(r.to_string(), "g(X, Y) :- p(X, Z), p(Z, Y)");
        assert_eq!(r.variables(), vec!["X", "Y", "Z"]);
    }
}
