use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse::{parse_fact_at, parse_rule_at};
use super::{Atom, FactFormat, Rule, Term};
use crate::error::{Error, Result};

/// Insertion-ordered symbol set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(symbols: Vec<String>) -> Self {
        let mut v = Vocab::default();
        for s in symbols {
            v.insert(&s);
        }
        v
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.symbols
    }
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `symbol` if new and returns its index.
    pub fn insert(&mut self, symbol: &str) -> usize {
        if let Some(&i) = self.index.get(symbol) {
            return i;
        }
        let i = self.symbols.len();
        self.symbols.push(symbol.to_string());
        self.index.insert(symbol.to_string(), i);
        i
    }

    pub fn get(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.index.contains_key(symbol)
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Ground facts, optional rules and the vocabularies they use.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    facts: Vec<Atom>,
    fact_set: HashSet<Atom>,
    rules: Vec<Rule>,
    entities: Vocab,
    predicates: Vocab,
}

/// Counts gathered while loading a knowledge base.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub facts: usize,
    pub rules: usize,
    pub duplicates: usize,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a knowledge base from facts, dropping duplicates.
    pub fn from_facts<I: IntoIterator<Item = Atom>>(facts: I) -> Result<Self> {
        let mut kb = Self::new();
        for f in facts {
            kb.add_fact(f)?;
        }
        Ok(kb)
    }

    /// Adds a ground fact. Returns `false` when it was already present.
    pub fn add_fact(&mut self, fact: Atom) -> Result<bool> {
        if !fact.is_ground() {
            return Err(Error::Invalid(format!("fact {fact} is not ground")));
        }
        if self.fact_set.contains(&fact) {
            return Ok(false);
        }
        self.register(&fact);
        self.fact_set.insert(fact.clone());
        self.facts.push(fact);
        Ok(true)
    }

    pub fn add_rule(&mut self, rule: Rule) {
        if rule.is_fact() {
            // A bodiless rule is a fact; route it through the dedup path.
            let _ = self.add_fact(rule.head);
            return;
        }
        for a in std::iter::once(&rule.head).chain(&rule.body) {
            self.register(a);
        }
        self.rules.push(rule);
    }

    /// Adds a predicate symbol that occurs in no fact, such as a query-only
    /// goal predicate.
    pub fn add_predicate(&mut self, symbol: &str) -> usize {
        self.predicates.insert(symbol)
    }

    pub fn add_entity(&mut self, symbol: &str) -> usize {
        self.entities.insert(symbol)
    }

    fn register(&mut self, atom: &Atom) {
        self.predicates.insert(&atom.predicate);
        for t in &atom.args {
            if let Term::Const(c) = t {
                self.entities.insert(c);
            }
        }
    }

    pub fn facts(&self) -> &[Atom] {
        &self.facts
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn predicates(&self) -> &Vocab {
        &self.predicates
    }

    pub fn contains(&self, fact: &Atom) -> bool {
        self.fact_set.contains(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// Parses knowledge-base text. Blank lines and lines starting with `#` are
/// skipped; in prolog layout, lines containing `:-` are read as rules. All
/// malformed lines are reported together.
pub fn parse_kb(text: &str, format: FactFormat) -> Result<(KnowledgeBase, LoadReport)> {
    let mut kb = KnowledgeBase::new();
    let mut report = LoadReport::default();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        if format == FactFormat::Prolog && line.contains(":-") {
            match parse_rule_at(raw, lineno) {
                Ok(rule) => {
                    kb.add_rule(rule);
                    report.rules += 1;
                }
                Err(e) => errors.push(e),
            }
            continue;
        }
        match parse_fact_at(raw, format, lineno) {
            Ok(fact) => {
                if kb.add_fact(fact)? {
                    report.facts += 1;
                } else {
                    report.duplicates += 1;
                }
            }
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        let details = errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n");
        return Err(Error::ParseFile {
            path: Default::default(),
            count: errors.len(),
            details,
        });
    }
    if report.duplicates > 0 {
        log::warn!("dropped {} duplicate fact(s)", report.duplicates);
    }
    Ok((kb, report))
}

/// Reads and parses a knowledge-base file.
pub fn load_kb(path: impl AsRef<Path>, format: FactFormat) -> Result<(KnowledgeBase, LoadReport)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kb(&text, format).map_err(|e| match e {
        Error::ParseFile { count, details, .. } => Error::ParseFile {
            path: path.to_path_buf(),
            count,
            details,
        },
        other => other,
    })
}
