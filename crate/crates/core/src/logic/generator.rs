//! Synthetic relational-reasoning instances.
//!
//! Each instance is a directed chain of edges whose end points form the
//! query pair; the target relation is the composition of the edge labels
//! under a [`CompositionTable`]. Optional distractor edges hang leaves off
//! the chain without creating new paths between the query entities.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Atom, KnowledgeBase, Rule, Term};
use crate::error::{Error, Result};

/// One query over a small graph of facts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphInstance {
    pub edges: Vec<(String, String, String)>,
    pub query: (String, String),
    pub target: String,
    pub hops: usize,
}

impl GraphInstance {
    /// Edge facts as a knowledge base.
    pub fn to_kb(&self) -> Result<KnowledgeBase> {
        KnowledgeBase::from_facts(self.edges.iter().map(|(s, p, o)| Atom::ground(p, s, o)))
    }

    /// Entities in order of first appearance in the edge list.
    pub fn entities(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (s, _, o) in &self.edges {
            for e in [s, o] {
                if seen.insert(e.as_str()) {
                    out.push(e.as_str());
                }
            }
        }
        out
    }

    pub fn query_atom(&self, predicate: &str) -> Atom {
        Atom::ground(predicate, &self.query.0, &self.query.1)
    }

    fn validate(&self) -> Result<()> {
        if self.hops == 0 {
            return Err(Error::Invalid("instance with zero hops".into()));
        }
        let ents = self.entities();
        for q in [&self.query.0, &self.query.1] {
            if !ents.contains(&q.as_str()) {
                return Err(Error::Invalid(format!("query entity `{q}` does not occur in the edges")));
            }
        }
        Ok(())
    }
}

/// Reads instances from a JSON Lines file.
pub fn read_instances(path: impl AsRef<Path>) -> Result<Vec<GraphInstance>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: GraphInstance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            text: line.clone(),
            message: e.to_string(),
        })?;
        inst.validate().map_err(|e| Error::Parse {
            line: i + 1,
            text: line.clone(),
            message: e.to_string(),
        })?;
        out.push(inst);
    }
    Ok(out)
}

/// Writes instances as JSON Lines.
pub fn write_instances(path: impl AsRef<Path>, instances: &[GraphInstance]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Binary composition of relations given by chain rules
/// `r(X,Y) :- a(X,Z), b(Z,Y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionTable {
    pub relations: Vec<String>,
    /// Labels that may appear on generated edges.
    pub edge_relations: Vec<String>,
    pub ground_rules: Vec<Rule>,
}

impl CompositionTable {
    pub fn new(relations: Vec<String>, edge_relations: Vec<String>, ground_rules: Vec<Rule>) -> Result<Self> {
        let table = CompositionTable {
            relations,
            edge_relations,
            ground_rules,
        };
        table.compositions()?;
        Ok(table)
    }

    /// `grand(X,Y) :- child(X,Z), child(Z,Y)` over edges labelled `child`.
    pub fn grandparent() -> Self {
        let rule = super::parse_rule_line("grand(X,Y) :- child(X,Z), child(Z,Y).").expect("valid rule");
        CompositionTable {
            relations: vec!["child".into(), "grand".into()],
            edge_relations: vec!["child".into()],
            ground_rules: vec![rule],
        }
    }

    /// The cyclic group of order `n`: relation `rel<i>` composed with
    /// `rel<j>` is `rel<(i+j) mod n>`. Edges carry steps of one and two
    /// in either direction, so every two-edge composition already covers
    /// the whole group.
    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 3, "cyclic table needs at least three relations");
        let name = |i: usize| format!("rel{i}");
        let mut rules = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let head = Atom::new(name((i + j) % n), Term::var("X"), Term::var("Y"));
                let body = vec![
                    Atom::new(name(i), Term::var("X"), Term::var("Z")),
                    Atom::new(name(j), Term::var("Z"), Term::var("Y")),
                ];
                rules.push(Rule::new(head, body).expect("two body atoms"));
            }
        }
        CompositionTable {
            relations: (0..n).map(name).collect(),
            edge_relations: [1, 2, n - 2, n - 1].into_iter().collect::<BTreeSet<_>>().into_iter().map(name).collect(),
            ground_rules: rules,
        }
    }

    /// Looks up a built-in table by name: `grandparent` or `cyclic<n>`.
    pub fn builtin(name: &str) -> Result<Self> {
        if name == "grandparent" {
            return Ok(Self::grandparent());
        }
        if let Some(n) = name.strip_prefix("cyclic").and_then(|s| s.parse::<usize>().ok()) {
            if n >= 3 {
                return Ok(Self::cyclic(n));
            }
        }
        Err(Error::Config(format!("unknown composition table `{name}`")))
    }

    fn compositions(&self) -> Result<BTreeMap<(String, String), String>> {
        let rel: BTreeSet<&str> = self.relations.iter().map(String::as_str).collect();
        for e in &self.edge_relations {
            if !rel.contains(e.as_str()) {
                return Err(Error::Config(format!("edge relation `{e}` is not a relation")));
            }
        }
        let mut map = BTreeMap::new();
        for r in &self.ground_rules {
            let shape_ok = r.body.len() == 2
                && r.head.args == [Term::var("X"), Term::var("Y")]
                && r.body[0].args[0] == r.head.args[0]
                && r.body[1].args[1] == r.head.args[1]
                && r.body[0].args[1].is_var()
                && r.body[0].args[1] == r.body[1].args[0]
                && !r.head.args.contains(&r.body[0].args[1]);
            if !shape_ok {
                return Err(Error::Config(format!("ground rule `{r}` is not of the form r(X,Y) :- a(X,Z), b(Z,Y)")));
            }
            for p in std::iter::once(&r.head).chain(&r.body) {
                if !rel.contains(p.predicate.as_str()) {
                    return Err(Error::Config(format!("rule `{r}` uses unknown relation `{}`", p.predicate)));
                }
            }
            let key = (r.body[0].predicate.clone(), r.body[1].predicate.clone());
            if let Some(prev) = map.insert(key.clone(), r.head.predicate.clone()) {
                if prev != r.head.predicate {
                    return Err(Error::Config(format!(
                        "composition of ({}, {}) is ambiguous: {prev} or {}",
                        key.0, key.1, r.head.predicate
                    )));
                }
            }
        }
        Ok(map)
    }

    /// Checks that every composition needed for paths of up to `max_hops`
    /// edges is defined and independent of bracketing.
    pub fn check_closure(&self, max_hops: usize) -> Result<()> {
        let map = self.compositions()?;
        let compose = |a: &str, b: &str| -> Result<String> {
            map.get(&(a.to_string(), b.to_string()))
                .cloned()
                .ok_or_else(|| Error::Config(format!("composition table has no entry for ({a}, {b})")))
        };
        // reach[n] holds the relations expressible by paths of n edges.
        let mut reach: Vec<BTreeSet<String>> = vec![BTreeSet::new(); max_hops + 1];
        if max_hops >= 1 {
            reach[1] = self.edge_relations.iter().cloned().collect();
        }
        for n in 2..=max_hops {
            let mut next = BTreeSet::new();
            for i in 1..n {
                for a in &reach[i] {
                    for b in &reach[n - i] {
                        next.insert(compose(a, b)?);
                    }
                }
            }
            reach[n] = next;
        }
        for i in 1..=max_hops {
            for j in 1..=max_hops.saturating_sub(i + 1) {
                for l in 1..=max_hops.saturating_sub(i + j) {
                    for a in &reach[i] {
                        for b in &reach[j] {
                            for c in &reach[l] {
                                let left = compose(&compose(a, b)?, c)?;
                                let right = compose(a, &compose(b, c)?)?;
                                if left != right {
                                    return Err(Error::Config(format!(
                                        "composition is not associative on ({a}, {b}, {c}): {left} vs {right}"
                                    )));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Relation named by a path of edge labels.
    pub fn compose_path(&self, labels: &[String]) -> Result<String> {
        let map = self.compositions()?;
        let mut it = labels.iter();
        let mut acc = it
            .next()
            .cloned()
            .ok_or_else(|| Error::Invalid("empty path".into()))?;
        for l in it {
            acc = map
                .get(&(acc.clone(), l.clone()))
                .cloned()
                .ok_or_else(|| Error::Config(format!("composition table has no entry for ({acc}, {l})")))?;
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub table: CompositionTable,
    pub train_hops: Vec<usize>,
    pub eval_hops: Vec<usize>,
    pub instances_per_hop: usize,
    /// Leaf edges attached to random chain nodes.
    #[serde(default)]
    pub distractors: usize,
}

/// Train and evaluation splits.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<GraphInstance>,
    pub eval: Vec<GraphInstance>,
}

/// Generates instances for every requested hop count. Output depends only
/// on `config` and `seed`.
pub fn generate_kinship_instances(config: &GeneratorConfig, seed: u64) -> Result<Splits> {
    let all_hops: Vec<usize> = config.train_hops.iter().chain(&config.eval_hops).copied().collect();
    if all_hops.contains(&0) {
        return Err(Error::Config("hop counts must be positive".into()));
    }
    let max_hops = all_hops.iter().copied().max().unwrap_or(0);
    config.table.check_closure(max_hops)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |hops: &[usize]| -> Result<Vec<GraphInstance>> {
        let mut out = Vec::new();
        for &h in hops {
            for _ in 0..config.instances_per_hop {
                out.push(sample_instance(config, h, &mut rng)?);
            }
        }
        Ok(out)
    };
    let train = make(&config.train_hops)?;
    let eval = make(&config.eval_hops)?;
    Ok(Splits { train, eval })
}

fn sample_instance(config: &GeneratorConfig, hops: usize, rng: &mut ChaCha8Rng) -> Result<GraphInstance> {
    let labels: Vec<String> = (0..hops)
        .map(|_| config.table.edge_relations[rng.random_range(0..config.table.edge_relations.len())].clone())
        .collect();
    let target = config.table.compose_path(&labels)?;
    let n_nodes = hops + 1 + config.distractors;
    let mut names: Vec<usize> = (0..n_nodes).collect();
    names.shuffle(rng);
    let name = |i: usize| format!("n{}", names[i]);
    let mut edges: Vec<(String, String, String)> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (name(i), l.clone(), name(i + 1)))
        .collect();
    for d in 0..config.distractors {
        let anchor = name(rng.random_range(0..=hops));
        let leaf = name(hops + 1 + d);
        let label = config.table.edge_relations[rng.random_range(0..config.table.edge_relations.len())].clone();
        if rng.random_bool(0.5) {
            edges.push((anchor, label, leaf));
        } else {
            edges.push((leaf, label, anchor));
        }
    }
    edges.shuffle(rng);
    Ok(GraphInstance {
        edges,
        query: (name(0), name(hops)),
        target,
        hops,
    })
}
