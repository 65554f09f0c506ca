use std::collections::HashMap;

use crate::embeddings::{EmbeddingStore, Table};
use crate::error::Result;
use crate::logic::{Atom, KnowledgeBase};

/// Facts as `(predicate row, subject row, object row)` with lookup indices.
#[derive(Clone, Debug, Default)]
pub struct CompiledKb {
    facts: Vec<[u32; 3]>,
    by_pred: HashMap<u32, Vec<u32>>,
    by_subject: HashMap<(u32, u32), Vec<u32>>,
    by_object: HashMap<(u32, u32), Vec<u32>>,
    index: HashMap<[u32; 3], u32>,
}

impl CompiledKb {
    /// Maps every symbol to its row in `store`.
    pub fn new(kb: &KnowledgeBase, store: &EmbeddingStore) -> Result<Self> {
        Self::with_entity_rows(kb, store, |s| store.index(Table::Entities, s))
    }

    /// Like [`CompiledKb::new`] with a custom entity-to-row map.
    pub fn with_entity_rows(
        kb: &KnowledgeBase,
        store: &EmbeddingStore,
        entity_row: impl Fn(&str) -> Result<usize>,
    ) -> Result<Self> {
        let mut out = CompiledKb::default();
        for f in kb.facts() {
            let p = store.index(Table::Predicates, &f.predicate)? as u32;
            let s = entity_row(f.args[0].name())? as u32;
            let o = entity_row(f.args[1].name())? as u32;
            out.push([p, s, o]);
        }
        Ok(out)
    }

    fn push(&mut self, f: [u32; 3]) {
        if self.index.contains_key(&f) {
            return;
        }
        let id = self.facts.len() as u32;
        self.facts.push(f);
        self.index.insert(f, id);
        self.by_pred.entry(f[0]).or_default().push(id);
        self.by_subject.entry((f[0], f[1])).or_default().push(id);
        self.by_object.entry((f[0], f[2])).or_default().push(id);
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn fact(&self, id: u32) -> [u32; 3] {
        self.facts[id as usize]
    }

    /// Id of a fact given as rows.
    pub fn find(&self, fact: [u32; 3]) -> Option<u32> {
        self.index.get(&fact).copied()
    }

    /// Id of a symbolic fact, if present.
    pub fn find_atom(&self, atom: &Atom, store: &EmbeddingStore) -> Option<u32> {
        let p = store.vocab(Table::Predicates).get(&atom.predicate)? as u32;
        let s = store.vocab(Table::Entities).get(atom.args[0].name())? as u32;
        let o = store.vocab(Table::Entities).get(atom.args[1].name())? as u32;
        self.find([p, s, o])
    }

    pub(crate) fn with_pred(&self, p: u32) -> &[u32] {
        self.by_pred.get(&p).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn with_subject(&self, p: u32, s: u32) -> &[u32] {
        self.by_subject.get(&(p, s)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn with_object(&self, p: u32, o: u32) -> &[u32] {
        self.by_object.get(&(p, o)).map(Vec::as_slice).unwrap_or(&[])
    }
}
