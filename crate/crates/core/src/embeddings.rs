//! Trainable symbol embeddings.
//!
//! Every predicate and every constant owns one row vector, registered as a
//! separate parameter so that gradients stay sparse per symbol.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{gaussian_kernel, Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::logic::{KnowledgeBase, Vocab};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Predicates,
    Entities,
}

impl Table {
    fn kind(self) -> &'static str {
        match self {
            Table::Predicates => "predicate",
            Table::Entities => "entity",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    dim: usize,
    bandwidth: f64,
    predicates: Vocab,
    entities: Vocab,
    pred_rows: Vec<ParamId>,
    ent_rows: Vec<ParamId>,
    params: ParamStore,
}

/// Serialized form of one table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSegment {
    pub dim: usize,
    pub symbols: Vec<String>,
    pub data: Vec<f64>,
}

/// Serialized form of a store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSegment {
    pub bandwidth: f64,
    pub predicates: TableSegment,
    pub entities: TableSegment,
}

/// Initialises both tables of `kb` with i.i.d. `Normal(0, scale^2)` entries.
pub fn init_store(kb: &KnowledgeBase, dim: usize, seed: u64, scale: f64) -> Result<EmbeddingStore> {
    EmbeddingStore::init(kb.predicates(), kb.entities(), dim, seed, scale, scale)
}

impl EmbeddingStore {
    /// Predicate rows are drawn first, then entity rows, from one seeded
    /// stream.
    pub fn init(
        predicates: &Vocab,
        entities: &Vocab,
        dim: usize,
        seed: u64,
        predicate_scale: f64,
        entity_scale: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if predicates.is_empty() || entities.is_empty() {
            return Err(Error::Config("cannot embed an empty vocabulary".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |scale: f64| -> Result<Tensor> {
            let normal = Normal::new(0.0, scale).map_err(|e| Error::Config(format!("init scale {scale}: {e}")))?;
            Ok(Tensor::vector((0..dim).map(|_| normal.sample(&mut rng)).collect()))
        };
        let mut params = ParamStore::new();
        let mut pred_rows = Vec::with_capacity(predicates.len());
        for s in predicates.symbols() {
            pred_rows.push(params.add(format!("predicate/{s}"), draw(predicate_scale)?, true));
        }
        let mut ent_rows = Vec::with_capacity(entities.len());
        for s in entities.symbols() {
            ent_rows.push(params.add(format!("entity/{s}"), draw(entity_scale)?, true));
        }
        Ok(EmbeddingStore {
            dim,
            bandwidth: 1.0,
            predicates: predicates.clone(),
            entities: entities.clone(),
            pred_rows,
            ent_rows,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Kernel bandwidth used for similarities between rows.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn set_bandwidth(&mut self, bandwidth: f64) -> Result<()> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
        }
        self.bandwidth = bandwidth;
        Ok(())
    }

    pub fn vocab(&self, table: Table) -> &Vocab {
        match table {
            Table::Predicates => &self.predicates,
            Table::Entities => &self.entities,
        }
    }

    fn rows(&self, table: Table) -> &[ParamId] {
        match table {
            Table::Predicates => &self.pred_rows,
            Table::Entities => &self.ent_rows,
        }
    }

    /// Row index of `symbol`, or an error naming it.
    pub fn index(&self, table: Table, symbol: &str) -> Result<usize> {
        self.vocab(table).get(symbol).ok_or_else(|| Error::UnknownSymbol {
            kind: table.kind(),
            symbol: symbol.to_string(),
        })
    }

    pub fn param_id(&self, table: Table, row: usize) -> ParamId {
        self.rows(table)[row]
    }

    /// Graph leaf for the row of `symbol`; repeated lookups in one graph
    /// share the leaf.
    pub fn lookup(&self, graph: &mut Graph, table: Table, symbol: &str) -> Result<NodeId> {
        let row = self.index(table, symbol)?;
        Ok(self.row_node(graph, table, row))
    }

    pub fn row_node(&self, graph: &mut Graph, table: Table, row: usize) -> NodeId {
        graph.param(self.rows(table)[row], &self.params)
    }

    pub fn row(&self, table: Table, row: usize) -> &[f64] {
        self.params.value(self.rows(table)[row]).data()
    }

    pub fn vector(&self, table: Table, symbol: &str) -> Result<&[f64]> {
        Ok(self.row(table, self.index(table, symbol)?))
    }

    /// Overwrites the row of `symbol`.
    pub fn set_vector(&mut self, table: Table, symbol: &str, values: &[f64]) -> Result<()> {
        let row = self.index(table, symbol)?;
        if values.len() != self.dim {
            return Err(Error::Shape(format!("row of length {} for dimension {}", values.len(), self.dim)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("set_vector".into()));
        }
        let id = self.rows(table)[row];
        self.params.value_mut(id).data_mut().copy_from_slice(values);
        Ok(())
    }

    /// Row of `table` most similar to `query` under the store kernel, with
    /// its similarity. Ties go to the lowest row.
    pub fn nearest_symbol(&self, query: &[f64], table: Table) -> (String, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..self.vocab(table).len() {
            let k = gaussian_kernel(query, self.row(table, i), self.bandwidth);
            if k > best.1 {
                best = (i, k);
            }
        }
        (self.vocab(table).symbol(best.0).to_string(), best.1)
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn table_segment(&self, table: Table) -> TableSegment {
        let mut data = Vec::with_capacity(self.vocab(table).len() * self.dim);
        for i in 0..self.vocab(table).len() {
            data.extend_from_slice(self.row(table, i));
        }
        TableSegment {
            dim: self.dim,
            symbols: self.vocab(table).symbols().to_vec(),
            data,
        }
    }

    pub fn to_segment(&self) -> EmbeddingSegment {
        EmbeddingSegment {
            bandwidth: self.bandwidth,
            predicates: self.table_segment(Table::Predicates),
            entities: self.table_segment(Table::Entities),
        }
    }

    /// Rebuilds a store. Parameters are registered in the same order as by
    /// [`EmbeddingStore::init`], so parameter ids match.
    pub fn from_segment(seg: &EmbeddingSegment) -> Result<Self> {
        let dim = seg.predicates.dim;
        if dim == 0 || seg.entities.dim != dim {
            return Err(Error::Shape("embedding tables disagree on dimension".into()));
        }
        let mut params = ParamStore::new();
        let mut load = |t: &TableSegment, prefix: &str| -> Result<(Vocab, Vec<ParamId>)> {
            if t.data.len() != t.symbols.len() * dim {
                return Err(Error::Shape(format!(
                    "{prefix} table has {} values for {} symbols of dimension {dim}",
                    t.data.len(),
                    t.symbols.len()
                )));
            }
            let vocab = Vocab::from(t.symbols.clone());
            if vocab.len() != t.symbols.len() {
                return Err(Error::Invalid(format!("duplicate symbol in {prefix} table")));
            }
            let rows = t
                .symbols
                .iter()
                .zip(t.data.chunks(dim))
                .map(|(s, chunk)| {
                    let v = Tensor::vector(chunk.to_vec());
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!("{prefix} row {s}")));
                    }
                    Ok(params.add(format!("{prefix}/{s}"), v, true))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((vocab, rows))
        };
        let (predicates, pred_rows) = load(&seg.predicates, "predicate")?;
        let (entities, ent_rows) = load(&seg.entities, "entity")?;
        let mut store = EmbeddingStore {
            dim,
            bandwidth: 1.0,
            predicates,
            entities,
            pred_rows,
            ent_rows,
            params,
        };
        store.set_bandwidth(seg.bandwidth)?;
        Ok(store)
    }
}
