//! Embeddings plus reformulators: everything the prover reads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::embeddings::{EmbeddingSegment, EmbeddingStore};
use crate::error::Result;
use crate::logic::{Rule, Vocab};
use crate::reformulate::{Reformulator, ReformulatorInit, ReformulatorSegment, ReformulatorSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub bandwidth: f64,
    pub predicate_scale: f64,
    pub entity_scale: f64,
    pub reformulators: Vec<ReformulatorSpec>,
    pub reformulator_init: ReformulatorInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        use crate::reformulate::{Template, Variant};
        let spec = |template| ReformulatorSpec {
            variant: Variant::Linear,
            template,
        };
        ModelConfig {
            dim: 50,
            bandwidth: 1.0,
            predicate_scale: 0.1,
            entity_scale: 1.0,
            reformulators: vec![
                spec(Template::Chain),
                spec(Template::Chain),
                spec(Template::Direct),
                spec(Template::Inverse),
                spec(Template::Chain),
            ],
            reformulator_init: ReformulatorInit::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub store: EmbeddingStore,
    pub reformulators: Vec<Reformulator>,
}

/// Serialized model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSegment {
    pub embeddings: EmbeddingSegment,
    pub reformulators: Vec<ReformulatorSegment>,
}

impl Model {
    /// Embeddings come from the seed's first stream, reformulator weights
    /// from its second.
    pub fn new(predicates: &Vocab, entities: &Vocab, config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut store = EmbeddingStore::init(
            predicates,
            entities,
            config.dim,
            seed,
            config.predicate_scale,
            config.entity_scale,
        )?;
        store.set_bandwidth(config.bandwidth)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let reformulators = config
            .reformulators
            .iter()
            .enumerate()
            .map(|(i, spec)| Reformulator::new(*spec, &mut store, &config.reformulator_init, &mut rng, &format!("reformulator{i}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Model { store, reformulators })
    }

    /// Appends an installed symbolic rule.
    pub fn install_rule(&mut self, rule: Rule) -> Result<()> {
        let r = Reformulator::fixed(rule, &self.store)?;
        self.reformulators.push(r);
        Ok(())
    }

    pub fn params(&self) -> &ParamStore {
        self.store.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        self.store.params_mut()
    }

    pub fn to_segment(&self) -> ModelSegment {
        ModelSegment {
            embeddings: self.store.to_segment(),
            reformulators: self.reformulators.iter().map(|r| r.to_segment(self.store.params())).collect(),
        }
    }

    pub fn from_segment(seg: &ModelSegment) -> Result<Self> {
        let mut store = EmbeddingStore::from_segment(&seg.embeddings)?;
        let reformulators = seg
            .reformulators
            .iter()
            .map(|r| Reformulator::from_segment(r, &mut store))
            .collect::<Result<Vec<_>>>()?;
        Ok(Model { store, reformulators })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_rule_line;

    fn vocab(items: &[&str]) -> Vocab {
        Vocab::from(items.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    #[test]
    fn default_model_has_five_reformulators() {
        let m = Model::new(&vocab(&["p", "q"]), &vocab(&["a", "b"]), &ModelConfig::default(), 0).unwrap();
        assert_eq!(m.reformulators.len(), 5);
        assert_eq!(m.store.dim(), 50);
    }

    #[test]
    fn segment_round_trip_preserves_everything() {
        let cfg = ModelConfig {
            dim: 4,
            ..Default::default()
        };
        let mut m = Model::new(&vocab(&["p", "q"]), &vocab(&["a", "b"]), &cfg, 3).unwrap();
        m.install_rule(parse_rule_line("p(X,Y) :- q(Y,X).").unwrap()).unwrap();
        let seg = m.to_segment();
        let back = Model::from_segment(&serde_json::from_str(&serde_json::to_string(&seg).unwrap()).unwrap()).unwrap();
        assert_eq!(back.to_segment(), seg);
        assert_eq!(back.params().len(), m.params().len());
    }
}
