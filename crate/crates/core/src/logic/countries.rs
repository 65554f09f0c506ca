//! Country geography knowledge bases with held-out region facts.
//!
//! A world file lists, per country, its subregion, its region and its
//! neighbours. From it [`countries_split`] builds the three standard
//! difficulty levels: the held-out countries always lose their
//! `locatedIn(country, region)` fact; level 2 also hides their subregion
//! fact; level 3 further hides the region facts of the neighbours of test
//! countries.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Atom, KnowledgeBase};
use crate::error::{Error, Result};

pub const LOCATED_IN: &str = "locatedIn";
pub const NEIGHBOR_OF: &str = "neighborOf";

const BUILTIN_WORLD: &str = include_str!("../../data/countries_world.tsv");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Country {
    pub name: String,
    pub subregion: String,
    pub region: String,
    pub neighbours: Vec<String>,
}

/// Countries with symmetric neighbour lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct World {
    countries: Vec<Country>,
}

impl World {
    /// The bundled world table (245 countries, 5 regions).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_WORLD).expect("bundled world file is valid")
    }

    /// Parses tab-separated lines `country subregion region n1,n2,...`.
    /// Neighbour relations are made symmetric.
    pub fn parse(text: &str) -> Result<Self> {
        let mut countries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 || fields.len() > 4 || fields[..3].iter().any(|f| f.trim().is_empty()) {
                return Err(Error::Parse {
                    line: i + 1,
                    text: raw.to_string(),
                    message: "expected country, subregion, region and optional neighbours".into(),
                });
            }
            let neighbours = fields
                .get(3)
                .map(|f| f.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
                .unwrap_or_default();
            countries.push(Country {
                name: fields[0].trim().to_string(),
                subregion: fields[1].trim().to_string(),
                region: fields[2].trim().to_string(),
                neighbours,
            });
        }
        let names: BTreeSet<String> = countries.iter().map(|c| c.name.clone()).collect();
        if names.len() != countries.len() {
            return Err(Error::Invalid("duplicate country in world file".into()));
        }
        let mut adjacency: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for c in &countries {
            for n in &c.neighbours {
                if !names.contains(n) {
                    return Err(Error::UnknownSymbol {
                        kind: "country",
                        symbol: n.clone(),
                    });
                }
                adjacency.entry(c.name.clone()).or_default().insert(n.clone());
                adjacency.entry(n.clone()).or_default().insert(c.name.clone());
            }
        }
        for c in &mut countries {
            c.neighbours = adjacency.remove(&c.name).unwrap_or_default().into_iter().collect();
        }
        Ok(World { countries })
    }

    pub fn countries(&self) -> &[Country] {
        &self.countries
    }

    pub fn regions(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.countries.iter().map(|c| &c.region).collect();
        set.into_iter().cloned().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountriesTask {
    S1,
    S2,
    S3,
}

impl std::str::FromStr for CountriesTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(CountriesTask::S1),
            "S2" => Ok(CountriesTask::S2),
            "S3" => Ok(CountriesTask::S3),
            _ => Err(Error::Config(format!("unknown countries task `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CountriesSplit {
    pub train: Vec<Atom>,
    /// `locatedIn(country, region)` for validation countries.
    pub dev: Vec<Atom>,
    /// `locatedIn(country, region)` for test countries.
    pub test: Vec<Atom>,
    pub regions: Vec<String>,
}

impl CountriesSplit {
    pub fn train_kb(&self) -> Result<KnowledgeBase> {
        KnowledgeBase::from_facts(self.train.iter().cloned())
    }
}

/// Holds out `n_dev` and `n_test` countries, each with at least one
/// neighbour left in training, and removes facts according to `task`.
pub fn countries_split(world: &World, task: CountriesTask, n_dev: usize, n_test: usize, seed: u64) -> Result<CountriesSplit> {
    let countries = world.countries();
    if n_dev + n_test >= countries.len() {
        return Err(Error::Config("not enough countries to hold out".into()));
    }
    let by_name: BTreeMap<&str, &Country> = countries.iter().map(|c| (c.name.as_str(), c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<&Country> = countries.iter().filter(|c| !c.neighbours.is_empty()).collect();
    if candidates.len() < n_dev + n_test {
        return Err(Error::Config("not enough countries with neighbours to hold out".into()));
    }
    let (dev, test) = 'draw: {
        for _ in 0..1000 {
            let mut order = candidates.clone();
            order.shuffle(&mut rng);
            let held: BTreeSet<&str> = order[..n_dev + n_test].iter().map(|c| c.name.as_str()).collect();
            let ok = held
                .iter()
                .all(|c| by_name[c].neighbours.iter().any(|n| !held.contains(n.as_str())));
            if ok {
                let dev: Vec<&Country> = order[..n_dev].to_vec();
                let test: Vec<&Country> = order[n_dev..n_dev + n_test].to_vec();
                break 'draw (dev, test);
            }
        }
        return Err(Error::Config("could not find a held-out set whose countries keep a training neighbour".into()));
    };
    let held: BTreeSet<&str> = dev.iter().chain(&test).map(|c| c.name.as_str()).collect();
    let test_neighbours: BTreeSet<&str> = test
        .iter()
        .flat_map(|c| c.neighbours.iter().map(String::as_str))
        .filter(|n| !held.contains(n))
        .collect();

    let mut train = Vec::new();
    let mut subregions = BTreeMap::new();
    for c in countries {
        for n in &c.neighbours {
            train.push(Atom::ground(NEIGHBOR_OF, &c.name, n));
        }
        let is_held = held.contains(c.name.as_str());
        let hide_sub = is_held && task != CountriesTask::S1;
        if !hide_sub {
            train.push(Atom::ground(LOCATED_IN, &c.name, &c.subregion));
        }
        let hide_region = is_held || (task == CountriesTask::S3 && test_neighbours.contains(c.name.as_str()));
        if !hide_region {
            train.push(Atom::ground(LOCATED_IN, &c.name, &c.region));
        }
        subregions.insert(c.subregion.clone(), c.region.clone());
    }
    for (s, r) in &subregions {
        train.push(Atom::ground(LOCATED_IN, s, r));
    }
    let region_fact = |c: &&Country| Atom::ground(LOCATED_IN, &c.name, &c.region);
    Ok(CountriesSplit {
        train,
        dev: dev.iter().map(region_fact).collect(),
        test: test.iter().map(region_fact).collect(),
        regions: world.regions(),
    })
}
