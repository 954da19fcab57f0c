//! Knowledge-graph data model.
//!
//! | item | role |
//! |------|------|
//! | [`Vocab`] | string ↔ dense id, stable insertion order |
//! | [`KnowledgeGraph`] | vocabularies plus a duplicate-free triple list |
//! | [`io`] | TSV triple and vocabulary files |
//! | [`synthetic`] | clustered generator for desk-scale experiments |
//! | [`partition`] | split one graph across federated clients |
//! | [`sampling`] | Poisson batches and both negative samplers |
//! | [`candidates`] | labelled member / non-member sets for attacks |

pub mod candidates;
pub mod io;
pub mod partition;
pub mod sampling;
pub mod synthetic;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use candidates::{build_candidate_set, build_candidate_set_within, AuxSchema, Candidate, CandidateSet};
pub use io::{load_triples, write_triples, LoadedGraph};
pub use partition::{partition_federated, split_public, ClientDataset, Partition};
pub use sampling::{negative_sample_random, negative_sample_self_adv, sample_batch};
pub use synthetic::{generate_synthetic, SyntheticKg};

/// A fact `(head, rel, tail)` as ids into the owning graph's vocabularies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub rel: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, rel: usize, tail: usize) -> Self {
        Triple { head, rel, tail }
    }
}

/// Bidirectional token table. Ids are assigned in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from a list; duplicate tokens are rejected.
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab::new();
        for n in names {
            let n = n.into();
            if v.index.contains_key(&n) {
                return Err(Error::Vocabulary(format!("duplicate token {n:?}")));
            }
            v.insert(n);
        }
        Ok(v)
    }

    pub fn get_or_insert(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        self.insert(name.to_string())
    }

    fn insert(&mut self, name: String) -> usize {
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Entities, relations and a set of triples over them.
///
/// Triples keep their insertion order so that every downstream sampler is
/// reproducible; membership queries go through a hash set.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    triples: Vec<Triple>,
    set: HashSet<Triple>,
}

impl KnowledgeGraph {
    /// Validates ids and drops duplicate triples (first occurrence wins).
    pub fn new(entities: Vocab, relations: Vocab, triples: Vec<Triple>) -> Result<Self> {
        let mut kg = KnowledgeGraph {
            entities,
            relations,
            triples: Vec::with_capacity(triples.len()),
            set: HashSet::with_capacity(triples.len()),
        };
        for t in triples {
            kg.push(t)?;
        }
        Ok(kg)
    }

    /// Adds a triple; returns `false` if it was already present.
    pub fn push(&mut self, t: Triple) -> Result<bool> {
        if t.head >= self.entities.len() || t.tail >= self.entities.len() {
            return Err(Error::Vocabulary(format!(
                "entity id out of range in {t:?} (|E| = {})",
                self.entities.len()
            )));
        }
        if t.rel >= self.relations.len() {
            return Err(Error::Vocabulary(format!(
                "relation id out of range in {t:?} (|R| = {})",
                self.relations.len()
            )));
        }
        if self.set.insert(t) {
            self.triples.push(t);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.set.contains(t)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}
