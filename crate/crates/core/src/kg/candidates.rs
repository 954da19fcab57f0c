//! Labelled candidate triples and the attacker's auxiliary schema.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ClientDataset, Triple};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// A candidate triple in global ids and whether the victim trains on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub triple: Triple,
    pub member: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn members(&self) -> usize {
        self.candidates.iter().filter(|c| c.member).count()
    }
}

/// Members from the victim's training split, non-members drawn over its
/// vocabularies and absent from all of its triples.
pub fn build_candidate_set(
    victim: &ClientDataset,
    n_members: usize,
    n_nonmembers: usize,
    seed: u64,
) -> Result<CandidateSet> {
    let all: BTreeSet<usize> = victim.entity_global.iter().copied().collect();
    build_candidate_set_within(victim, &all, n_members, n_nonmembers, seed)
}

/// Same as [`build_candidate_set`] but both endpoints of every candidate must
/// lie in `allowed` (global ids). Used when the attacker only knows part of
/// the victim's entities.
pub fn build_candidate_set_within(
    victim: &ClientDataset,
    allowed: &BTreeSet<usize>,
    n_members: usize,
    n_nonmembers: usize,
    seed: u64,
) -> Result<CandidateSet> {
    let mut rng = rng::stream(seed, &[purpose::CANDIDATES, victim.id as u64]);
    let pool: Vec<Triple> = victim
        .train
        .iter()
        .map(|&t| victim.to_global(t))
        .filter(|t| allowed.contains(&t.head) && allowed.contains(&t.tail))
        .collect();
    if n_members > pool.len() {
        return Err(Error::invalid(format!(
            "{n_members} members requested but only {} eligible training triples",
            pool.len()
        )));
    }
    let mut picks = index::sample(&mut rng, pool.len(), n_members).into_vec();
    picks.sort_unstable();
    let mut out: Vec<Candidate> = picks
        .into_iter()
        .map(|i| Candidate {
            triple: pool[i],
            member: true,
        })
        .collect();

    let ents: Vec<usize> = victim
        .entity_global
        .iter()
        .copied()
        .filter(|e| allowed.contains(e))
        .collect();
    let rels = &victim.relation_global;
    if n_nonmembers > 0 && (ents.is_empty() || rels.is_empty()) {
        return Err(Error::Generation("victim vocabulary is empty".into()));
    }
    let known: HashSet<Triple> = victim.graph.triples().iter().map(|&t| victim.to_global(t)).collect();
    let mut chosen = HashSet::new();
    let mut tries = 0usize;
    while chosen.len() < n_nonmembers {
        if tries >= 1000 * n_nonmembers {
            return Err(Error::Generation(format!(
                "only {} of {n_nonmembers} distinct non-members found",
                chosen.len()
            )));
        }
        tries += 1;
        let t = Triple::new(
            ents[rng.random_range(0..ents.len())],
            rels[rng.random_range(0..rels.len())],
            ents[rng.random_range(0..ents.len())],
        );
        if !known.contains(&t) && chosen.insert(t) {
            out.push(Candidate {
                triple: t,
                member: false,
            });
        }
    }
    Ok(CandidateSet { candidates: out })
}

/// Type-level knowledge of the domain: which relation links which classes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxSchema {
    /// `(head class, relation, tail class)`
    pub entries: Vec<(u32, usize, u32)>,
    /// global entity id → class tag
    pub entity_class: Vec<u32>,
    #[serde(skip)]
    lookup: BTreeMap<(u32, u32), usize>,
}

impl AuxSchema {
    /// Fails if a class pair maps to two different relations.
    pub fn new(entries: Vec<(u32, usize, u32)>, entity_class: Vec<u32>) -> Result<Self> {
        let mut lookup = BTreeMap::new();
        for &(a, r, b) in &entries {
            if let Some(prev) = lookup.insert((a, b), r) {
                if prev != r {
                    return Err(Error::invalid(format!(
                        "class pair ({a}, {b}) maps to relations {prev} and {r}"
                    )));
                }
            }
        }
        Ok(AuxSchema {
            entries,
            entity_class,
            lookup,
        })
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindexed(self) -> Result<Self> {
        AuxSchema::new(self.entries, self.entity_class)
    }

    pub fn lookup_classes(&self, head_class: u32, tail_class: u32) -> Option<usize> {
        self.lookup.get(&(head_class, tail_class)).copied()
    }

    /// Relation implied by the classes of two global entities, if any.
    pub fn lookup_entities(&self, head: usize, tail: usize) -> Option<usize> {
        let a = *self.entity_class.get(head)?;
        let b = *self.entity_class.get(tail)?;
        self.lookup_classes(a, b)
    }
}
