//! Federated partitioning with controlled entity overlap.
//!
//! 1. Every entity gets a primary client. A seeded `overlap_frac` share of the
//!    entities is additionally handed to a random set of other clients, for
//!    `2..=m` holders in total.
//! 2. A triple is eligible for a client when the client holds both endpoints.
//!    Eligible triples go to exactly one eligible client (seeded choice), so
//!    overlapping entities never carry identical triple sets.
//! 3. Triples nobody can take stay in [`Partition::unassigned`]; the harness
//!    uses them as the public pool.
//! 4. Each client's triples are shuffled and split train/valid/test.

use std::collections::{BTreeSet, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{KnowledgeGraph, Triple, Vocab};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// One client's private graph, in local ids.
#[derive(Clone, Debug)]
pub struct ClientDataset {
    pub id: usize,
    pub graph: KnowledgeGraph,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    /// local entity id → global entity id
    pub entity_global: Vec<usize>,
    /// local relation id → global relation id
    pub relation_global: Vec<usize>,
    entity_local: HashMap<usize, usize>,
    relation_local: HashMap<usize, usize>,
}

impl ClientDataset {
    /// Assembles a client from global ids. Entities are listed in the given
    /// order; relations are those used by `triples`, in ascending global id.
    pub fn from_global(
        id: usize,
        global: &KnowledgeGraph,
        entities: &[usize],
        triples: &[Triple],
        split: (f64, f64, f64),
        seed: u64,
    ) -> Result<Self> {
        let entity_local: HashMap<usize, usize> =
            entities.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let rels: BTreeSet<usize> = triples.iter().map(|t| t.rel).collect();
        let relation_global: Vec<usize> = rels.into_iter().collect();
        let relation_local: HashMap<usize, usize> =
            relation_global.iter().enumerate().map(|(l, &g)| (g, l)).collect();

        let name = |v: &Vocab, g: usize| v.name(g).map(str::to_string).unwrap_or_else(|| g.to_string());
        let ents = Vocab::from_names(entities.iter().map(|&g| name(global.entities(), g)))?;
        let relv = Vocab::from_names(relation_global.iter().map(|&g| name(global.relations(), g)))?;

        let mut local = Vec::with_capacity(triples.len());
        for t in triples {
            let h = entity_local.get(&t.head);
            let tl = entity_local.get(&t.tail);
            match (h, tl) {
                (Some(&h), Some(&tl)) => local.push(Triple::new(h, relation_local[&t.rel], tl)),
                _ => {
                    return Err(Error::Partition(format!(
                        "client {id}: triple {t:?} has an endpoint outside its entity set"
                    )))
                }
            }
        }
        let graph = KnowledgeGraph::new(ents, relv, local.clone())?;
        let mut shuffled = graph.triples().to_vec();
        shuffled.shuffle(&mut rng::stream(seed, &[purpose::SPLIT, id as u64]));
        let n = shuffled.len();
        let n_train = (split.0 * n as f64).round() as usize;
        let n_valid = ((split.1 * n as f64).round() as usize).min(n - n_train.min(n));
        let n_train = n_train.min(n);
        if n_train == 0 {
            return Err(Error::Partition(format!(
                "client {id} received no training triples; try another seed or a lower client count"
            )));
        }
        let test = shuffled.split_off(n_train + n_valid);
        let valid = shuffled.split_off(n_train);
        Ok(ClientDataset {
            id,
            graph,
            train: shuffled,
            valid,
            test,
            entity_global: entities.to_vec(),
            relation_global,
            entity_local,
            relation_local,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entity_global.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_global.len()
    }

    pub fn local_entity(&self, global: usize) -> Option<usize> {
        self.entity_local.get(&global).copied()
    }

    pub fn local_relation(&self, global: usize) -> Option<usize> {
        self.relation_local.get(&global).copied()
    }

    pub fn to_global(&self, t: Triple) -> Triple {
        Triple::new(
            self.entity_global[t.head],
            self.relation_global[t.rel],
            self.entity_global[t.tail],
        )
    }

    /// `None` if any id is unknown to this client.
    pub fn to_local(&self, t: Triple) -> Option<Triple> {
        Some(Triple::new(
            self.local_entity(t.head)?,
            self.local_relation(t.rel)?,
            self.local_entity(t.tail)?,
        ))
    }
}

/// Output of [`partition_federated`].
#[derive(Clone, Debug)]
pub struct Partition {
    pub clients: Vec<ClientDataset>,
    /// global entity id → sorted client ids holding it
    pub holders: Vec<Vec<usize>>,
    /// entities held by two or more clients
    pub overlapping: BTreeSet<usize>,
    /// global triples that no client received
    pub unassigned: Vec<Triple>,
}

/// Serializable summary written into a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub clients: Vec<ClientManifest>,
    pub overlapping: Vec<usize>,
    pub unassigned: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientManifest {
    pub id: usize,
    pub entities: Vec<usize>,
    pub relations: Vec<usize>,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Partition {
    pub fn manifest(&self) -> PartitionManifest {
        PartitionManifest {
            clients: self
                .clients
                .iter()
                .map(|c| ClientManifest {
                    id: c.id,
                    entities: c.entity_global.clone(),
                    relations: c.relation_global.clone(),
                    train: c.train.len(),
                    valid: c.valid.len(),
                    test: c.test.len(),
                })
                .collect(),
            overlapping: self.overlapping.iter().copied().collect(),
            unassigned: self.unassigned.len(),
        }
    }
}

/// Moves a seeded `frac` share of the triples into a public pool. The private
/// graph keeps the full vocabularies.
pub fn split_public(kg: &KnowledgeGraph, frac: f64, seed: u64) -> Result<(KnowledgeGraph, Vec<Triple>)> {
    check_fraction(frac, "public fraction")?;
    let mut order: Vec<usize> = (0..kg.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[purpose::PARTITION, 1]));
    let n_pub = (frac * kg.len() as f64).round() as usize;
    let mut is_pub = vec![false; kg.len()];
    for &i in &order[..n_pub] {
        is_pub[i] = true;
    }
    let (mut public, mut private) = (Vec::new(), Vec::new());
    for (i, &t) in kg.triples().iter().enumerate() {
        if is_pub[i] {
            public.push(t);
        } else {
            private.push(t);
        }
    }
    let g = KnowledgeGraph::new(kg.entities().clone(), kg.relations().clone(), private)?;
    Ok((g, public))
}

fn check_fraction(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must lie in [0, 1], got {x}")))
    }
}

/// Splits `kg` across `m` clients.
pub fn partition_federated(
    kg: &KnowledgeGraph,
    m: usize,
    overlap_frac: f64,
    split: (f64, f64, f64),
    seed: u64,
) -> Result<Partition> {
    if m < 2 {
        return Err(Error::invalid("a federation needs at least two clients"));
    }
    check_fraction(overlap_frac, "overlap_frac")?;
    for (x, w) in [(split.0, "train"), (split.1, "valid"), (split.2, "test")] {
        check_fraction(x, w)?;
    }
    if (split.0 + split.1 + split.2 - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions must sum to 1"));
    }
    let mut rng = rng::stream(seed, &[purpose::PARTITION]);
    let n = kg.num_entities();

    let mut holders: Vec<Vec<usize>> = (0..n).map(|_| vec![rng.random_range(0..m)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_shared = (overlap_frac * n as f64).round() as usize;
    let mut overlapping = BTreeSet::new();
    for &e in order.iter().take(n_shared) {
        let k = rng.random_range(2..=m);
        let primary = holders[e][0];
        let mut others: Vec<usize> = (0..m).filter(|&c| c != primary).collect();
        others.shuffle(&mut rng);
        holders[e].extend(others.into_iter().take(k - 1));
        holders[e].sort_unstable();
        overlapping.insert(e);
    }

    let mut per_client: Vec<Vec<Triple>> = vec![Vec::new(); m];
    let mut unassigned = Vec::new();
    for t in kg.triples() {
        let eligible: Vec<usize> = holders[t.head]
            .iter()
            .copied()
            .filter(|c| holders[t.tail].contains(c))
            .collect();
        match eligible.choose(&mut rng) {
            Some(&c) => per_client[c].push(*t),
            None => unassigned.push(*t),
        }
    }

    let mut clients = Vec::with_capacity(m);
    for (c, triples) in per_client.iter().enumerate() {
        let ents: Vec<usize> = (0..n).filter(|&e| holders[e].contains(&c)).collect();
        clients.push(ClientDataset::from_global(c, kg, &ents, triples, split, seed)?);
    }
    Ok(Partition {
        clients,
        holders,
        overlapping,
        unassigned,
    })
}
