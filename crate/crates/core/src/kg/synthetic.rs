//! Clustered synthetic graphs.
//!
//! Entities are split into `C ≈ n/10` latent classes laid out on a line.
//! Relation `r` has a fixed class offset `s_r` (`+1, -1, +2, -2, ...`) and
//! only links a head in class `c` to a tail in class `c + s_r`. Because the
//! offset identifies the relation, every class pair maps to at most one
//! relation, which is exactly what an auxiliary schema needs. Translational
//! models can represent the offsets, so trained embeddings beat chance by a
//! wide margin.
//!
//! If the clustered rule cannot supply enough distinct triples (tiny graphs),
//! the remainder is drawn uniformly over all `(h, r, t)`.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{AuxSchema, KnowledgeGraph, Triple, Vocab};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// Entities per latent class, on average.
const CLASS_SIZE: usize = 10;

/// A generated graph together with the schema an attacker would know.
#[derive(Clone, Debug)]
pub struct SyntheticKg {
    pub graph: KnowledgeGraph,
    pub aux: AuxSchema,
}

fn relation_offset(r: usize) -> i64 {
    let mag = (r / 2 + 1) as i64;
    if r % 2 == 0 {
        mag
    } else {
        -mag
    }
}

/// Generates a graph with exactly `n_triples` distinct triples.
pub fn generate_synthetic(
    n_entities: usize,
    n_relations: usize,
    n_triples: usize,
    seed: u64,
) -> Result<SyntheticKg> {
    let capacity = (n_entities as u128) * (n_entities as u128) * (n_relations as u128);
    if (n_triples as u128) > capacity {
        return Err(Error::invalid(format!(
            "{n_triples} triples requested but only {capacity} distinct triples exist"
        )));
    }
    let mut rng = rng::stream(seed, &[purpose::GENERATOR]);

    let n_classes = (n_entities / CLASS_SIZE).max(1);
    let mut order: Vec<usize> = (0..n_entities).collect();
    order.shuffle(&mut rng);
    let mut entity_class = vec![0u32; n_entities];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (pos, &e) in order.iter().enumerate() {
        let c = pos % n_classes;
        entity_class[e] = c as u32;
        members[c].push(e);
    }
    for m in &mut members {
        m.sort_unstable();
    }

    // class pairs usable by each relation
    let mut schema: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut rel_pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_relations];
    for (r, pairs) in rel_pairs.iter_mut().enumerate() {
        let s = relation_offset(r);
        for c in 0..n_classes as i64 {
            let ct = c + s;
            if ct >= 0 && ct < n_classes as i64 {
                pairs.push((c as usize, ct as usize));
                schema.insert((c as u32, ct as u32), r);
            }
        }
    }
    let live: Vec<usize> = (0..n_relations).filter(|&r| !rel_pairs[r].is_empty()).collect();

    let mut seen: HashSet<Triple> = HashSet::with_capacity(n_triples);
    let mut triples = Vec::with_capacity(n_triples);
    if !live.is_empty() {
        let mut tries = 0usize;
        let cap = 50 * n_triples.max(1);
        while triples.len() < n_triples && tries < cap {
            tries += 1;
            let r = live[rng.random_range(0..live.len())];
            let (ch, ct) = rel_pairs[r][rng.random_range(0..rel_pairs[r].len())];
            let h = members[ch][rng.random_range(0..members[ch].len())];
            let t = members[ct][rng.random_range(0..members[ct].len())];
            let tr = Triple::new(h, r, t);
            if seen.insert(tr) {
                triples.push(tr);
            }
        }
    }
    fill_uniform(&mut triples, &mut seen, n_entities, n_relations, n_triples, &mut rng);

    let ents = Vocab::from_names((0..n_entities).map(|i| format!("e{i}")))?;
    let rels = Vocab::from_names((0..n_relations).map(|i| format!("r{i}")))?;
    let graph = KnowledgeGraph::new(ents, rels, triples)?;
    let aux = AuxSchema::new(
        schema.into_iter().map(|((a, b), r)| (a, r, b)).collect(),
        entity_class,
    )?;
    Ok(SyntheticKg { graph, aux })
}

fn fill_uniform(
    triples: &mut Vec<Triple>,
    seen: &mut HashSet<Triple>,
    n_e: usize,
    n_r: usize,
    want: usize,
    rng: &mut rng::Rng,
) {
    let mut tries = 0usize;
    while triples.len() < want && tries < 100 * want {
        tries += 1;
        let tr = Triple::new(
            rng.random_range(0..n_e),
            rng.random_range(0..n_r),
            rng.random_range(0..n_e),
        );
        if seen.insert(tr) {
            triples.push(tr);
        }
    }
    // dense corner: enumerate what is left
    'outer: for h in 0..n_e {
        for r in 0..n_r {
            for t in 0..n_e {
                if triples.len() >= want {
                    break 'outer;
                }
                let tr = Triple::new(h, r, t);
                if seen.insert(tr) {
                    triples.push(tr);
                }
            }
        }
    }
}
