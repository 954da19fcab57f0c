//! Poisson batches and negative sampling.

use rand::Rng as _;

use super::{KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Tries per negative slot before settling for any `t' != t`.
const REJECTION_CAP: usize = 100;

/// Includes each training triple independently with probability `B / N`
/// (clamped to 1). The realized size varies and may be zero.
pub fn sample_batch(train: &[Triple], expected: usize, rng: &mut Rng) -> Vec<Triple> {
    if train.is_empty() {
        return Vec::new();
    }
    let q = (expected as f64 / train.len() as f64).min(1.0);
    train.iter().copied().filter(|_| rng.random::<f64>() < q).collect()
}

/// Tail-corrupted negatives `(h, r, t')` with `t' != t`, avoiding known triples.
pub fn negative_sample_self_adv(
    triple: Triple,
    n: usize,
    kg: &KnowledgeGraph,
    rng: &mut Rng,
) -> Result<Vec<Triple>> {
    let n_e = kg.num_entities();
    if n_e < 2 {
        return Err(Error::invalid("tail corruption needs at least two entities"));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut fallback = None;
        let mut chosen = None;
        for _ in 0..REJECTION_CAP {
            let t = rng.random_range(0..n_e);
            if t == triple.tail {
                continue;
            }
            let cand = Triple::new(triple.head, triple.rel, t);
            if !kg.contains(&cand) {
                chosen = Some(cand);
                break;
            }
            fallback.get_or_insert(cand);
        }
        let neg = match chosen.or(fallback) {
            Some(c) => c,
            None => {
                // every draw hit t itself; pick deterministically among the rest
                let mut t = rng.random_range(0..n_e - 1);
                if t >= triple.tail {
                    t += 1;
                }
                Triple::new(triple.head, triple.rel, t)
            }
        };
        out.push(neg);
    }
    Ok(out)
}

/// Negatives built from public `(h, r)` pairs and a uniform tail. The output
/// depends only on `public_pairs`, `n`, the entity count and the rng.
pub fn negative_sample_random(
    public_pairs: &[(usize, usize)],
    n: usize,
    kg: &KnowledgeGraph,
    rng: &mut Rng,
) -> Result<Vec<Triple>> {
    if public_pairs.is_empty() {
        return Err(Error::invalid("random negatives need at least one public (head, relation) pair"));
    }
    let n_e = kg.num_entities();
    if n_e == 0 {
        return Err(Error::invalid("graph has no entities"));
    }
    Ok((0..n)
        .map(|_| {
            let (h, r) = public_pairs[rng.random_range(0..public_pairs.len())];
            Triple::new(h, r, rng.random_range(0..n_e))
        })
        .collect())
}
