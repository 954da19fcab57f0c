//! Link-prediction metrics (filtered MRR, Hits@N) and attack metrics.
//!
//! Ranking is filtered and pessimistic: candidates that form another known
//! true triple are skipped, and candidates tying the target count as ranked
//! above it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::kge::score::score_rows;
use crate::kge::EmbeddingStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Tail,
    Head,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankResult {
    pub query: Triple,
    pub direction: Direction,
    pub rank: usize,
}

/// Filtered, pessimistic rank of the true entity of `query`.
pub fn rank_entity(
    store: &EmbeddingStore,
    query: Triple,
    direction: Direction,
    filter: &HashSet<Triple>,
) -> RankResult {
    let r = store.relation_view(query.rel);
    let model = store.model;
    let (target, fixed) = match direction {
        Direction::Tail => (query.tail, query.head),
        Direction::Head => (query.head, query.tail),
    };
    let make = |e: usize| match direction {
        Direction::Tail => Triple::new(fixed, query.rel, e),
        Direction::Head => Triple::new(e, query.rel, fixed),
    };
    let score_of = |e: usize| match direction {
        Direction::Tail => score_rows(model, store.entity(fixed), &r, store.entity(e)),
        Direction::Head => score_rows(model, store.entity(e), &r, store.entity(fixed)),
    };
    let s_true = score_of(target);
    let mut rank = 1;
    for e in 0..store.num_entities() {
        if e == target {
            continue;
        }
        let s = score_of(e);
        if s >= s_true && !filter.contains(&make(e)) {
            rank += 1;
        }
    }
    RankResult {
        query,
        direction,
        rank,
    }
}

pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::invalid("MRR of an empty rank list"));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

pub fn hits_at(ranks: &[usize], n: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::invalid("Hits@N of an empty rank list"));
    }
    if n == 0 {
        return Err(Error::invalid("Hits@N needs N >= 1"));
    }
    Ok(ranks.iter().filter(|&&r| r <= n).count() as f64 / ranks.len() as f64)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub queries: usize,
}

/// Ranks every triple in both directions and aggregates.
pub fn evaluate(store: &EmbeddingStore, triples: &[Triple], filter: &HashSet<Triple>) -> Result<LinkMetrics> {
    let mut ranks = Vec::with_capacity(2 * triples.len());
    for &t in triples {
        for d in [Direction::Tail, Direction::Head] {
            ranks.push(rank_entity(store, t, d, filter).rank);
        }
    }
    Ok(LinkMetrics {
        mrr: mrr(&ranks)?,
        hits1: hits_at(&ranks, 1)?,
        hits3: hits_at(&ranks, 3)?,
        hits10: hits_at(&ranks, 10)?,
        queries: ranks.len(),
    })
}

/// One row of the metrics report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub setting: String,
    pub mrr: f64,
    pub hits1: f64,
    pub hits10: f64,
    /// `None` for undefended runs.
    pub epsilon: Option<f64>,
}
