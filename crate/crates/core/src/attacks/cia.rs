//! Client-initiated active inference: the adversary negates the tail rows
//! of target triples in its upload and watches how fast the aggregated
//! rows recover. A victim training on the triple pulls the tail back.

use serde::{Deserialize, Serialize};

use super::{guarded_ratio, trace_from, AttackKind, AttackReport, EntityTable, RelationTable};
use crate::error::{Error, Result};
use crate::kg::{CandidateSet, Triple};
use crate::kge::score::score_rows;
use crate::kge::{EmbeddingStore, ModelKind};
use crate::matrix::Matrix;

/// Broadcasts over the adversary's entities at the reversal round and `lag`
/// rounds later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiaRound {
    pub round: usize,
    pub lag: usize,
    /// global ids of the negated rows
    pub targets: Vec<usize>,
    pub reversed: EntityTable,
    pub later: EntityTable,
    pub relations: RelationTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiaObservables {
    pub model: ModelKind,
    pub dim: usize,
    pub n_clients: usize,
    pub rounds: Vec<CiaRound>,
}

/// Negates the `targets` rows. Fails on a row outside the matrix.
pub fn cia_reverse(upload: &Matrix, targets: &[usize]) -> Result<Matrix> {
    let mut out = upload.clone();
    for &t in targets {
        if t >= out.rows() {
            return Err(Error::invalid(format!("target row {t} is not held")));
        }
        for x in out.row_mut(t) {
            *x = -*x;
        }
    }
    Ok(out)
}

/// Implausibility `s = -f`: the distance for translational models.
pub fn implausibility(model: ModelKind, h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    -score_rows(model, h, r, t)
}

/// Decision `s1 / s2 >= τ`; `s2 = 0` gives `+∞`.
pub fn cia_infer(s1: f64, s2: f64, tau: f64) -> (bool, f64) {
    let s = guarded_ratio(s1, s2);
    (s >= tau, s)
}

fn score_in(table: &EntityTable, store: &EmbeddingStore, rel: usize, t: Triple) -> Option<f64> {
    let h = table.get(t.head)?;
    let tl = table.get(t.tail)?;
    Some(implausibility(store.model, h, &store.relation_view(rel), tl))
}

pub fn cia_run(obs: &CiaObservables, candidates: &CandidateSet) -> Result<AttackReport> {
    if !obs.model.is_translational() {
        log::warn!("{}: reversing tail rows barely moves bilinear scores, expect a weak signal", obs.model);
    }
    let mut traces = Vec::new();
    for r in &obs.rounds {
        let store = EmbeddingStore {
            model: obs.model,
            dim: obs.dim,
            entities: Matrix::zeros(0, obs.model.real_dim(obs.dim)),
            relations: r.relations.rows.clone(),
        };
        let scored = candidates
            .candidates
            .iter()
            .map(|c| {
                if r.targets.binary_search(&c.triple.tail).is_err() {
                    return None;
                }
                let rel = r.relations.position(c.triple.rel)?;
                let s1 = score_in(&r.reversed, &store, rel, c.triple)?;
                let s2 = score_in(&r.later, &store, rel, c.triple)?;
                Some(cia_infer(s1, s2, 0.0).1)
            })
            .collect();
        if let Some(t) = trace_from(AttackKind::Cia, r.round, candidates, scored, 0)? {
            traces.push(t);
        }
    }
    AttackReport::new(AttackKind::Cia, traces)
}
