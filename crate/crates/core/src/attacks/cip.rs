//! Client-initiated passive inference: the adversary subtracts its own upload
//! from the broadcast to estimate its peers' rows on shared entities, then
//! compares how plausible a candidate looks under the peers' rows and under
//! its own.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{guarded_ratio, trace_from, AttackKind, AttackReport, EntityTable, RelationTable};
use crate::error::{Error, Result};
use crate::kg::CandidateSet;
use crate::kge::score::score_rows;
use crate::kge::{EmbeddingStore, ModelKind};
use crate::matrix::Matrix;

/// One round as seen by the adversarial client, over the entities it holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CipRound {
    pub round: usize,
    pub upload: EntityTable,
    pub broadcast: EntityTable,
    pub relations: RelationTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CipObservables {
    pub model: ModelKind,
    pub dim: usize,
    /// advertised number of clients
    pub n_clients: usize,
    pub rounds: Vec<CipRound>,
}

/// Rows that differ bitwise between upload and broadcast.
pub fn cip_detect_overlap(upload: &Matrix, broadcast: &Matrix) -> Result<BTreeSet<usize>> {
    if upload.rows() != broadcast.rows() || upload.cols() != broadcast.cols() {
        return Err(Error::invalid("upload and broadcast differ in shape"));
    }
    Ok((0..upload.rows())
        .filter(|&i| {
            upload
                .row(i)
                .iter()
                .zip(broadcast.row(i))
                .any(|(a, b)| a.to_bits() != b.to_bits())
        })
        .collect())
}

/// `(N·E_b − E_u)/(N − 1)` on overlapping rows; other rows copied from `E_b`.
pub fn cip_extract(broadcast: &Matrix, upload: &Matrix, n_clients: usize) -> Result<Matrix> {
    if n_clients < 2 {
        return Err(Error::invalid("peer extraction needs at least two clients"));
    }
    let overlap = cip_detect_overlap(upload, broadcast)?;
    let n = n_clients as f64;
    let mut out = broadcast.clone();
    for i in overlap {
        for (o, u) in out.row_mut(i).iter_mut().zip(upload.row(i)) {
            *o = (n * *o - u) / (n - 1.0);
        }
    }
    Ok(out)
}

/// Ratio statistic, oriented so that larger means more likely a member:
/// `d_own / d_peer` for translational models (distances `-f`), and
/// `f_peer / f_own` for bilinear ones.
pub fn cip_statistic(model: ModelKind, rel: &[f64], peer: (&[f64], &[f64]), own: (&[f64], &[f64])) -> f64 {
    let f_peer = score_rows(model, peer.0, rel, peer.1);
    let f_own = score_rows(model, own.0, rel, own.1);
    if model.is_translational() {
        guarded_ratio(-f_own, -f_peer)
    } else {
        guarded_ratio(f_peer, f_own)
    }
}

/// Decision `statistic >= τ`.
pub fn cip_infer(model: ModelKind, rel: &[f64], peer: (&[f64], &[f64]), own: (&[f64], &[f64]), tau: f64) -> (bool, f64) {
    let s = cip_statistic(model, rel, peer, own);
    (s >= tau, s)
}

/// Runs the attack on every recorded round. Candidates with an entity
/// outside the detected overlap or a relation the adversary lacks are not
/// evaluable.
pub fn cip_run(obs: &CipObservables, candidates: &CandidateSet) -> Result<AttackReport> {
    let mut traces = Vec::new();
    for r in &obs.rounds {
        if r.upload.ids() != r.broadcast.ids() {
            return Err(Error::invalid(format!("round {}: upload and broadcast cover different entities", r.round)));
        }
        let overlap = cip_detect_overlap(r.upload.rows(), r.broadcast.rows())?;
        let peers = cip_extract(r.broadcast.rows(), r.upload.rows(), obs.n_clients)?;
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
                let h = r.upload.position(c.triple.head).filter(|i| overlap.contains(i))?;
                let t = r.upload.position(c.triple.tail).filter(|i| overlap.contains(i))?;
                let rel = store.relation_view(r.relations.position(c.triple.rel)?);
                Some(cip_statistic(
                    obs.model,
                    &rel,
                    (peers.row(h), peers.row(t)),
                    (r.upload.rows().row(h), r.upload.rows().row(t)),
                ))
            })
            .collect();
        if let Some(t) = trace_from(AttackKind::Cip, r.round, candidates, scored, 0)? {
            traces.push(t);
        }
    }
    AttackReport::new(AttackKind::Cip, traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_detection() {
        let a = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(cip_detect_overlap(&a, &a).unwrap().is_empty());
        let mut b = a.clone();
        b.row_mut(1)[0] = 3.5;
        assert_eq!(cip_detect_overlap(&a, &b).unwrap(), [1].into_iter().collect());
        let mut z = a.clone();
        z.row_mut(2)[1] = -0.0;
        let mut z2 = a.clone();
        z2.row_mut(2)[1] = 0.0;
        assert_eq!(cip_detect_overlap(&z, &z2).unwrap().len(), 1);
        assert!(cip_detect_overlap(&a, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn extraction() {
        let b = Matrix::from_vec(1, 2, vec![2.0, 2.0]);
        let u = Matrix::from_vec(1, 2, vec![1.0, 1.0]);
        assert_eq!(cip_extract(&b, &u, 2).unwrap().data(), &[3.0, 3.0]);
        assert_eq!(cip_extract(&b, &b, 2).unwrap(), b);
        assert!(cip_extract(&b, &u, 1).is_err());
        // three holders averaged: recovers the mean of the two peers
        let (p1, p2, own) = ([4.0, 0.0], [1.0, 3.0], [1.0, 0.0]);
        let avg: Vec<f64> = (0..2).map(|i| (p1[i] + p2[i] + own[i]) / 3.0).collect();
        let e = cip_extract(&Matrix::from_vec(1, 2, avg), &Matrix::from_vec(1, 2, own.to_vec()), 3).unwrap();
        assert!((e.row(0)[0] - 2.5).abs() < 1e-12 && (e.row(0)[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn statistic_is_one_on_identical_rows() {
        let (h, t, r) = ([0.3, -0.2], [0.1, 0.4], [0.5, 0.5]);
        for m in [ModelKind::TransE, ModelKind::DistMult] {
            assert_eq!(cip_statistic(m, &r, (&h, &t), (&h, &t)), 1.0);
        }
        let (yes, _) = cip_infer(ModelKind::TransE, &r, (&h, &t), (&t, &h), f64::NEG_INFINITY);
        assert!(yes);
        // a peer that fits the triple exactly gives +∞
        let s = cip_statistic(ModelKind::TransE, &[1.0], (&[0.0], &[1.0]), (&[0.0], &[3.0]));
        assert_eq!(s, f64::INFINITY);
    }
}
