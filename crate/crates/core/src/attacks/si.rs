//! Server-initiated inference: relation embeddings are recovered from pairs
//! of victim entity rows, clustered, and matched against the aux schema.

use std::collections::BTreeSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, nearest};
use super::{trace_from, AttackKind, AttackReport, EntityTable};
use crate::error::{Error, Result};
use crate::kg::{AuxSchema, CandidateSet, Triple};
use crate::kge::ModelKind;
use crate::matrix::{dist, Matrix};
use crate::rng::{self, purpose, Rng};

/// Victim entity rows from one upload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiRound {
    pub round: usize,
    pub victim: EntityTable,
}

/// What the server knows: victim uploads over the victim's entity set, the
/// aux schema and the relation count. No relation rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiObservables {
    pub model: ModelKind,
    pub n_relations: usize,
    pub aux: AuxSchema,
    pub rounds: Vec<SiRound>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiConfig {
    /// maximum number of ordered entity pairs to cluster
    pub cap: Option<usize>,
    /// clusters with radius strictly below this quantile are concentrated
    pub quantile: f64,
    pub seed: u64,
}

impl Default for SiConfig {
    fn default() -> Self {
        SiConfig {
            cap: Some(5000),
            quantile: 0.5,
            seed: 0,
        }
    }
}

/// Relation estimates for ordered entity pairs (row indices).
#[derive(Clone, Debug, PartialEq)]
pub struct RelationCandidates {
    pub pairs: Vec<(usize, usize)>,
    pub vectors: Matrix,
}

fn require_translational(model: ModelKind) -> Result<()> {
    if model.is_translational() {
        Ok(())
    } else {
        Err(Error::UnsupportedModel(format!(
            "server-initiated inference needs a translational model, got {model}"
        )))
    }
}

/// Relation implied by a head and tail: `t - h` for TransE, `t ⊘ h` for
/// RotatE (falling back to `t - h` when some `|h_i| <= 1e-8`).
pub fn relation_estimate(model: ModelKind, h: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    require_translational(model)?;
    let diff = || h.iter().zip(t).map(|(a, b)| b - a).collect();
    if model == ModelKind::TransE {
        return Ok(diff());
    }
    let d = h.len() / 2;
    let (hr, hi) = h.split_at(d);
    if hr.iter().zip(hi).any(|(a, b)| a.hypot(*b) <= 1e-8) {
        return Ok(diff());
    }
    let (tr, ti) = t.split_at(d);
    let mut out = vec![0.0; 2 * d];
    for i in 0..d {
        let m = hr[i] * hr[i] + hi[i] * hi[i];
        out[i] = (tr[i] * hr[i] + ti[i] * hi[i]) / m;
        out[d + i] = (ti[i] * hr[i] - tr[i] * hi[i]) / m;
    }
    Ok(out)
}

/// Every ordered pair `j != k` of rows, or a uniform sample of `cap` pairs.
pub fn si_enumerate_relations(
    rows: &Matrix,
    model: ModelKind,
    cap: Option<usize>,
    rng: &mut Rng,
) -> Result<RelationCandidates> {
    require_translational(model)?;
    let n = rows.rows();
    if n < 2 {
        return Err(Error::invalid("need at least two victim entities"));
    }
    let total = n * (n - 1);
    let pick = |i: usize| {
        let j = i / (n - 1);
        let k = i % (n - 1);
        (j, if k >= j { k + 1 } else { k })
    };
    let pairs: Vec<(usize, usize)> = match cap {
        Some(c) if total > c => {
            let mut idx = index::sample(rng, total, c).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(pick).collect()
        }
        _ => (0..total).map(pick).collect(),
    };
    let mut vectors = Matrix::zeros(pairs.len(), rows.cols());
    for (i, &(j, k)) in pairs.iter().enumerate() {
        vectors.set_row(i, &relation_estimate(model, rows.row(j), rows.row(k))?);
    }
    Ok(RelationCandidates { pairs, vectors })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiClusters {
    pub centers: Matrix,
    /// mean member distance, `+∞` for empty clusters
    pub radii: Vec<f64>,
    pub concentrated: BTreeSet<usize>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b {
        a
    } else {
        a + (b - a) * (pos - lo as f64)
    }
}

/// k-means with `k = 2 n_r`; clusters whose radius is strictly below the
/// `quantile` of all radii are concentrated.
pub fn si_cluster(vectors: &Matrix, n_relations: usize, quantile_q: f64, seed: u64) -> Result<SiClusters> {
    let k = 2 * n_relations;
    if k == 0 || vectors.rows() < k {
        return Err(Error::invalid(format!(
            "{} relation candidates for {k} clusters",
            vectors.rows()
        )));
    }
    if !(0.0..=1.0).contains(&quantile_q) {
        return Err(Error::invalid("quantile must lie in [0, 1]"));
    }
    let mut rng = rng::stream(seed, &[purpose::ATTACK, 0]);
    let mut km = kmeans(vectors, k, 100, &mut rng);
    if km.sizes.contains(&0) {
        let mut rng = rng::stream(seed, &[purpose::ATTACK, 1]);
        km = kmeans(vectors, k, 100, &mut rng);
    }
    let mut radii = vec![0.0; k];
    for (i, &c) in km.assign.iter().enumerate() {
        radii[c] += dist(vectors.row(i), km.centers.row(c));
    }
    for c in 0..k {
        radii[c] = if km.sizes[c] == 0 {
            f64::INFINITY
        } else {
            radii[c] / km.sizes[c] as f64
        };
    }
    let mut sorted = radii.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = quantile(&sorted, quantile_q);
    let concentrated = (0..k).filter(|&c| radii[c] < cut).collect();
    Ok(SiClusters {
        centers: km.centers,
        radii,
        concentrated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiDecision {
    pub exist: bool,
    /// `radius / distance` when the estimate falls in a concentrated cluster
    /// and the aux schema names the candidate's relation, else 0
    pub statistic: f64,
    pub no_aux: bool,
}

/// Decides one candidate. Entities outside the victim table are an error.
pub fn si_infer(
    candidate: Triple,
    victim: &EntityTable,
    model: ModelKind,
    clusters: &SiClusters,
    aux: &AuxSchema,
) -> Result<SiDecision> {
    let (h, t) = match (victim.get(candidate.head), victim.get(candidate.tail)) {
        (Some(h), Some(t)) => (h, t),
        _ => return Err(Error::invalid("candidate entity outside the victim's entity set")),
    };
    let v = relation_estimate(model, h, t)?;
    let (c, d2) = nearest(&clusters.centers, &v);
    let d = d2.sqrt();
    let inside = clusters.concentrated.contains(&c) && d <= clusters.radii[c];
    let has_class = aux.entity_class.get(candidate.head).is_some() && aux.entity_class.get(candidate.tail).is_some();
    let matches = aux.lookup_entities(candidate.head, candidate.tail) == Some(candidate.rel);
    let statistic = if clusters.concentrated.contains(&c) && matches {
        if d == 0.0 {
            f64::INFINITY
        } else {
            clusters.radii[c] / d
        }
    } else {
        0.0
    };
    Ok(SiDecision {
        exist: inside && matches,
        statistic,
        no_aux: !has_class,
    })
}

/// Runs the attack on every recorded round.
pub fn si_run(obs: &SiObservables, candidates: &CandidateSet, cfg: &SiConfig) -> Result<AttackReport> {
    require_translational(obs.model)?;
    let mut traces = Vec::new();
    for r in &obs.rounds {
        let mut rng = rng::stream(cfg.seed, &[purpose::ATTACK, 2, r.round as u64]);
        let cands = si_enumerate_relations(r.victim.rows(), obs.model, cfg.cap, &mut rng)?;
        let clusters = si_cluster(&cands.vectors, obs.n_relations, cfg.quantile, cfg.seed ^ r.round as u64)?;
        let mut no_aux = 0;
        let mut scored = Vec::with_capacity(candidates.len());
        for c in &candidates.candidates {
            if r.victim.get(c.triple.head).is_none() || r.victim.get(c.triple.tail).is_none() {
                scored.push(None);
                continue;
            }
            let d = si_infer(c.triple, &r.victim, obs.model, &clusters, &obs.aux)?;
            no_aux += usize::from(d.no_aux);
            scored.push(Some(d.statistic));
        }
        if let Some(t) = trace_from(AttackKind::Si, r.round, candidates, scored, no_aux)? {
            traces.push(t);
        }
    }
    AttackReport::new(AttackKind::Si, traces)
}
