//! Triple-membership inference attacks against federated KGE.
//!
//! Each attack consumes only its observables struct, recorded by the hooks
//! in [`record`] with the view its threat model grants:
//!
//! | attack | attacker | sees |
//! |--------|----------|------|
//! | SI  | server | victim uploads over the victim's entities, aux schema, relation count |
//! | CIP | client | own upload, broadcast, client count, own relations |
//! | CIA | client | as CIP, plus it rewrites its own upload |

pub mod cia;
pub mod cip;
pub mod kmeans;
pub mod record;
pub mod si;
pub mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::CandidateSet;
use crate::matrix::Matrix;

pub use cia::{cia_infer, cia_reverse, cia_run, CiaObservables, CiaRound};
pub use cip::{cip_detect_overlap, cip_extract, cip_infer, cip_run, CipObservables, CipRound};
pub use kmeans::{kmeans, KMeans};
pub use record::{AdversaryRecorder, CiaPlan, ServerRecorder};
pub use si::{si_cluster, si_enumerate_relations, si_infer, si_run, RelationCandidates, SiClusters, SiConfig, SiDecision, SiObservables, SiRound};
pub use sweep::{sweep_threshold, Sweep, SweepPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Si,
    Cip,
    Cia,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::Si, AttackKind::Cip, AttackKind::Cia];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Si => "si",
            AttackKind::Cip => "cip",
            AttackKind::Cia => "cia",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown attack {s:?}")))
    }
}

/// Entity rows keyed by global id, kept sorted by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct EntityTable {
    ids: Vec<usize>,
    rows: Matrix,
}

#[derive(Deserialize)]
struct RawTable {
    ids: Vec<usize>,
    rows: Matrix,
}

impl TryFrom<RawTable> for EntityTable {
    type Error = Error;

    fn try_from(t: RawTable) -> Result<Self> {
        EntityTable::new(t.ids, t.rows)
    }
}

impl EntityTable {
    /// Rows are reordered by id. Fails on duplicate ids or a size mismatch.
    pub fn new(ids: Vec<usize>, rows: Matrix) -> Result<Self> {
        if ids.len() != rows.rows() {
            return Err(Error::invalid(format!("{} ids for {} rows", ids.len(), rows.rows())));
        }
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by_key(|&i| ids[i]);
        if order.windows(2).any(|w| ids[w[0]] == ids[w[1]]) {
            return Err(Error::invalid("duplicate entity id in table"));
        }
        let sorted_ids = order.iter().map(|&i| ids[i]).collect();
        Ok(EntityTable {
            ids: sorted_ids,
            rows: rows.select_rows(&order),
        })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: usize) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn get(&self, id: usize) -> Option<&[f64]> {
        self.position(id).map(|i| self.rows.row(i))
    }
}

/// Relation rows in parameter form, keyed by global id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationTable {
    pub ids: Vec<usize>,
    pub rows: Matrix,
}

impl RelationTable {
    pub fn position(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&r| r == id)
    }
}

/// One scored candidate. Non-finite statistics are written as strings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub head: usize,
    pub rel: usize,
    pub tail: usize,
    pub label: bool,
    #[serde(with = "ext_f64")]
    pub statistic: f64,
    pub round: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub best_f1: f64,
    #[serde(with = "ext_f64")]
    pub best_tau: f64,
    pub auc: f64,
}

/// Scores and sweep for one attack round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub attack: AttackKind,
    pub round: usize,
    pub records: Vec<TraceRecord>,
    /// candidates the attacker could not score, excluded from the sweep
    pub not_evaluable: usize,
    /// SI only: candidates whose entities have no class in the aux schema
    pub no_aux: usize,
    pub summary: TraceSummary,
    #[serde(with = "ext_points")]
    pub sweep: Vec<SweepPoint>,
    pub roc: Vec<(f64, f64)>,
}

impl AttackTrace {
    pub fn new(attack: AttackKind, round: usize, records: Vec<TraceRecord>, not_evaluable: usize, no_aux: usize) -> Result<Self> {
        let stats: Vec<f64> = records.iter().map(|r| r.statistic).collect();
        let labels: Vec<bool> = records.iter().map(|r| r.label).collect();
        let s = sweep_threshold(&stats, &labels)?;
        Ok(AttackTrace {
            attack,
            round,
            records,
            not_evaluable,
            no_aux,
            summary: TraceSummary {
                best_f1: s.best_f1,
                best_tau: s.best_tau,
                auc: s.auc,
            },
            sweep: s.points,
            roc: s.roc,
        })
    }

    /// `fpr,tpr` lines with a header.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (f, t) in &self.roc {
            out.push_str(&format!("{f},{t}\n"));
        }
        out
    }
}

/// All rounds of one attack; quality is the best F1 over rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub traces: Vec<AttackTrace>,
    pub best_f1: f64,
    pub best_round: usize,
}

impl AttackReport {
    pub fn new(attack: AttackKind, traces: Vec<AttackTrace>) -> Result<Self> {
        let best = traces
            .iter()
            .fold(None::<&AttackTrace>, |b, t| match b {
                Some(b) if b.summary.best_f1 >= t.summary.best_f1 => Some(b),
                _ => Some(t),
            })
            .ok_or_else(|| Error::invalid(format!("{attack}: no attack round could be evaluated")))?;
        Ok(AttackReport {
            attack,
            best_f1: best.summary.best_f1,
            best_round: best.round,
            traces,
        })
    }
}

/// Builds one trace from `(candidate index, statistic)` results, skipping
/// rounds where the evaluable candidates carry a single label.
pub(crate) fn trace_from(
    attack: AttackKind,
    round: usize,
    candidates: &CandidateSet,
    scored: Vec<Option<f64>>,
    no_aux: usize,
) -> Result<Option<AttackTrace>> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for (c, s) in candidates.candidates.iter().zip(scored) {
        match s {
            Some(statistic) if !statistic.is_nan() => records.push(TraceRecord {
                head: c.triple.head,
                rel: c.triple.rel,
                tail: c.triple.tail,
                label: c.member,
                statistic,
                round,
            }),
            _ => skipped += 1,
        }
    }
    let pos = records.iter().filter(|r| r.label).count();
    if pos == 0 || pos == records.len() {
        log::warn!("{attack} round {round}: evaluable candidates carry a single label, round skipped");
        return Ok(None);
    }
    AttackTrace::new(attack, round, records, skipped, no_aux).map(Some)
}

/// `num / den` with `|den| < 1e-12` mapped to an infinity carrying the sign of `num`.
pub(crate) fn guarded_ratio(num: f64, den: f64) -> f64 {
    if den.abs() < 1e-12 {
        if num < 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Serializes `f64` with `"inf"`, `"-inf"` and `"nan"` for non-finite values.
pub(crate) mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number {other:?}"))),
            },
        }
    }
}

mod ext_points {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::SweepPoint;

    #[derive(Serialize, Deserialize)]
    struct Point {
        #[serde(with = "super::ext_f64")]
        tau: f64,
        precision: f64,
        recall: f64,
        f1: f64,
    }

    pub fn serialize<S: Serializer>(v: &[SweepPoint], s: S) -> Result<S::Ok, S::Error> {
        let pts: Vec<Point> = v
            .iter()
            .map(|p| Point {
                tau: p.tau,
                precision: p.precision,
                recall: p.recall,
                f1: p.f1,
            })
            .collect();
        pts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<SweepPoint>, D::Error> {
        Ok(Vec::<Point>::deserialize(d)?
            .into_iter()
            .map(|p| SweepPoint {
                tau: p.tau,
                precision: p.precision,
                recall: p.recall,
                f1: p.f1,
            })
            .collect())
    }
}
