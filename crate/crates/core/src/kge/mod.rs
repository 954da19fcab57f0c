//! Score functions, losses and analytic gradients for four KGE models.
//!
//! | model | score `f(h, r, t)` | space |
//! |-------|--------------------|-------|
//! | TransE | `-‖h + r - t‖` | real |
//! | RotatE | `-‖h ∘ r - t‖`, `|r_i| = 1` | complex |
//! | DistMult | `Σ h_i r_i t_i` | real |
//! | ComplEx | `Re(Σ h_i r_i conj(t_i))` | complex |
//!
//! Complex vectors with `d` coordinates are stored as `2d` reals laid out
//! `[re_0..re_{d-1}, im_0..im_{d-1}]`. RotatE relations are stored as `d`
//! phase angles so unit modulus holds by construction.

pub mod checkpoint;
pub mod loss;
pub mod score;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::matrix::Matrix;
use crate::rng::Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use loss::{
    batch_entity_gradient, grad_negative, grad_positive, loss_negative, loss_positive, GradBuffer,
    LossParams, NegativeWeighting, SparseGradient,
};
pub use score::score;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    RotatE,
    DistMult,
    ComplEx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::TransE,
        ModelKind::RotatE,
        ModelKind::DistMult,
        ModelKind::ComplEx,
    ];

    pub fn is_complex(self) -> bool {
        matches!(self, ModelKind::RotatE | ModelKind::ComplEx)
    }

    /// Distance-based models score `-distance`.
    pub fn is_translational(self) -> bool {
        matches!(self, ModelKind::TransE | ModelKind::RotatE)
    }

    /// Stored reals per entity row.
    pub fn real_dim(self, dim: usize) -> usize {
        if self.is_complex() {
            2 * dim
        } else {
            dim
        }
    }

    /// Stored reals per relation row (RotatE keeps one phase per coordinate).
    pub fn relation_param_dim(self, dim: usize) -> usize {
        match self {
            ModelKind::RotatE => dim,
            _ => self.real_dim(dim),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            ModelKind::TransE => 0,
            ModelKind::RotatE => 1,
            ModelKind::DistMult => 2,
            ModelKind::ComplEx => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|m| m.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::RotatE => "rotate",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

/// Entity and relation tables of one model instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    pub model: ModelKind,
    pub dim: usize,
    pub entities: Matrix,
    /// RotatE: phase angles; other models: the relation vectors themselves.
    pub relations: Matrix,
}

impl EmbeddingStore {
    pub fn zeros(model: ModelKind, dim: usize, n_entities: usize, n_relations: usize) -> Self {
        EmbeddingStore {
            model,
            dim,
            entities: Matrix::zeros(n_entities, model.real_dim(dim)),
            relations: Matrix::zeros(n_relations, model.relation_param_dim(dim)),
        }
    }

    /// Uniform initialisation in `±6/√d_real`; RotatE phases uniform in `[-π, π)`.
    pub fn random(model: ModelKind, dim: usize, n_entities: usize, n_relations: usize, rng: &mut Rng) -> Self {
        let mut s = Self::zeros(model, dim, n_entities, n_relations);
        let b = init_bound(model, dim);
        for x in s.entities.data_mut() {
            *x = rng.random_range(-b..b);
        }
        for x in s.relations.data_mut() {
            *x = if model == ModelKind::RotatE {
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
            } else {
                rng.random_range(-b..b)
            };
        }
        s
    }

    pub fn real_dim(&self) -> usize {
        self.model.real_dim(self.dim)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.rows()
    }

    pub fn entity(&self, e: usize) -> &[f64] {
        self.entities.row(e)
    }

    /// Relation row as used in the score: RotatE yields `[cos θ.., sin θ..]`.
    pub fn relation_view(&self, r: usize) -> Cow<'_, [f64]> {
        let row = self.relations.row(r);
        if self.model == ModelKind::RotatE {
            Cow::Owned(materialize_phases(row))
        } else {
            Cow::Borrowed(row)
        }
    }

    /// All relation rows in score form (see [`Self::relation_view`]).
    pub fn export_relations(&self) -> Matrix {
        let d = self.real_dim();
        let mut out = Matrix::zeros(self.num_relations(), d);
        for r in 0..self.num_relations() {
            out.set_row(r, &self.relation_view(r));
        }
        out
    }

    pub fn score(&self, t: Triple) -> f64 {
        score::score(self, t)
    }
}

/// Half-width of the uniform initialisation range.
pub fn init_bound(model: ModelKind, dim: usize) -> f64 {
    6.0 / (model.real_dim(dim) as f64).sqrt()
}

pub(crate) fn materialize_phases(phases: &[f64]) -> Vec<f64> {
    let d = phases.len();
    let mut out = vec![0.0; 2 * d];
    for (i, &p) in phases.iter().enumerate() {
        let (s, c) = p.sin_cos();
        out[i] = c;
        out[d + i] = s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn dims_and_init_range() {
        let mut rng = stream(1, &[]);
        for m in ModelKind::ALL {
            let s = EmbeddingStore::random(m, 8, 5, 3, &mut rng);
            assert_eq!(s.entities.cols(), m.real_dim(8));
            let b = init_bound(m, 8);
            assert!(s.entities.data().iter().all(|x| x.abs() <= b));
            assert_eq!(s.export_relations().cols(), m.real_dim(8));
        }
    }

    #[test]
    fn rotate_relations_have_unit_modulus() {
        let mut rng = stream(2, &[]);
        let s = EmbeddingStore::random(ModelKind::RotatE, 6, 2, 4, &mut rng);
        let rel = s.export_relations();
        for r in rel.iter_rows() {
            for i in 0..6 {
                let m = r[i] * r[i] + r[6 + i] * r[6 + i];
                assert!((m - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn parse_names() {
        for m in ModelKind::ALL {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
            assert_eq!(ModelKind::from_tag(m.tag()), Some(m));
        }
        assert!("foo".parse::<ModelKind>().is_err());
    }
}
