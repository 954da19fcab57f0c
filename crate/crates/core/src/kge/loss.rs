//! Split positive / negative loss and analytic gradients.
//!
//! With margin offset `m`, the losses are
//!
//! ```text
//! L_p = -log σ(f - m)            L_n = Σ_i p_i · -log σ(m - f_i)
//! ```
//!
//! Bilinear models (DistMult, ComplEx) use `m = γ`. Distance models score
//! `f = -dist`, and with `m = γ` the negative term would saturate at zero
//! gradient for any sensible margin, so they use `m = -γ`: positives are pushed
//! inside distance `γ`, negatives outside it.
//!
//! Self-adversarial weights `p = softmax(adv_temp · f)` are treated as
//! constants when differentiating.

use std::collections::{BTreeMap, BTreeSet};
use std::borrow::Cow;

use super::score::{score_grad_rows, score_rows};
use super::{EmbeddingStore, ModelKind};
use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParams {
    pub gamma: f64,
    pub n_neg: usize,
    pub adv_temp: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            gamma: 10.0,
            n_neg: 256,
            adv_temp: 1.0,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || self.n_neg == 0 || !(self.adv_temp >= 0.0) {
            return Err(Error::Config(format!(
                "loss parameters need gamma > 0, n_neg >= 1, adv_temp >= 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegativeWeighting {
    SelfAdversarial,
    Uniform,
}

/// Offset subtracted from the score inside the positive sigmoid.
pub fn margin_offset(model: ModelKind, gamma: f64) -> f64 {
    if model.is_translational() {
        -gamma
    } else {
        gamma
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-example gradient restricted to the rows it touches.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseGradient {
    pub rows: BTreeMap<usize, Vec<f64>>,
    pub rel_rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseGradient {
    /// L2 norm of all entity rows flattened together.
    pub fn entity_norm(&self) -> f64 {
        self.rows.values().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale_entities(&mut self, c: f64) {
        for v in self.rows.values_mut().flatten() {
            *v *= c;
        }
    }

    /// `self += w · other`, entity and relation rows alike.
    pub fn add_scaled(&mut self, other: &SparseGradient, w: f64) {
        for (dst, src) in [(&mut self.rows, &other.rows), (&mut self.rel_rows, &other.rel_rows)] {
            for (&k, v) in src {
                let row = dst.entry(k).or_insert_with(|| vec![0.0; v.len()]);
                for (a, b) in row.iter_mut().zip(v) {
                    *a += w * b;
                }
            }
        }
    }
}

/// Dense accumulator that remembers which rows were written.
#[derive(Clone, Debug)]
pub struct GradBuffer {
    pub entities: Matrix,
    pub relations: Matrix,
    ent_touched: Vec<bool>,
    rel_touched: Vec<bool>,
    ent_list: Vec<usize>,
    rel_list: Vec<usize>,
}

impl GradBuffer {
    pub fn for_store(store: &EmbeddingStore) -> Self {
        GradBuffer {
            entities: Matrix::zeros(store.entities.rows(), store.entities.cols()),
            relations: Matrix::zeros(store.relations.rows(), store.relations.cols()),
            ent_touched: vec![false; store.entities.rows()],
            rel_touched: vec![false; store.relations.rows()],
            ent_list: Vec::new(),
            rel_list: Vec::new(),
        }
    }

    pub fn touched_entities(&self) -> &[usize] {
        &self.ent_list
    }

    pub fn touched_relations(&self) -> &[usize] {
        &self.rel_list
    }

    /// Zeroes touched rows only.
    pub fn clear(&mut self) {
        for &e in &self.ent_list {
            self.entities.row_mut(e).fill(0.0);
            self.ent_touched[e] = false;
        }
        for &r in &self.rel_list {
            self.relations.row_mut(r).fill(0.0);
            self.rel_touched[r] = false;
        }
        self.ent_list.clear();
        self.rel_list.clear();
    }

    pub fn add_sparse(&mut self, g: &SparseGradient, w: f64) {
        for (&e, v) in &g.rows {
            let row = self.entity_row(e);
            for (a, b) in row.iter_mut().zip(v) {
                *a += w * b;
            }
        }
        for (&r, v) in &g.rel_rows {
            let row = self.relation_row(r);
            for (a, b) in row.iter_mut().zip(v) {
                *a += w * b;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for &e in &self.ent_list {
            self.entities.row_mut(e).iter_mut().for_each(|x| *x *= c);
        }
        for &r in &self.rel_list {
            self.relations.row_mut(r).iter_mut().for_each(|x| *x *= c);
        }
    }
}

pub(crate) trait GradSink {
    fn entity_row(&mut self, e: usize, len: usize) -> &mut [f64];
    fn relation_row(&mut self, r: usize, len: usize) -> &mut [f64];
}

impl GradSink for SparseGradient {
    fn entity_row(&mut self, e: usize, len: usize) -> &mut [f64] {
        self.rows.entry(e).or_insert_with(|| vec![0.0; len])
    }

    fn relation_row(&mut self, r: usize, len: usize) -> &mut [f64] {
        self.rel_rows.entry(r).or_insert_with(|| vec![0.0; len])
    }
}

impl GradBuffer {
    fn entity_row(&mut self, e: usize) -> &mut [f64] {
        if !self.ent_touched[e] {
            self.ent_touched[e] = true;
            self.ent_list.push(e);
        }
        self.entities.row_mut(e)
    }

    fn relation_row(&mut self, r: usize) -> &mut [f64] {
        if !self.rel_touched[r] {
            self.rel_touched[r] = true;
            self.rel_list.push(r);
        }
        self.relations.row_mut(r)
    }
}

impl GradSink for GradBuffer {
    fn entity_row(&mut self, e: usize, _len: usize) -> &mut [f64] {
        GradBuffer::entity_row(self, e)
    }

    fn relation_row(&mut self, r: usize, _len: usize) -> &mut [f64] {
        GradBuffer::relation_row(self, r)
    }
}

/// Adds `coef · ∂f/∂θ` for one triple into `sink`.
fn add_score_gradient(store: &EmbeddingStore, t: Triple, coef: f64, sink: &mut impl GradSink) {
    add_score_gradient_with(store, t, &store.relation_view(t.rel), coef, sink);
}

/// As [`add_score_gradient`] with the relation already in score form.
fn add_score_gradient_with(store: &EmbeddingStore, t: Triple, r: &[f64], coef: f64, sink: &mut impl GradSink) {
    let dr = store.real_dim();
    let h = store.entity(t.head);
    let tl = store.entity(t.tail);
    let mut gh = vec![0.0; dr];
    let mut gr = vec![0.0; dr];
    let mut gt = vec![0.0; dr];
    score_grad_rows(store.model, h, r, tl, &mut gh, &mut gr, &mut gt);
    for (a, b) in sink.entity_row(t.head, dr).iter_mut().zip(&gh) {
        *a += coef * b;
    }
    for (a, b) in sink.entity_row(t.tail, dr).iter_mut().zip(&gt) {
        *a += coef * b;
    }
    let rp = store.relations.cols();
    if store.model == ModelKind::RotatE {
        // chain rule through (cos θ, sin θ), reusing the view instead of sin_cos
        gr = (0..rp).map(|i| -r[rp + i] * gr[i] + r[i] * gr[rp + i]).collect();
    }
    for (a, b) in sink.relation_row(t.rel, rp).iter_mut().zip(&gr) {
        *a += coef * b;
    }
}

fn raw_score(store: &EmbeddingStore, t: Triple) -> f64 {
    score_rows(
        store.model,
        store.entity(t.head),
        &store.relation_view(t.rel),
        store.entity(t.tail),
    )
}

pub fn loss_positive(store: &EmbeddingStore, t: Triple, params: &LossParams) -> f64 {
    let m = margin_offset(store.model, params.gamma);
    softplus(m - raw_score(store, t))
}

/// Weights over the negatives; they sum to one.
pub fn negative_weights(scores: &[f64], params: &LossParams, mode: NegativeWeighting) -> Vec<f64> {
    let n = scores.len() as f64;
    match mode {
        NegativeWeighting::Uniform => vec![1.0 / n; scores.len()],
        NegativeWeighting::SelfAdversarial => {
            let z: Vec<f64> = scores.iter().map(|s| params.adv_temp * s).collect();
            let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|x| (x - mx).exp()).collect();
            let tot: f64 = e.iter().sum();
            e.into_iter().map(|x| x / tot).collect()
        }
    }
}

pub fn loss_negative(
    store: &EmbeddingStore,
    negatives: &[Triple],
    params: &LossParams,
    mode: NegativeWeighting,
) -> f64 {
    let m = margin_offset(store.model, params.gamma);
    let scores: Vec<f64> = negatives.iter().map(|&t| raw_score(store, t)).collect();
    let p = negative_weights(&scores, params, mode);
    scores.iter().zip(&p).map(|(f, w)| w * softplus(f - m)).sum()
}

/// Adds `weight · ∇L_p` into `sink` and returns `L_p`.
pub(crate) fn accumulate_positive(
    store: &EmbeddingStore,
    t: Triple,
    params: &LossParams,
    weight: f64,
    sink: &mut impl GradSink,
) -> f64 {
    let m = margin_offset(store.model, params.gamma);
    let f = raw_score(store, t);
    add_score_gradient(store, t, -weight * sigmoid(m - f), sink);
    softplus(m - f)
}

/// Adds `weight · ∇L_n` into `sink` (weights frozen) and returns `L_n`.
pub(crate) fn accumulate_negative(
    store: &EmbeddingStore,
    negatives: &[Triple],
    params: &LossParams,
    mode: NegativeWeighting,
    weight: f64,
    sink: &mut impl GradSink,
) -> f64 {
    let m = margin_offset(store.model, params.gamma);
    // negatives usually share one relation; convert each relation once
    let mut views: BTreeMap<usize, Cow<'_, [f64]>> = BTreeMap::new();
    for t in negatives {
        views.entry(t.rel).or_insert_with(|| store.relation_view(t.rel));
    }
    let scores: Vec<f64> = negatives
        .iter()
        .map(|&t| score_rows(store.model, store.entity(t.head), &views[&t.rel], store.entity(t.tail)))
        .collect();
    let p = negative_weights(&scores, params, mode);
    let mut loss = 0.0;
    for ((&t, &f), &w) in negatives.iter().zip(&scores).zip(&p) {
        add_score_gradient_with(store, t, &views[&t.rel], weight * w * sigmoid(f - m), sink);
        loss += w * softplus(f - m);
    }
    loss
}

pub fn grad_positive(store: &EmbeddingStore, t: Triple, params: &LossParams) -> SparseGradient {
    let mut g = SparseGradient::default();
    accumulate_positive(store, t, params, 1.0, &mut g);
    g
}

pub fn grad_negative(
    store: &EmbeddingStore,
    negatives: &[Triple],
    params: &LossParams,
    mode: NegativeWeighting,
) -> SparseGradient {
    let mut g = SparseGradient::default();
    accumulate_negative(store, negatives, params, mode, 1.0, &mut g);
    g
}

/// Entity part of every per-example positive gradient, plus the touched rows.
pub fn batch_entity_gradient(
    store: &EmbeddingStore,
    batch: &[Triple],
    params: &LossParams,
) -> (Vec<SparseGradient>, BTreeSet<usize>) {
    let mut active = BTreeSet::new();
    let per = batch
        .iter()
        .map(|&t| {
            let mut g = grad_positive(store, t, params);
            g.rel_rows.clear();
            active.extend(g.rows.keys().copied());
            g
        })
        .collect();
    (per, active)
}
