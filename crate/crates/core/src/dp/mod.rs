//! Differentially private local training.
//!
//! One private iteration:
//!
//! 1. Poisson batch with rate `B / N`.
//! 2. Per-example positive gradients, clipped globally to `C1` and then per
//!    row to `C2`.
//! 3. [`private_selection`] picks the top-k rows of the summed gradient, with
//!    `k` kept in `[B, 2B]`, or refuses (`⊥`) when the gap is not stable.
//! 4. On release, selected rows get Gaussian noise `σ·C1` and are divided by
//!    the expected batch size `B`.
//! 5. Negatives come from public `(h, r)` pairs with uniform weights; their
//!    gradient does not touch private data and is applied unperturbed.
//! 6. Relations never leave the client and are updated with raw gradients.
//!
//! The step is computed without being applied ([`DpStep`]), so the caller
//! can check the privacy budget before committing it.

mod selection;

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::accountant::PrivacyEvent;
use crate::error::{Error, Result};
use crate::kg::{negative_sample_random, sample_batch, KnowledgeGraph, Triple};
use crate::kge::loss::accumulate_negative;
use crate::kge::{grad_positive, EmbeddingStore, LossParams, NegativeWeighting, SparseGradient};
use crate::rng::Rng;

pub use selection::{private_selection, release_test, SelectionOutcome};

/// Noise, clipping and budget parameters of the private trainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpConfig {
    /// Gaussian noise multiplier on released gradient rows.
    pub sigma: f64,
    /// Gumbel scale multiplier of the top-k selection.
    pub sigma_r: f64,
    /// Noise multiplier of the release test.
    pub sigma_p: f64,
    /// Failure probability of the release test.
    pub delta_t: f64,
    /// Per-example global clip.
    pub c1: f64,
    /// Per-row clip.
    pub c2: f64,
    /// Noise decay factor.
    pub eta: f64,
    /// Validation MRR gain below which the noise decays.
    pub delta_mrr: f64,
    pub epsilon_budget: f64,
    pub delta: f64,
    /// Rounds between validation checks.
    pub validation_interval: usize,
    pub adaptive: bool,
    /// SGD step size of the private path.
    pub lr: f64,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            sigma: 1.0,
            sigma_r: 1.0,
            sigma_p: 1.0,
            delta_t: 1e-6,
            c1: 1.2,
            c2: 0.8,
            eta: 0.95,
            delta_mrr: 0.001,
            epsilon_budget: 16.0,
            delta: 1e-5,
            validation_interval: 5,
            adaptive: true,
            lr: 0.1,
        }
    }
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("sigma", self.sigma),
            ("sigma_r", self.sigma_r),
            ("sigma_p", self.sigma_p),
            ("c1", self.c1),
            ("c2", self.c2),
        ];
        for (n, x) in pos {
            if !(x > 0.0) {
                return Err(Error::Config(format!("{n} must be positive, got {x}")));
            }
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        for (n, x) in [("delta_t", self.delta_t), ("delta", self.delta)] {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::Config(format!("{n} must lie in (0, 1), got {x}")));
            }
        }
        if !(self.lr >= 0.0) {
            return Err(Error::Config(format!("lr must be >= 0, got {}", self.lr)));
        }
        if self.validation_interval == 0 {
            return Err(Error::Config("validation_interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// Scales the entity part so its flattened norm is at most `c1`.
pub fn clip_global(g: &SparseGradient, c1: f64) -> SparseGradient {
    let mut out = g.clone();
    let n = g.entity_norm();
    if n > c1 {
        out.scale_entities(c1 / n);
    }
    out
}

/// Clips each entity row independently to norm `c2`.
pub fn clip_rows(g: &SparseGradient, c2: f64) -> SparseGradient {
    let mut out = g.clone();
    for row in out.rows.values_mut() {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > c2 {
            let s = c2 / n;
            row.iter_mut().for_each(|x| *x *= s);
        }
    }
    out
}

/// `(Σ rows + N(0, σ²C1²)) / B` on the selected rows; absent rows count as zero.
pub fn noisy_gradient(
    sum_rows: &BTreeMap<usize, Vec<f64>>,
    selected: &[usize],
    width: usize,
    expected_batch: f64,
    sigma: f64,
    c1: f64,
    rng: &mut Rng,
) -> BTreeMap<usize, Vec<f64>> {
    let mut out = BTreeMap::new();
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma * c1).expect("positive std"));
    for &e in selected {
        let mut row = sum_rows.get(&e).cloned().unwrap_or_else(|| vec![0.0; width]);
        for x in &mut row {
            if let Some(n) = &noise {
                *x += n.sample(rng);
            }
            *x /= expected_batch;
        }
        out.insert(e, row);
    }
    out
}

/// `η·σ` when the validation gain falls short of `Δ`.
pub fn adaptive_sigma_update(sigma: f64, mrr_t: f64, mrr_prev: f64, cfg: &DpConfig) -> f64 {
    if mrr_t - mrr_prev < cfg.delta_mrr {
        cfg.eta * sigma
    } else {
        sigma
    }
}

/// A computed but not yet applied private iteration.
#[derive(Clone, Debug)]
pub struct DpStep {
    pub batch_size: usize,
    pub selection: SelectionOutcome,
    /// Noisy positive rows (empty on `⊥`).
    pub positive: BTreeMap<usize, Vec<f64>>,
    /// Gradient of the public negative loss.
    pub negative: SparseGradient,
    /// Raw positive relation gradient divided by `B`.
    pub relation_positive: BTreeMap<usize, Vec<f64>>,
    pub events: Vec<PrivacyEvent>,
    /// Mean positive loss over the realized batch before the update.
    pub positive_loss: f64,
    /// Distinct entity rows touched by the batch's positive gradients.
    pub active_rows: usize,
}

impl DpStep {
    /// `E ← E − λ(G̃p + Gn)`, `R ← R − λ(Gp_rel + Gn_rel)`.
    pub fn apply(&self, store: &mut EmbeddingStore, lr: f64) {
        let mut ent: BTreeMap<usize, Vec<f64>> = self.positive.clone();
        for (&e, g) in &self.negative.rows {
            let row = ent.entry(e).or_insert_with(|| vec![0.0; g.len()]);
            row.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        for (e, g) in ent {
            store.entities.row_mut(e).iter_mut().zip(&g).for_each(|(x, d)| *x -= lr * d);
        }
        let mut rel = self.relation_positive.clone();
        for (&r, g) in &self.negative.rel_rows {
            let row = rel.entry(r).or_insert_with(|| vec![0.0; g.len()]);
            row.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        for (r, g) in rel {
            store.relations.row_mut(r).iter_mut().zip(&g).for_each(|(x, d)| *x -= lr * d);
        }
    }
}

/// Gradient of the uniform-weight loss over `n` random public negatives.
/// Depends only on `public_pairs`, the entity count, the current embeddings
/// and the rng.
pub fn public_negative_gradient(
    store: &EmbeddingStore,
    graph: &KnowledgeGraph,
    public_pairs: &[(usize, usize)],
    n: usize,
    params: &LossParams,
    rng: &mut Rng,
) -> Result<SparseGradient> {
    let negs = negative_sample_random(public_pairs, n, graph, rng)?;
    let mut g = SparseGradient::default();
    accumulate_negative(store, &negs, params, NegativeWeighting::Uniform, 1.0, &mut g);
    Ok(g)
}

/// Inputs of one private iteration that stay fixed across iterations.
pub struct DpContext<'a> {
    pub graph: &'a KnowledgeGraph,
    pub train: &'a [Triple],
    pub public_pairs: &'a [(usize, usize)],
    pub expected_batch: usize,
    pub params: &'a LossParams,
    pub cfg: &'a DpConfig,
}

/// Computes one private iteration with noise multiplier `sigma`.
pub fn dp_iteration(store: &EmbeddingStore, ctx: &DpContext<'_>, sigma: f64, rng: &mut Rng) -> Result<DpStep> {
    let cfg = ctx.cfg;
    if ctx.public_pairs.is_empty() {
        return Err(Error::Config("private training needs public (head, relation) pairs".into()));
    }
    if ctx.expected_batch == 0 || ctx.train.is_empty() {
        return Err(Error::invalid("private training needs B >= 1 and a nonempty train split"));
    }
    let q = (ctx.expected_batch as f64 / ctx.train.len() as f64).min(1.0);
    let b = ctx.expected_batch as f64;
    let batch = sample_batch(ctx.train, ctx.expected_batch, rng);

    let width = store.real_dim();
    let n = store.num_entities();
    let mut sum: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut rel_pos: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut positive_loss = 0.0;
    for &t in &batch {
        positive_loss += crate::kge::loss_positive(store, t, ctx.params);
        let g = grad_positive(store, t, ctx.params);
        for (&r, v) in &g.rel_rows {
            let row = rel_pos.entry(r).or_insert_with(|| vec![0.0; v.len()]);
            row.iter_mut().zip(v).for_each(|(a, x)| *a += x / b);
        }
        let clipped = clip_rows(&clip_global(&g, cfg.c1), cfg.c2);
        for (&e, v) in &clipped.rows {
            let row = sum.entry(e).or_insert_with(|| vec![0.0; width]);
            row.iter_mut().zip(v).for_each(|(a, x)| *a += x);
        }
    }
    if !batch.is_empty() {
        positive_loss /= batch.len() as f64;
    }

    let active_rows = sum.len();
    let mut norms = vec![0.0; n];
    for (&e, v) in &sum {
        norms[e] = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let selection = private_selection(&norms, ctx.expected_batch, cfg, rng)?;
    let mut events = Vec::with_capacity(2);
    if !selection.trivial {
        events.push(PrivacyEvent::Selection {
            q,
            sigma_r: cfg.sigma_r,
            sigma_p: cfg.sigma_p,
            delta_t: cfg.delta_t,
        });
    }
    let positive = match &selection.released {
        Some(rows) => {
            events.push(PrivacyEvent::Gradient { q, sigma });
            noisy_gradient(&sum, rows, width, b, sigma, cfg.c1, rng)
        }
        None => BTreeMap::new(),
    };
    let negative = public_negative_gradient(store, ctx.graph, ctx.public_pairs, ctx.params.n_neg, ctx.params, rng)?;
    Ok(DpStep {
        batch_size: batch.len(),
        selection,
        positive,
        negative,
        relation_positive: rel_pos,
        events,
        positive_loss,
        active_rows,
    })
}
