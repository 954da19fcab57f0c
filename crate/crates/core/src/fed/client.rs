//! Client-side state and the local update.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{Defense, TrainParams};
use crate::accountant::{exhausts, EventRecord, PrivacyLedger};
use crate::dp::{dp_iteration, DpContext};
use crate::error::{Error, Result};
use crate::eval;
use crate::kg::{negative_sample_self_adv, sample_batch, ClientDataset, Triple};
use crate::kge::loss::{accumulate_negative, accumulate_positive};
use crate::kge::{EmbeddingStore, GradBuffer, NegativeWeighting};
use crate::matrix::Matrix;
use crate::optim::Optimizer;
use crate::rng::Rng;

/// Public validation triples kept per client for noise adaptation.
const PUBLIC_VALID_CAP: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientRole {
    #[default]
    Honest,
    Adversary,
}

/// Everything a client keeps between rounds. Relations never leave it.
#[derive(Clone, Debug)]
pub struct ClientState {
    pub dataset: ClientDataset,
    pub store: EmbeddingStore,
    pub optimizer: Optimizer,
    pub role: ClientRole,
    /// local entity id → row of the global table
    pub server_rows: Vec<usize>,
    /// public `(head, relation)` pairs in local ids
    pub public_pairs: Vec<(usize, usize)>,
    /// public triples fully inside this client's vocabulary, local ids
    pub public_valid: Vec<Triple>,
    /// current noise multiplier (private training only)
    pub sigma: f64,
    pub ledger: Option<PrivacyLedger>,
    pub last_public_mrr: Option<f64>,
    pub committed_iters: usize,
    pub halted: bool,
    filter: HashSet<Triple>,
    grad: GradBuffer,
}

/// Result of one local update.
#[derive(Clone, Debug)]
pub struct LocalOutcome {
    /// The client's entity rows written into a copy of the broadcast.
    pub upload: Matrix,
    pub mean_loss: f64,
    pub iterations: usize,
    pub released: usize,
    /// Budget ran out during this update: the discarded iteration and the
    /// epsilon it would have reached.
    pub halted_at: Option<(usize, f64)>,
}

impl ClientState {
    pub(crate) fn new(
        dataset: ClientDataset,
        store: EmbeddingStore,
        server_rows: Vec<usize>,
        params: &TrainParams,
        defense: Option<&Defense>,
        public: &[Triple],
    ) -> Result<Self> {
        let mut pairs = BTreeSet::new();
        let mut valid = Vec::new();
        for &t in public {
            if let (Some(h), Some(r)) = (dataset.local_entity(t.head), dataset.local_relation(t.rel)) {
                pairs.insert((h, r));
            }
            if let Some(l) = dataset.to_local(t) {
                if !dataset.graph.contains(&l) && valid.len() < PUBLIC_VALID_CAP {
                    valid.push(l);
                }
            }
        }
        let mut filter: HashSet<Triple> = dataset.graph.triples().iter().copied().collect();
        filter.extend(valid.iter().copied());
        let ledger = match defense {
            Some(d) => {
                if pairs.is_empty() {
                    return Err(Error::Config(format!(
                        "client {} has no public (head, relation) pairs for private training",
                        dataset.id
                    )));
                }
                Some(PrivacyLedger::new(d.grid.clone(), d.denominator)?)
            }
            None => None,
        };
        let optimizer = Optimizer::new(params.optimizer, params.lr, &store);
        let grad = GradBuffer::for_store(&store);
        Ok(ClientState {
            sigma: defense.map_or(0.0, |d| d.dp.sigma),
            dataset,
            optimizer,
            role: ClientRole::Honest,
            server_rows,
            public_pairs: pairs.into_iter().collect(),
            public_valid: valid,
            ledger,
            last_public_mrr: None,
            committed_iters: 0,
            halted: false,
            filter,
            grad,
            store,
        })
    }

    pub fn id(&self) -> usize {
        self.dataset.id
    }

    /// Every triple this client knows to be true (own triples plus public ones
    /// in its vocabulary), for filtered ranking.
    pub fn known_triples(&self) -> &HashSet<Triple> {
        &self.filter
    }

    /// Overwrites held rows from the broadcast table.
    pub fn receive(&mut self, broadcast: &Matrix) {
        for (l, &g) in self.server_rows.iter().enumerate() {
            self.store.entities.set_row(l, broadcast.row(g));
        }
    }

    /// Held rows written into a copy of `broadcast`.
    pub fn project(&self, broadcast: &Matrix) -> Matrix {
        let mut up = broadcast.clone();
        for (l, &g) in self.server_rows.iter().enumerate() {
            up.set_row(g, self.store.entities.row(l));
        }
        up
    }

    pub fn validation_mrr(&self) -> Result<Option<f64>> {
        if self.dataset.valid.is_empty() {
            return Ok(None);
        }
        Ok(Some(eval::evaluate(&self.store, &self.dataset.valid, &self.filter)?.mrr))
    }

    pub fn public_validation_mrr(&self) -> Result<Option<f64>> {
        if self.public_valid.is_empty() {
            return Ok(None);
        }
        Ok(Some(eval::evaluate(&self.store, &self.public_valid, &self.filter)?.mrr))
    }

    fn plain_iteration(&mut self, params: &TrainParams, rng: &mut Rng) -> Result<Option<f64>> {
        let batch = sample_batch(&self.dataset.train, params.batch, rng);
        if batch.is_empty() {
            return Ok(None);
        }
        let w = 1.0 / batch.len() as f64;
        self.grad.clear();
        let mut loss = 0.0;
        for &t in &batch {
            let negs = negative_sample_self_adv(t, params.loss.n_neg, &self.dataset.graph, rng)?;
            loss += accumulate_positive(&self.store, t, &params.loss, w, &mut self.grad);
            loss += accumulate_negative(
                &self.store,
                &negs,
                &params.loss,
                NegativeWeighting::SelfAdversarial,
                w,
                &mut self.grad,
            );
        }
        self.optimizer.step(&mut self.store, &self.grad);
        Ok(Some(loss * w))
    }
}

/// Receives the broadcast, runs `T` local iterations and returns the upload.
///
/// With a defense, each iteration is previewed against the budget first; the
/// iteration that would reach it is discarded and the client halts.
pub fn client_local_update(
    client: &mut ClientState,
    broadcast: &Matrix,
    round: usize,
    params: &TrainParams,
    defense: Option<&Defense>,
    rng: &mut Rng,
) -> Result<LocalOutcome> {
    if broadcast.cols() != client.store.entities.cols() {
        return Err(Error::Protocol(format!(
            "broadcast has {} columns, client {} expects {}",
            broadcast.cols(),
            client.id(),
            client.store.entities.cols()
        )));
    }
    client.receive(broadcast);
    let mut losses = Vec::new();
    let mut released = 0;
    let mut halted_at = None;
    for it in 0..params.local_iters {
        if client.halted {
            break;
        }
        match defense {
            None => {
                if let Some(l) = client.plain_iteration(params, rng)? {
                    losses.push(l);
                }
            }
            Some(d) => {
                let ctx = DpContext {
                    graph: &client.dataset.graph,
                    train: &client.dataset.train,
                    public_pairs: &client.public_pairs,
                    expected_batch: params.batch,
                    params: &params.loss,
                    cfg: &d.dp,
                };
                let step = dp_iteration(&client.store, &ctx, client.sigma, rng)?;
                let ledger = client.ledger.as_mut().expect("defended clients carry a ledger");
                let preview = ledger.preview(&step.events, d.dp.delta)?;
                if exhausts(&preview, d.dp.epsilon_budget) {
                    client.halted = true;
                    halted_at = Some((it, preview.epsilon));
                    break;
                }
                for &event in &step.events {
                    ledger.push(EventRecord { round, iter: it, event })?;
                }
                step.apply(&mut client.store, d.dp.lr);
                if step.selection.released.is_some() {
                    released += 1;
                }
                if step.batch_size > 0 {
                    losses.push(step.positive_loss);
                }
            }
        }
        client.committed_iters += 1;
    }
    let mean_loss = if losses.is_empty() {
        f64::NAN
    } else {
        losses.iter().sum::<f64>() / losses.len() as f64
    };
    Ok(LocalOutcome {
        upload: client.project(broadcast),
        mean_loss,
        iterations: losses.len(),
        released,
        halted_at,
    })
}
