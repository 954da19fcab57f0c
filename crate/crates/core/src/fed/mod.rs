//! Federated training simulator.
//!
//! Each round: broadcast the global entity table, let every client train
//! locally, collect the uploads, average each entity over the clients that
//! hold it, repeat. Relations stay on their clients.
//!
//! Every client draws from its own rng stream keyed by `(seed, client, round)`,
//! so results do not depend on the order in which clients run.

pub mod client;
pub mod hooks;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::accountant::{default_grid, GaussianDenominator};
use crate::dp::DpConfig;
use crate::error::{Error, Result};
use crate::kg::{ClientDataset, Triple, Vocab};
use crate::kge::{init_bound, EmbeddingStore, LossParams, ModelKind};
use crate::matrix::Matrix;
use crate::optim::OptimizerKind;
use crate::rng::{self, purpose};

pub use client::{client_local_update, ClientRole, ClientState, LocalOutcome};
pub use hooks::{ClientView, HookRole, RoundHook};

/// Training hyper-parameters shared by all clients.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub model: ModelKind,
    pub dim: usize,
    pub loss: LossParams,
    /// Expected batch size `B` (sampling rate `B / N`).
    pub batch: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub rounds: usize,
    pub local_iters: usize,
    /// Rounds between validation passes; the last round is always validated.
    pub validation_interval: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            model: ModelKind::TransE,
            dim: 128,
            loss: LossParams::default(),
            batch: 64,
            lr: 0.001,
            optimizer: OptimizerKind::Adam,
            rounds: 50,
            local_iters: 20,
            validation_interval: 5,
            seed: 0,
        }
    }
}

/// Private-training configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Defense {
    pub dp: DpConfig,
    pub grid: Vec<f64>,
    pub denominator: GaussianDenominator,
}

impl Defense {
    pub fn new(dp: DpConfig) -> Self {
        Defense {
            dp,
            grid: default_grid(),
            denominator: GaussianDenominator::Sigma,
        }
    }
}

/// Server-side view: global entity table and who holds what.
#[derive(Clone, Debug)]
pub struct ServerState {
    /// row → global entity id of the source graph
    pub global_ids: Vec<usize>,
    pub names: Vocab,
    /// row → sorted ids of the clients holding it
    pub holders: Vec<Vec<usize>>,
    pub entities: Matrix,
    pub round: usize,
    row_of: HashMap<usize, usize>,
}

impl ServerState {
    pub fn row_of(&self, global: usize) -> Option<usize> {
        self.row_of.get(&global).copied()
    }

    pub fn num_entities(&self) -> usize {
        self.global_ids.len()
    }
}

/// Builds the global vocabulary (union of client entities, ordered by global
/// id), records holders and draws the initial table.
pub fn align_entities(clients: &[ClientDataset], model: ModelKind, dim: usize, seed: u64) -> Result<ServerState> {
    if clients.len() < 2 {
        return Err(Error::invalid("alignment needs at least two clients"));
    }
    let mut seen_ids = std::collections::BTreeSet::new();
    let mut by_global: BTreeMap<usize, (String, Vec<usize>)> = BTreeMap::new();
    for c in clients {
        if !seen_ids.insert(c.id) {
            return Err(Error::invalid(format!("duplicate client id {}", c.id)));
        }
        for (l, &g) in c.entity_global.iter().enumerate() {
            let name = c.graph.entities().name(l).unwrap_or_default().to_string();
            let entry = by_global.entry(g).or_insert_with(|| (name.clone(), Vec::new()));
            if entry.0 != name {
                return Err(Error::Vocabulary(format!(
                    "global entity {g} is {:?} at one client and {name:?} at client {}",
                    entry.0, c.id
                )));
            }
            entry.1.push(c.id);
        }
    }
    let mut global_ids = Vec::with_capacity(by_global.len());
    let mut names = Vec::with_capacity(by_global.len());
    let mut holders = Vec::with_capacity(by_global.len());
    for (g, (name, mut hs)) in by_global {
        hs.sort_unstable();
        global_ids.push(g);
        names.push(name);
        holders.push(hs);
    }
    let row_of = global_ids.iter().enumerate().map(|(r, &g)| (g, r)).collect();
    let dr = model.real_dim(dim);
    let mut entities = Matrix::zeros(global_ids.len(), dr);
    let b = init_bound(model, dim);
    let mut r = rng::stream(seed, &[purpose::INIT]);
    for x in entities.data_mut() {
        *x = rand::Rng::random_range(&mut r, -b..b);
    }
    Ok(ServerState {
        global_ids,
        names: Vocab::from_names(names)?,
        holders,
        entities,
        round: 0,
        row_of,
    })
}

/// Averages each row over its holders' uploads. A row with one holder is
/// copied bit for bit.
pub fn server_aggregate(server: &ServerState, uploads: &BTreeMap<usize, Matrix>) -> Result<Matrix> {
    let mut needed: Vec<usize> = server.holders.iter().flatten().copied().collect();
    needed.sort_unstable();
    needed.dedup();
    for c in &needed {
        match uploads.get(c) {
            None => return Err(Error::Protocol(format!("missing upload from client {c}"))),
            Some(m) if m.rows() != server.entities.rows() || m.cols() != server.entities.cols() => {
                return Err(Error::Protocol(format!(
                    "upload from client {c} is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    server.entities.rows(),
                    server.entities.cols()
                )))
            }
            Some(_) => {}
        }
    }
    let mut out = Matrix::zeros(server.entities.rows(), server.entities.cols());
    for (row, hs) in server.holders.iter().enumerate() {
        let dst = out.row_mut(row);
        dst.copy_from_slice(uploads[&hs[0]].row(row));
        // running mean: exact for identical rows and for a single holder
        for (k, c) in hs.iter().enumerate().skip(1) {
            let src = uploads[c].row(row);
            let n = (k + 1) as f64;
            for (m, x) in dst.iter_mut().zip(src) {
                *m += (x - *m) / n;
            }
        }
    }
    Ok(out)
}

/// Everything observable about one round.
#[derive(Clone, Debug)]
pub struct RoundRecord {
    pub round: usize,
    pub uploads: BTreeMap<usize, Matrix>,
    pub broadcast: Matrix,
    /// client → MRR on its own validation split (validation rounds only)
    pub valid_mrr: BTreeMap<usize, f64>,
    pub train_loss: BTreeMap<usize, f64>,
    /// client → converted ε after the round (private training only)
    pub epsilon: BTreeMap<usize, f64>,
    pub sigma: BTreeMap<usize, f64>,
}

/// Where and why a private run stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halt {
    pub round: usize,
    pub client: usize,
    /// Local iteration that was discarded.
    pub iter: usize,
    /// Epsilon the discarded iteration would have reached.
    pub epsilon: f64,
}

pub struct FedSetup<'a> {
    pub clients: Vec<ClientDataset>,
    pub params: TrainParams,
    pub defense: Option<Defense>,
    /// Public triples in global ids.
    pub public: &'a [Triple],
    /// Keep per-round uploads in the history (memory heavy for long runs).
    pub keep_uploads: bool,
}

pub struct FedOutcome {
    pub server: ServerState,
    pub clients: Vec<ClientState>,
    pub history: Vec<RoundRecord>,
    pub halt: Option<Halt>,
}

impl FedOutcome {
    /// Final global table.
    pub fn global_entities(&self) -> &Matrix {
        &self.server.entities
    }
}

/// Builds server and client state without training.
pub fn setup_federation(setup: &FedSetup<'_>) -> Result<(ServerState, Vec<ClientState>)> {
    let p = &setup.params;
    p.loss.validate()?;
    if p.dim == 0 || p.batch == 0 {
        return Err(Error::Config("dim and batch must be >= 1".into()));
    }
    if let Some(d) = &setup.defense {
        d.dp.validate()?;
    }
    let server = align_entities(&setup.clients, p.model, p.dim, p.seed)?;
    let mut clients = Vec::with_capacity(setup.clients.len());
    for ds in &setup.clients {
        let rows: Vec<usize> = ds
            .entity_global
            .iter()
            .map(|&g| server.row_of(g).expect("aligned"))
            .collect();
        let mut r = rng::stream(p.seed, &[purpose::INIT, 1 + ds.id as u64]);
        let mut store = EmbeddingStore::random(p.model, p.dim, ds.num_entities(), ds.num_relations(), &mut r);
        for (l, &g) in rows.iter().enumerate() {
            store.entities.set_row(l, server.entities.row(g));
        }
        clients.push(ClientState::new(
            ds.clone(),
            store,
            rows,
            p,
            setup.defense.as_ref(),
            setup.public,
        )?);
    }
    Ok((server, clients))
}

/// Runs `rounds` rounds of federated training.
pub fn run_fkge(setup: FedSetup<'_>, hooks: &mut [&mut dyn RoundHook]) -> Result<FedOutcome> {
    let p = setup.params.clone();
    if p.rounds == 0 {
        return Err(Error::Config("rounds must be >= 1".into()));
    }
    let (mut server, mut clients) = setup_federation(&setup)?;
    let defense = setup.defense.as_ref();
    let mut history = Vec::with_capacity(p.rounds);
    let mut halt = None;
    let mut broadcast = server.entities.clone();
    for h in hooks.iter_mut() {
        if h.role() == HookRole::Server {
            h.on_start(&server)?;
        }
    }

    for round in 1..=p.rounds {
        let mut uploads = BTreeMap::new();
        let mut train_loss = BTreeMap::new();
        for c in clients.iter_mut() {
            let id = c.id();
            let mut r = rng::stream(p.seed, &[purpose::LOCAL, id as u64, round as u64]);
            let out = client_local_update(c, &broadcast, round, &p, defense, &mut r)?;
            if let Some((iter, epsilon)) = out.halted_at {
                if round == 1 && c.committed_iters == 0 {
                    return Err(Error::BudgetExhaustedAtStart);
                }
                halt.get_or_insert(Halt { round, client: id, iter, epsilon });
            }
            let mut upload = out.upload;
            for h in hooks.iter_mut() {
                if h.role() == HookRole::Client(id) {
                    let view = ClientView {
                        dataset: &c.dataset,
                        store: &c.store,
                        server_rows: &c.server_rows,
                    };
                    h.on_upload(round, &view, &mut upload)?;
                }
            }
            train_loss.insert(id, out.mean_loss);
            uploads.insert(id, upload);
        }
        for h in hooks.iter_mut() {
            if h.role() == HookRole::Server {
                h.on_uploads(round, &uploads)?;
            }
        }
        broadcast = server_aggregate(&server, &uploads)?;
        server.entities = broadcast.clone();
        server.round = round;
        for h in hooks.iter_mut() {
            h.on_broadcast(round, &broadcast)?;
        }

        let last = round == p.rounds || halt.is_some();
        let mut valid_mrr = BTreeMap::new();
        let mut epsilon = BTreeMap::new();
        let mut sigma = BTreeMap::new();
        let validate = last || round % p.validation_interval.max(1) == 0;
        for c in clients.iter_mut() {
            // evaluate what the client would hold after receiving this broadcast
            c.receive(&broadcast);
            if validate {
                if let Some(m) = c.validation_mrr()? {
                    valid_mrr.insert(c.id(), m);
                }
            }
            if let Some(d) = defense {
                if d.dp.adaptive && round % d.dp.validation_interval == 0 {
                    if let Some(m) = c.public_validation_mrr()? {
                        if let Some(prev) = c.last_public_mrr {
                            c.sigma = crate::dp::adaptive_sigma_update(c.sigma, m, prev, &d.dp);
                        }
                        c.last_public_mrr = Some(m);
                    }
                }
                if let Some(l) = &c.ledger {
                    if !l.events().is_empty() {
                        epsilon.insert(c.id(), l.to_dp(d.dp.delta)?.epsilon);
                    }
                }
                sigma.insert(c.id(), c.sigma);
            }
        }
        history.push(RoundRecord {
            round,
            uploads: if setup.keep_uploads { uploads } else { BTreeMap::new() },
            broadcast: broadcast.clone(),
            valid_mrr,
            train_loss,
            epsilon,
            sigma,
        });
        if halt.is_some() {
            break;
        }
    }
    Ok(FedOutcome {
        server,
        clients,
        history,
        halt,
    })
}
