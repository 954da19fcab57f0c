//! Experiment driver behind the `fkge` binary.
//!
//! A run directory holds:
//!
//! | path | content |
//! |------|---------|
//! | `config.toml` | the resolved [`ExperimentConfig`] |
//! | `manifest.json` | seed, code version and partition summary |
//! | `checkpoints/` | per-round client and global tables, indexed by `manifest.jsonl` |
//! | `observables/` | attack observables recorded during training |
//! | `attacks/` | traces, summaries and ROC curves written by `attack` |
//! | `metrics.json`, `history.csv` | link-prediction metrics and per-round log |
//! | `ledger.json` | per-client privacy ledgers (defended runs only) |
//!
//! Every file is a deterministic function of the configuration.

pub mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use config::{AttackConfig, DatasetConfig, ExperimentConfig};

use crate::accountant::{EventRecord, LedgerExport, OrderEps, PrivacyEvent, PrivacyLedger};
use crate::attacks::{
    cia_run, cip_run, si_run, AdversaryRecorder, AttackKind, AttackReport, CiaObservables, CiaPlan, CipObservables,
    ServerRecorder, SiConfig, SiObservables,
};
use crate::dp::DpConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, LinkMetrics, MetricsRow};
use crate::fed::{run_fkge, ClientView, Defense, FedOutcome, FedSetup, Halt, HookRole, RoundHook};
use crate::kg::partition::PartitionManifest;
use crate::kg::{
    build_candidate_set, build_candidate_set_within, generate_synthetic, load_triples, partition_federated,
    split_public, AuxSchema, CandidateSet, Partition, Triple,
};
use crate::kge::{read_checkpoint, write_checkpoint, Checkpoint, EmbeddingStore, ModelKind};
use crate::matrix::Matrix;
use crate::rng::{self, purpose};

/// Environment variable naming the output root (default `runs`).
pub const OUT_ENV: &str = "FKGE_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Graph, public pool, partition and (when known) the aux schema of a run.
pub struct PreparedData {
    pub partition: Partition,
    pub public: Vec<Triple>,
    pub aux: Option<AuxSchema>,
    pub num_relations: usize,
}

/// Rebuilds the run's data; deterministic in the configuration.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let (graph, aux) = match &cfg.dataset {
        DatasetConfig::Synthetic {
            entities,
            relations,
            triples,
        } => {
            let s = generate_synthetic(*entities, *relations, *triples, cfg.seed)?;
            (s.graph, Some(s.aux))
        }
        DatasetConfig::Files {
            triples,
            entities,
            relations,
            aux,
        } => {
            let loaded = load_triples(triples, entities.as_deref(), relations.as_deref())?;
            if loaded.duplicates > 0 {
                log::warn!("{}: {} duplicate triples dropped", triples.display(), loaded.duplicates);
            }
            let aux = match aux {
                Some(p) => Some(read_json::<AuxSchema>(p)?.reindexed()?),
                None => None,
            };
            (loaded.graph, aux)
        }
    };
    let num_relations = graph.num_relations();
    let (private, public) = split_public(&graph, cfg.public_frac, cfg.seed)?;
    let [tr, va, te] = cfg.split;
    let partition = partition_federated(&private, cfg.clients, cfg.overlap_frac, (tr, va, te), cfg.seed)?;
    Ok(PreparedData {
        partition,
        public,
        aux,
        num_relations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub seed: u64,
    pub code_version: String,
    pub model: ModelKind,
    pub defended: bool,
    pub public_triples: usize,
    pub partition: PartitionManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientMetrics {
    pub client: usize,
    #[serde(flatten)]
    pub link: LinkMetrics,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// always `filtered`: known triples of the client are skipped when ranking
    pub ranking: String,
    /// means over clients; ε is the largest client ε
    pub summary: MetricsRow,
    pub clients: Vec<ClientMetrics>,
    /// mean MRR of untrained random embeddings on the same test splits
    pub random_mrr: f64,
    pub rounds_completed: usize,
    pub halt: Option<Halt>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientLedger {
    pub client: usize,
    pub final_sigma: f64,
    pub summary: LedgerExport,
    pub events: Vec<EventRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub round: usize,
    pub global: String,
    pub clients: Vec<String>,
}

/// Observables plus the labelled candidates used to score them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedAttack<O> {
    pub candidates: CandidateSet,
    pub observables: O,
}

pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub metrics: MetricsReport,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Prepares `root/name`: refuses a non-empty directory that is not a run,
/// clears the generated subdirectories of a previous run.
fn fresh_run_dir(root: &Path, name: &str) -> Result<PathBuf> {
    let dir = root.join(name);
    if dir.exists() {
        let is_run = dir.join("manifest.json").exists();
        let empty = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?.next().is_none();
        if !is_run && !empty {
            return Err(Error::Config(format!(
                "{} exists and is not a run directory",
                dir.display()
            )));
        }
        for sub in ["checkpoints", "observables", "attacks"] {
            let p = dir.join(sub);
            if p.exists() {
                fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        for file in ["ledger.json"] {
            let p = dir.join(file);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    for sub in ["", "checkpoints", "observables", "attacks"] {
        mkdir(&dir.join(sub))?;
    }
    Ok(dir)
}

/// Captures one client's table at checkpoint rounds.
struct CheckpointRecorder {
    client: usize,
    interval: usize,
    model: ModelKind,
    dim: usize,
    rows: Vec<usize>,
    relations: BTreeMap<usize, Matrix>,
    saved: BTreeMap<usize, Checkpoint>,
}

impl RoundHook for CheckpointRecorder {
    fn role(&self) -> HookRole {
        HookRole::Client(self.client)
    }

    fn on_upload(&mut self, round: usize, view: &ClientView<'_>, _upload: &mut Matrix) -> Result<()> {
        if round % self.interval == 0 {
            self.rows = view.server_rows.to_vec();
            self.relations.insert(round, view.store.relations.clone());
        }
        Ok(())
    }

    fn on_broadcast(&mut self, round: usize, broadcast: &Matrix) -> Result<()> {
        if let Some(relations) = self.relations.remove(&round) {
            let store = EmbeddingStore {
                model: self.model,
                dim: self.dim,
                entities: broadcast.select_rows(&self.rows),
                relations,
            };
            self.saved.insert(round, Checkpoint::from_store(&store));
        }
        Ok(())
    }
}

fn defense_of(cfg: &ExperimentConfig) -> Option<Defense> {
    cfg.defense.clone().map(Defense::new)
}

fn setting_name(defense: Option<&DpConfig>) -> String {
    match defense {
        None => "fkge".into(),
        Some(d) if d.adaptive => "dp-flames-adp".into(),
        Some(_) => "dp-flames".into(),
    }
}

/// Candidates for the client-side attacks: both endpoints shared by victim
/// and adversary.
fn shared_candidates(cfg: &ExperimentConfig, part: &Partition) -> Result<CandidateSet> {
    let a = &cfg.attacks;
    let victim = &part.clients[a.victim];
    let adversary: BTreeSet<usize> = part.clients[a.adversary].entity_global.iter().copied().collect();
    let shared: BTreeSet<usize> = victim
        .entity_global
        .iter()
        .copied()
        .filter(|e| adversary.contains(e))
        .collect();
    build_candidate_set_within(victim, &shared, a.members, a.nonmembers, cfg.seed).map_err(|e| {
        Error::Config(format!(
            "cannot draw client-attack candidates from the {} entities shared by clients {} and {}: {e}; raise overlap_frac or lower attacks.members",
            shared.len(),
            a.victim,
            a.adversary
        ))
    })
}

/// Trains, evaluates and records everything into a fresh run directory.
pub fn cmd_train(cfg: &ExperimentConfig, out_root: &Path) -> Result<TrainSummary> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let kinds: BTreeSet<AttackKind> = cfg.attacks.kinds.iter().copied().collect();
    let si_aux = if kinds.contains(&AttackKind::Si) {
        Some(data.aux.clone().ok_or_else(|| {
            Error::Config("server-side inference needs an aux schema; set dataset.aux or use a synthetic dataset".into())
        })?)
    } else {
        None
    };
    let si_candidates = match si_aux {
        Some(_) => Some(build_candidate_set(
            &data.partition.clients[cfg.attacks.victim],
            cfg.attacks.members,
            cfg.attacks.nonmembers,
            cfg.seed,
        )?),
        None => None,
    };
    let client_candidates = if kinds.contains(&AttackKind::Cip) || kinds.contains(&AttackKind::Cia) {
        Some(shared_candidates(cfg, &data.partition)?)
    } else {
        None
    };

    let dir = fresh_run_dir(out_root, &cfg.name)?;
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    write_json(
        &dir.join("manifest.json"),
        &RunManifest {
            name: cfg.name.clone(),
            seed: cfg.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            model: cfg.model,
            defended: cfg.defense.is_some(),
            public_triples: data.public.len(),
            partition: data.partition.manifest(),
        },
    )?;

    let rounds = cfg.attack_rounds();
    let mut server_rec = si_aux.map(|aux| ServerRecorder::new(cfg.attacks.victim, rounds.clone(), cfg.model, data.num_relations, aux));
    let mut adv_rec = kinds
        .contains(&AttackKind::Cip)
        .then(|| AdversaryRecorder::new(cfg.attacks.adversary, rounds.clone(), None, cfg.model, cfg.dim, cfg.clients));
    let mut ckpt: Vec<CheckpointRecorder> = (0..cfg.clients)
        .map(|client| CheckpointRecorder {
            client,
            interval: cfg.checkpoint_interval,
            model: cfg.model,
            dim: cfg.dim,
            rows: Vec::new(),
            relations: BTreeMap::new(),
            saved: BTreeMap::new(),
        })
        .collect();

    let outcome = {
        let mut hooks: Vec<&mut dyn RoundHook> = Vec::new();
        if let Some(h) = server_rec.as_mut() {
            hooks.push(h);
        }
        if let Some(h) = adv_rec.as_mut() {
            hooks.push(h);
        }
        for h in ckpt.iter_mut() {
            hooks.push(h);
        }
        run_fkge(
            FedSetup {
                clients: data.partition.clients.clone(),
                params: cfg.train_params(),
                defense: defense_of(cfg),
                public: &data.public,
                keep_uploads: false,
            },
            &mut hooks,
        )?
    };

    write_checkpoints(&dir, cfg, &outcome, ckpt)?;
    write_history(&dir, &outcome)?;
    if let Some(d) = &cfg.defense {
        let ledgers = outcome
            .clients
            .iter()
            .filter_map(|c| {
                c.ledger.as_ref().map(|l| {
                    Ok(ClientLedger {
                        client: c.id(),
                        final_sigma: c.sigma,
                        summary: l.export(d.delta)?,
                        events: l.events().to_vec(),
                    })
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_json(&dir.join("ledger.json"), &ledgers)?;
    }
    let metrics = metrics_report(cfg, &outcome)?;
    write_json(&dir.join("metrics.json"), &metrics)?;

    if let (Some(rec), Some(candidates)) = (server_rec, si_candidates) {
        write_json(
            &dir.join("observables/si.json"),
            &ObservedAttack {
                candidates,
                observables: rec.into_observables(),
            },
        )?;
    }
    if let (Some(rec), Some(candidates)) = (&adv_rec, &client_candidates) {
        write_json(
            &dir.join("observables/cip.json"),
            &ObservedAttack {
                candidates: candidates.clone(),
                observables: rec.cip_observables(),
            },
        )?;
    }
    if kinds.contains(&AttackKind::Cia) {
        let candidates = client_candidates.expect("built above when cia is requested");
        let obs = record_cia(cfg, &data, &candidates)?;
        write_json(
            &dir.join("observables/cia.json"),
            &ObservedAttack {
                candidates,
                observables: obs,
            },
        )?;
    }
    Ok(TrainSummary { run_dir: dir, metrics })
}

/// Replays the run with the adversary reversing candidate tails. The honest
/// run's outputs are unaffected.
fn record_cia(cfg: &ExperimentConfig, data: &PreparedData, candidates: &CandidateSet) -> Result<CiaObservables> {
    let targets: BTreeSet<usize> = candidates.candidates.iter().map(|c| c.triple.tail).collect();
    let rounds: BTreeSet<usize> = cfg
        .attack_rounds()
        .into_iter()
        .filter(|r| r + cfg.attacks.cia_lag <= cfg.rounds)
        .collect();
    let plan = CiaPlan {
        targets: targets.into_iter().collect(),
        lag: cfg.attacks.cia_lag,
    };
    let mut rec = AdversaryRecorder::new(cfg.attacks.adversary, rounds, Some(plan), cfg.model, cfg.dim, cfg.clients);
    run_fkge(
        FedSetup {
            clients: data.partition.clients.clone(),
            params: cfg.train_params(),
            defense: defense_of(cfg),
            public: &data.public,
            keep_uploads: false,
        },
        &mut [&mut rec],
    )?;
    Ok(rec.cia_observables())
}

fn round_dir(round: usize) -> String {
    format!("round-{round:04}")
}

fn write_checkpoints(dir: &Path, cfg: &ExperimentConfig, outcome: &FedOutcome, recs: Vec<CheckpointRecorder>) -> Result<()> {
    let ck = dir.join("checkpoints");
    let mut per_round: BTreeMap<usize, Vec<(usize, Checkpoint)>> = BTreeMap::new();
    for rec in recs {
        for (round, c) in rec.saved {
            per_round.entry(round).or_default().push((rec.client, c));
        }
    }
    // a run that stopped early also keeps its final state
    let last = outcome.history.last().map_or(0, |h| h.round);
    if last > 0 && !per_round.contains_key(&last) {
        let finals = outcome
            .clients
            .iter()
            .map(|c| (c.id(), Checkpoint::from_store(&c.store)))
            .collect();
        per_round.insert(last, finals);
    }
    let mut index = String::new();
    for (round, clients) in per_round {
        let rd = round_dir(round);
        mkdir(&ck.join(&rd))?;
        let global = format!("{rd}/global.ckpt");
        let table = &outcome.history[round - 1].broadcast;
        write_checkpoint(&ck.join(&global), &Checkpoint::entities_only(cfg.model, cfg.dim, table.clone()))?;
        let mut files = Vec::new();
        for (id, c) in clients {
            let f = format!("{rd}/client-{id}.ckpt");
            write_checkpoint(&ck.join(&f), &c)?;
            files.push(f);
        }
        let entry = CheckpointEntry {
            round,
            global,
            clients: files,
        };
        index.push_str(&serde_json::to_string(&entry)?);
        index.push('\n');
    }
    write_text(&ck.join("manifest.jsonl"), &index)
}

fn opt(x: Option<&f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_history(dir: &Path, outcome: &FedOutcome) -> Result<()> {
    let mut s = String::from("round,client,train_loss,valid_mrr,epsilon,sigma\n");
    for r in &outcome.history {
        for (c, loss) in &r.train_loss {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.round,
                c,
                loss,
                opt(r.valid_mrr.get(c)),
                opt(r.epsilon.get(c)),
                opt(r.sigma.get(c))
            );
        }
    }
    write_text(&dir.join("history.csv"), &s)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn metrics_report(cfg: &ExperimentConfig, outcome: &FedOutcome) -> Result<MetricsReport> {
    let mut clients = Vec::new();
    let mut random = Vec::new();
    for c in &outcome.clients {
        let known = c.dataset.graph.triples().iter().copied().collect();
        let link = evaluate(&c.store, &c.dataset.test, &known)?;
        let epsilon = match (&c.ledger, &cfg.defense) {
            (Some(l), Some(d)) => Some(l.to_dp(d.delta)?.epsilon),
            _ => None,
        };
        clients.push(ClientMetrics {
            client: c.id(),
            link,
            epsilon,
        });
        let mut r = rng::stream(cfg.seed, &[purpose::INIT, 1_000 + c.id() as u64]);
        let untrained = EmbeddingStore::random(cfg.model, cfg.dim, c.store.num_entities(), c.store.num_relations(), &mut r);
        random.push(evaluate(&untrained, &c.dataset.test, &known)?.mrr);
    }
    let eps = clients
        .iter()
        .filter_map(|c| c.epsilon)
        .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
    Ok(MetricsReport {
        ranking: "filtered".into(),
        summary: MetricsRow {
            model: cfg.model.name().to_string(),
            setting: setting_name(cfg.defense.as_ref()),
            mrr: mean(clients.iter().map(|c| c.link.mrr)),
            hits1: mean(clients.iter().map(|c| c.link.hits1)),
            hits10: mean(clients.iter().map(|c| c.link.hits10)),
            epsilon: eps,
        },
        clients,
        random_mrr: mean(random.into_iter()),
        rounds_completed: outcome.history.len(),
        halt: outcome.halt,
    })
}

fn load_run_config(run_dir: &Path) -> Result<ExperimentConfig> {
    let path = run_dir.join("config.toml");
    if !path.is_file() {
        return Err(Error::Config(format!("{} is not a run directory (no config.toml)", run_dir.display())));
    }
    ExperimentConfig::load(&path)
}

/// Optional overrides of the run's attack settings.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AttackOverrides {
    pub si_cap: Option<usize>,
    pub si_quantile: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub best_f1: f64,
    #[serde(with = "crate::attacks::ext_f64")]
    pub best_tau: f64,
    pub auc: f64,
    pub evaluated: usize,
    pub not_evaluable: usize,
    pub no_aux: usize,
}

/// Best F1 over rounds plus each round's sweep summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub attack: AttackKind,
    pub model: ModelKind,
    pub best_f1: f64,
    pub best_round: usize,
    pub rounds: Vec<RoundSummary>,
    pub warnings: Vec<String>,
}

pub struct AttackRun {
    pub report: AttackReport,
    pub summary: AttackSummary,
}

fn load_observed<O: DeserializeOwned>(run_dir: &Path, kind: AttackKind) -> Result<ObservedAttack<O>> {
    let path = run_dir.join("observables").join(format!("{kind}.json"));
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} has no {kind} observables; train with attacks.kinds containing \"{kind}\"",
            run_dir.display()
        )));
    }
    read_json(&path)
}

/// Replays recorded observables through one attack and writes its traces.
pub fn cmd_attack(run_dir: &Path, kind: AttackKind, overrides: AttackOverrides) -> Result<AttackRun> {
    let cfg = load_run_config(run_dir)?;
    let mut warnings = Vec::new();
    let report = match kind {
        AttackKind::Si => {
            let mut o: ObservedAttack<SiObservables> = load_observed(run_dir, kind)?;
            o.observables.aux = std::mem::take(&mut o.observables.aux).reindexed()?;
            let cap = overrides.si_cap.unwrap_or(cfg.attacks.si_cap);
            let si = SiConfig {
                cap: (cap > 0).then_some(cap),
                quantile: overrides.si_quantile.unwrap_or(cfg.attacks.si_quantile),
                seed: cfg.seed,
            };
            si_run(&o.observables, &o.candidates, &si)?
        }
        AttackKind::Cip => {
            let o: ObservedAttack<CipObservables> = load_observed(run_dir, kind)?;
            cip_run(&o.observables, &o.candidates)?
        }
        AttackKind::Cia => {
            let o: ObservedAttack<CiaObservables> = load_observed(run_dir, kind)?;
            if !o.observables.model.is_translational() {
                warnings.push(format!(
                    "{}: bilinear scores are insensitive to reversed tail rows, expect a weak signal",
                    o.observables.model
                ));
            }
            cia_run(&o.observables, &o.candidates)?
        }
    };
    let summary = AttackSummary {
        attack: kind,
        model: cfg.model,
        best_f1: report.best_f1,
        best_round: report.best_round,
        rounds: report
            .traces
            .iter()
            .map(|t| RoundSummary {
                round: t.round,
                best_f1: t.summary.best_f1,
                best_tau: t.summary.best_tau,
                auc: t.summary.auc,
                evaluated: t.records.len(),
                not_evaluable: t.not_evaluable,
                no_aux: t.no_aux,
            })
            .collect(),
        warnings,
    };
    let dir = run_dir.join("attacks");
    mkdir(&dir)?;
    write_json(&dir.join(format!("{kind}.json")), &report)?;
    write_json(&dir.join(format!("{kind}-summary.json")), &summary)?;
    for t in &report.traces {
        write_text(&dir.join(format!("{kind}-{}-roc.csv", round_dir(t.round))), &t.roc_csv())?;
    }
    Ok(AttackRun { report, summary })
}

/// Offline what-if accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct AccountRequest {
    pub dp: DpConfig,
    /// Poisson sampling rate `B / |train|`
    pub q: f64,
    pub iterations: usize,
    /// iterations whose release test passed; defaults to all of them
    pub releases: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccountReport {
    pub iterations: usize,
    pub releases: usize,
    pub q: f64,
    pub epsilon: f64,
    pub delta_total: f64,
    #[serde(with = "crate::attacks::ext_f64")]
    pub best_alpha: f64,
    pub table: Vec<OrderEps>,
}

/// ε after `iterations` selection events and `releases` gradient events.
pub fn cmd_account(req: &AccountRequest) -> Result<AccountReport> {
    req.dp.validate()?;
    if !(req.q > 0.0 && req.q <= 1.0) {
        return Err(Error::Config(format!("sampling rate {} outside (0, 1]", req.q)));
    }
    let releases = req.releases.unwrap_or(req.iterations);
    if releases > req.iterations {
        return Err(Error::Config(format!(
            "{releases} releases exceed {} iterations",
            req.iterations
        )));
    }
    let defense = Defense::new(req.dp.clone());
    let mut ledger = PrivacyLedger::new(defense.grid, defense.denominator)?;
    let d = &req.dp;
    for i in 0..req.iterations {
        ledger.push(EventRecord {
            round: 0,
            iter: i,
            event: PrivacyEvent::Selection {
                q: req.q,
                sigma_r: d.sigma_r,
                sigma_p: d.sigma_p,
                delta_t: d.delta_t,
            },
        })?;
        if i < releases {
            ledger.push(EventRecord {
                round: 0,
                iter: i,
                event: PrivacyEvent::Gradient { q: req.q, sigma: d.sigma },
            })?;
        }
    }
    let e = ledger.export(d.delta)?;
    Ok(AccountReport {
        iterations: req.iterations,
        releases,
        q: req.q,
        epsilon: e.epsilon,
        delta_total: e.delta_total,
        best_alpha: e.best_alpha,
        table: e.table,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub round: usize,
    pub ranking: String,
    pub summary: MetricsRow,
    pub clients: Vec<ClientMetrics>,
}

/// Re-evaluates the client checkpoints of `round` (default: the last) on the
/// clients' test splits and writes `eval-round-NNNN.json`.
pub fn cmd_eval(run_dir: &Path, round: Option<usize>) -> Result<EvalReport> {
    let cfg = load_run_config(run_dir)?;
    let index_path = run_dir.join("checkpoints/manifest.jsonl");
    let text = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let entries = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str::<CheckpointEntry>)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let entry = match round {
        Some(r) => entries.iter().find(|e| e.round == r),
        None => entries.last(),
    }
    .ok_or_else(|| Error::Config(format!("no checkpoint for round {round:?} in {}", index_path.display())))?;
    let data = prepare_data(&cfg)?;
    let mut clients = Vec::new();
    for (ds, file) in data.partition.clients.iter().zip(&entry.clients) {
        let store = read_checkpoint(&run_dir.join("checkpoints").join(file))?.into_store();
        if store.num_entities() != ds.num_entities() {
            return Err(Error::Format(format!("{file} does not match client {}", ds.id)));
        }
        let known = ds.graph.triples().iter().copied().collect();
        clients.push(ClientMetrics {
            client: ds.id,
            link: evaluate(&store, &ds.test, &known)?,
            epsilon: None,
        });
    }
    let report = EvalReport {
        round: entry.round,
        ranking: "filtered".into(),
        summary: MetricsRow {
            model: cfg.model.name().to_string(),
            setting: setting_name(cfg.defense.as_ref()),
            mrr: mean(clients.iter().map(|c| c.link.mrr)),
            hits1: mean(clients.iter().map(|c| c.link.hits1)),
            hits10: mean(clients.iter().map(|c| c.link.hits10)),
            epsilon: None,
        },
        clients,
    };
    write_json(&run_dir.join(format!("eval-{}.json", round_dir(entry.round))), &report)?;
    Ok(report)
}
