//! Hooks that record attack observables during a federated run.

use std::collections::{BTreeMap, BTreeSet};

use super::{cia_reverse, CiaObservables, CiaRound, CipObservables, CipRound, EntityTable, RelationTable, SiObservables, SiRound};
use crate::error::{Error, Result};
use crate::fed::{ClientView, HookRole, RoundHook, ServerState};
use crate::kg::AuxSchema;
use crate::kge::ModelKind;
use crate::matrix::Matrix;

/// Server-side recorder of one victim's uploads over the victim's entities.
pub struct ServerRecorder {
    victim: usize,
    rounds: BTreeSet<usize>,
    rows: Vec<usize>,
    ids: Vec<usize>,
    obs: SiObservables,
}

impl ServerRecorder {
    pub fn new(victim: usize, rounds: BTreeSet<usize>, model: ModelKind, n_relations: usize, aux: AuxSchema) -> Self {
        ServerRecorder {
            victim,
            rounds,
            rows: Vec::new(),
            ids: Vec::new(),
            obs: SiObservables {
                model,
                n_relations,
                aux,
                rounds: Vec::new(),
            },
        }
    }

    pub fn into_observables(self) -> SiObservables {
        self.obs
    }
}

impl RoundHook for ServerRecorder {
    fn role(&self) -> HookRole {
        HookRole::Server
    }

    fn on_start(&mut self, server: &ServerState) -> Result<()> {
        self.rows = (0..server.num_entities())
            .filter(|&r| server.holders[r].contains(&self.victim))
            .collect();
        self.ids = self.rows.iter().map(|&r| server.global_ids[r]).collect();
        if self.rows.is_empty() {
            return Err(Error::invalid(format!("client {} holds no entities", self.victim)));
        }
        Ok(())
    }

    fn on_uploads(&mut self, round: usize, uploads: &BTreeMap<usize, Matrix>) -> Result<()> {
        if !self.rounds.contains(&round) {
            return Ok(());
        }
        let up = uploads
            .get(&self.victim)
            .ok_or_else(|| Error::Protocol(format!("no upload from client {}", self.victim)))?;
        self.obs.rounds.push(SiRound {
            round,
            victim: EntityTable::new(self.ids.clone(), up.select_rows(&self.rows))?,
        });
        Ok(())
    }
}

/// Tail reversal schedule for the active attack.
#[derive(Clone, Debug, PartialEq)]
pub struct CiaPlan {
    /// global ids whose rows are negated at every attack round
    pub targets: Vec<usize>,
    /// rounds between reversal and measurement
    pub lag: usize,
}

/// Recorder running on the adversarial client. Captures the client's own
/// upload, relations and the broadcast at attack rounds, and with a
/// [`CiaPlan`] also negates target rows in its upload.
pub struct AdversaryRecorder {
    client: usize,
    rounds: BTreeSet<usize>,
    plan: Option<CiaPlan>,
    model: ModelKind,
    dim: usize,
    n_clients: usize,
    rows: Vec<usize>,
    ids: Vec<usize>,
    pending: BTreeMap<usize, (EntityTable, RelationTable)>,
    reversed: BTreeMap<usize, (Vec<usize>, RelationTable)>,
    cip: Vec<CipRound>,
    cia: Vec<CiaRound>,
}

impl AdversaryRecorder {
    pub fn new(client: usize, rounds: BTreeSet<usize>, plan: Option<CiaPlan>, model: ModelKind, dim: usize, n_clients: usize) -> Self {
        AdversaryRecorder {
            client,
            rounds,
            plan,
            model,
            dim,
            n_clients,
            rows: Vec::new(),
            ids: Vec::new(),
            pending: BTreeMap::new(),
            reversed: BTreeMap::new(),
            cip: Vec::new(),
            cia: Vec::new(),
        }
    }

    pub fn cip_observables(&self) -> CipObservables {
        CipObservables {
            model: self.model,
            dim: self.dim,
            n_clients: self.n_clients,
            rounds: self.cip.clone(),
        }
    }

    pub fn cia_observables(&self) -> CiaObservables {
        CiaObservables {
            model: self.model,
            dim: self.dim,
            n_clients: self.n_clients,
            rounds: self.cia.clone(),
        }
    }

    fn table(&self, m: &Matrix) -> Result<EntityTable> {
        EntityTable::new(self.ids.clone(), m.select_rows(&self.rows))
    }
}

impl RoundHook for AdversaryRecorder {
    fn role(&self) -> HookRole {
        HookRole::Client(self.client)
    }

    fn on_upload(&mut self, round: usize, view: &ClientView<'_>, upload: &mut Matrix) -> Result<()> {
        if self.rows.is_empty() {
            self.rows = view.server_rows.to_vec();
            self.ids = view.dataset.entity_global.clone();
        }
        if !self.rounds.contains(&round) {
            return Ok(());
        }
        let relations = RelationTable {
            ids: view.dataset.relation_global.clone(),
            rows: view.store.relations.clone(),
        };
        if let Some(plan) = &self.plan {
            let held: BTreeMap<usize, usize> = self.ids.iter().copied().zip(self.rows.iter().copied()).collect();
            let mut rows = Vec::new();
            let mut targets = Vec::new();
            for g in &plan.targets {
                if let Some(&r) = held.get(g) {
                    rows.push(r);
                    targets.push(*g);
                }
            }
            targets.sort_unstable();
            *upload = cia_reverse(upload, &rows)?;
            self.reversed.insert(round, (targets, relations.clone()));
        }
        let up = self.table(upload)?;
        self.pending.insert(round, (up, relations));
        Ok(())
    }

    fn on_broadcast(&mut self, round: usize, broadcast: &Matrix) -> Result<()> {
        if self.rows.is_empty() {
            return Ok(());
        }
        if let Some((upload, relations)) = self.pending.remove(&round) {
            let b = self.table(broadcast)?;
            self.cip.push(CipRound {
                round,
                upload,
                broadcast: b,
                relations,
            });
        }
        if let Some(plan) = &self.plan {
            if let Some(k) = round.checked_sub(plan.lag) {
                if let Some((targets, relations)) = self.reversed.remove(&k) {
                    let reversed = self
                        .cip
                        .iter()
                        .find(|c| c.round == k)
                        .map(|c| c.broadcast.clone())
                        .ok_or_else(|| Error::Protocol(format!("no broadcast recorded at round {k}")))?;
                    self.cia.push(CiaRound {
                        round: k,
                        lag: plan.lag,
                        targets,
                        reversed,
                        later: self.table(broadcast)?,
                        relations,
                    });
                }
            }
        }
        Ok(())
    }
}
