//! Observation points for attacks.
//!
//! A hook declares a role, and the simulator only ever hands it what that
//! role may see:
//!
//! | role | may see | may change |
//! |------|---------|------------|
//! | server | every upload, every broadcast | nothing |
//! | client `c` | its own dataset, local store and upload; broadcasts | its own upload |

use std::collections::BTreeMap;

use super::ServerState;
use crate::error::Result;
use crate::kg::ClientDataset;
use crate::kge::EmbeddingStore;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HookRole {
    Server,
    Client(usize),
}

/// A client's own state, as exposed to a hook running on that client.
pub struct ClientView<'a> {
    pub dataset: &'a ClientDataset,
    pub store: &'a EmbeddingStore,
    /// local entity id → row of the global table
    pub server_rows: &'a [usize],
}

pub trait RoundHook {
    fn role(&self) -> HookRole;

    /// Server role: the aligned table before round 1.
    fn on_start(&mut self, _server: &ServerState) -> Result<()> {
        Ok(())
    }

    /// Client role: the client's upload, just before it is sent.
    fn on_upload(&mut self, _round: usize, _view: &ClientView<'_>, _upload: &mut Matrix) -> Result<()> {
        Ok(())
    }

    /// Server role: all uploads of the round.
    fn on_uploads(&mut self, _round: usize, _uploads: &BTreeMap<usize, Matrix>) -> Result<()> {
        Ok(())
    }

    /// Both roles: the aggregated table sent to every client.
    fn on_broadcast(&mut self, _round: usize, _broadcast: &Matrix) -> Result<()> {
        Ok(())
    }
}
