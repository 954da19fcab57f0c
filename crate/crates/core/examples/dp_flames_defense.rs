//! Trains the same federation with and without DP-FLames and reports
//! utility, the privacy spent and where the budget stopped training.

use fkge_lab::dp::DpConfig;
use fkge_lab::eval::evaluate;
use fkge_lab::fed::{run_fkge, Defense, FedSetup, TrainParams};
use fkge_lab::kg::{generate_synthetic, partition_federated, split_public};
use fkge_lab::kge::LossParams;

fn main() -> fkge_lab::Result<()> {
    let syn = generate_synthetic(300, 12, 4000, 1)?;
    let (private, public) = split_public(&syn.graph, 0.1, 1)?;
    let p = partition_federated(&private, 3, 0.3, (0.8, 0.1, 0.1), 1)?;
    let params = TrainParams {
        dim: 32,
        batch: 16,
        lr: 0.2,
        rounds: 30,
        loss: LossParams {
            gamma: 4.0,
            ..LossParams::default()
        },
        seed: 1,
        ..TrainParams::default()
    };
    for budget in [None, Some(4.0), Some(16.0)] {
        let defense = budget.map(|epsilon_budget| {
            Defense::new(DpConfig {
                epsilon_budget,
                ..DpConfig::default()
            })
        });
        let out = run_fkge(
            FedSetup {
                clients: p.clients.clone(),
                params: params.clone(),
                defense,
                public: &public,
                keep_uploads: false,
            },
            &mut [],
        )?;
        let label = budget.map_or("no defense".to_string(), |e| format!("epsilon budget {e}"));
        println!("{label}: {} rounds, halt {:?}", out.history.len(), out.halt);
        for c in &out.clients {
            let m = evaluate(&c.store, &c.dataset.test, c.known_triples())?;
            let spent = match &c.ledger {
                Some(l) => format!(", epsilon {:.3} over {} events", l.to_dp(1e-5)?.epsilon, l.events().len()),
                None => String::new(),
            };
            println!("  client {}: test MRR {:.4}, sigma {:.3}{spent}", c.id(), m.mrr, c.sigma);
        }
    }
    Ok(())
}
