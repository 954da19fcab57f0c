//! The server records the victim's uploads every five rounds and infers
//! which candidate triples the victim trains on.

use std::collections::BTreeSet;

use fkge_lab::attacks::{si_run, ServerRecorder, SiConfig};
use fkge_lab::fed::{run_fkge, FedSetup, TrainParams};
use fkge_lab::kg::{build_candidate_set, generate_synthetic, partition_federated, split_public};
use fkge_lab::kge::{LossParams, ModelKind};

fn main() -> fkge_lab::Result<()> {
    let syn = generate_synthetic(300, 12, 4000, 1)?;
    let (private, public) = split_public(&syn.graph, 0.1, 1)?;
    let p = partition_federated(&private, 3, 0.5, (0.8, 0.1, 0.1), 1)?;
    let candidates = build_candidate_set(&p.clients[0], 100, 100, 1)?;

    let rounds: BTreeSet<usize> = (1..=10).map(|i| 5 * i).collect();
    let mut server = ServerRecorder::new(0, rounds, ModelKind::TransE, syn.graph.num_relations(), syn.aux.clone());
    run_fkge(
        FedSetup {
            clients: p.clients,
            params: TrainParams {
                dim: 32,
                batch: 16,
                lr: 0.2,
                loss: LossParams {
                    gamma: 4.0,
                    ..LossParams::default()
                },
                seed: 1,
                ..TrainParams::default()
            },
            defense: None,
            public: &public,
            keep_uploads: false,
        },
        &mut [&mut server],
    )?;

    let report = si_run(&server.into_observables(), &candidates, &SiConfig::default())?;
    for t in &report.traces {
        println!(
            "round {:>2}: best F1 {:.3} at tau {:.3}, AUC {:.3}",
            t.round, t.summary.best_f1, t.summary.best_tau, t.summary.auc
        );
    }
    println!("best F1 {:.3} in round {}", report.best_f1, report.best_round);
    Ok(())
}
