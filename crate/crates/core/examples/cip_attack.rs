//! A passive client compares its own upload with the broadcast, recovers
//! the peers' rows on shared entities and tests candidate triples.

use std::collections::BTreeSet;

use fkge_lab::attacks::{cip_run, AdversaryRecorder};
use fkge_lab::fed::{run_fkge, FedSetup, TrainParams};
use fkge_lab::kg::{build_candidate_set_within, generate_synthetic, partition_federated, split_public};
use fkge_lab::kge::{LossParams, ModelKind};

fn main() -> fkge_lab::Result<()> {
    let syn = generate_synthetic(300, 12, 4000, 1)?;
    let (private, public) = split_public(&syn.graph, 0.1, 1)?;
    let p = partition_federated(&private, 3, 0.5, (0.8, 0.1, 0.1), 1)?;
    let (victim, adversary) = (&p.clients[0], &p.clients[1]);
    // the adversary can only judge triples whose entities it also holds
    let shared: BTreeSet<usize> = victim
        .entity_global
        .iter()
        .copied()
        .filter(|e| adversary.entity_global.contains(e))
        .collect();
    let candidates = build_candidate_set_within(victim, &shared, 100, 100, 1)?;

    let rounds: BTreeSet<usize> = (1..=10).map(|i| 5 * i).collect();
    let mut adv = AdversaryRecorder::new(1, rounds, None, ModelKind::TransE, 32, 3);
    run_fkge(
        FedSetup {
            clients: p.clients.clone(),
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
        &mut [&mut adv],
    )?;

    let report = cip_run(&adv.cip_observables(), &candidates)?;
    for t in &report.traces {
        println!(
            "round {:>2}: best F1 {:.3}, AUC {:.3}, {} candidates outside the detected overlap",
            t.round, t.summary.best_f1, t.summary.auc, t.not_evaluable
        );
    }
    println!("best F1 {:.3} in round {}", report.best_f1, report.best_round);
    Ok(())
}
