//! An active client negates its rows of the candidates' tail entities and
//! watches how the victim pulls them back in the next broadcast.

use std::collections::BTreeSet;

use fkge_lab::attacks::{cia_run, AdversaryRecorder, CiaPlan};
use fkge_lab::fed::{run_fkge, FedSetup, TrainParams};
use fkge_lab::kg::{build_candidate_set_within, generate_synthetic, partition_federated, split_public};
use fkge_lab::kge::{LossParams, ModelKind};

fn main() -> fkge_lab::Result<()> {
    let syn = generate_synthetic(300, 12, 4000, 1)?;
    let (private, public) = split_public(&syn.graph, 0.1, 1)?;
    let p = partition_federated(&private, 3, 0.5, (0.8, 0.1, 0.1), 1)?;
    let (victim, adversary) = (&p.clients[0], &p.clients[1]);
    let shared: BTreeSet<usize> = victim
        .entity_global
        .iter()
        .copied()
        .filter(|e| adversary.entity_global.contains(e))
        .collect();
    let candidates = build_candidate_set_within(victim, &shared, 100, 100, 1)?;
    let targets: BTreeSet<usize> = candidates.candidates.iter().map(|c| c.triple.tail).collect();

    let model = ModelKind::RotatE;
    let rounds: BTreeSet<usize> = (1..=10).map(|i| 5 * i).collect();
    let plan = CiaPlan {
        targets: targets.into_iter().collect(),
        lag: 1,
    };
    let mut adv = AdversaryRecorder::new(1, rounds, Some(plan), model, 32, 3);
    run_fkge(
        FedSetup {
            clients: p.clients.clone(),
            params: TrainParams {
                model,
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

    let report = cia_run(&adv.cia_observables(), &candidates)?;
    for t in &report.traces {
        println!("round {:>2}: best F1 {:.3}, AUC {:.3}", t.round, t.summary.best_f1, t.summary.auc);
    }
    println!("best F1 {:.3} in round {}", report.best_f1, report.best_round);
    Ok(())
}
