//! Trains a plain federation of three TransE clients and compares the final
//! filtered MRR with untrained embeddings.

use fkge_lab::eval::evaluate;
use fkge_lab::fed::{run_fkge, FedSetup, TrainParams};
use fkge_lab::kg::{generate_synthetic, partition_federated, split_public};
use fkge_lab::kge::{EmbeddingStore, LossParams, ModelKind};
use fkge_lab::rng::stream;

fn main() -> fkge_lab::Result<()> {
    let syn = generate_synthetic(300, 12, 4000, 1)?;
    let (private, public) = split_public(&syn.graph, 0.1, 1)?;
    let p = partition_federated(&private, 3, 0.3, (0.8, 0.1, 0.1), 1)?;
    let params = TrainParams {
        model: ModelKind::TransE,
        dim: 32,
        batch: 16,
        lr: 0.2,
        rounds: 30,
        local_iters: 20,
        loss: LossParams {
            gamma: 4.0,
            ..LossParams::default()
        },
        seed: 1,
        ..TrainParams::default()
    };
    let out = run_fkge(
        FedSetup {
            clients: p.clients,
            params: params.clone(),
            defense: None,
            public: &public,
            keep_uploads: false,
        },
        &mut [],
    )?;
    for rec in out.history.iter().filter(|r| !r.valid_mrr.is_empty()) {
        println!("round {:>3}: validation MRR {:?}", rec.round, rec.valid_mrr);
    }
    for c in &out.clients {
        let trained = evaluate(&c.store, &c.dataset.test, c.known_triples())?;
        let untrained = EmbeddingStore::random(
            params.model,
            params.dim,
            c.store.num_entities(),
            c.store.num_relations(),
            &mut stream(99, &[c.id() as u64]),
        );
        let baseline = evaluate(&untrained, &c.dataset.test, c.known_triples())?;
        println!(
            "client {}: test MRR {:.4}, Hits@10 {:.3} (untrained MRR {:.4})",
            c.id(),
            trained.mrr,
            trained.hits10,
            baseline.mrr
        );
    }
    Ok(())
}
