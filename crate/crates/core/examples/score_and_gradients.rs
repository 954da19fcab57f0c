//! Scores one triple under every model and checks the analytic gradient of
//! the positive loss against a central difference.

use fkge_lab::kg::Triple;
use fkge_lab::kge::{grad_positive, loss_positive, EmbeddingStore, LossParams, ModelKind};
use fkge_lab::rng::stream;

fn main() {
    let params = LossParams {
        gamma: 4.0,
        n_neg: 1,
        adv_temp: 1.0,
    };
    let t = Triple::new(0, 0, 1);
    for model in ModelKind::ALL {
        let mut store = EmbeddingStore::random(model, 4, 2, 1, &mut stream(1, &[model.tag() as u64]));
        let g = grad_positive(&store, t, &params);
        let analytic = g.rows[&0][0];
        let h = 1e-6;
        let x = store.entities.row(0)[0];
        store.entities.row_mut(0)[0] = x + h;
        let up = loss_positive(&store, t, &params);
        store.entities.row_mut(0)[0] = x - h;
        let down = loss_positive(&store, t, &params);
        store.entities.row_mut(0)[0] = x;
        println!(
            "{:<9} score {:>9.5}  loss {:.5}  dL/dh0 analytic {:>10.6} numeric {:>10.6}  rows touched {}",
            model.name(),
            store.score(t),
            loss_positive(&store, t, &params),
            analytic,
            (up - down) / (2.0 * h),
            g.rows.len()
        );
    }
}
