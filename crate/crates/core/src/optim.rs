//! Row-sparse optimizers. Only rows present in the gradient buffer move.

use serde::{Deserialize, Serialize};

use crate::kge::{EmbeddingStore, GradBuffer};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Plain SGD or lazy Adam (moments of untouched rows are left alone; bias
/// correction uses the global step count).
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    moments: Option<[Matrix; 4]>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, store: &EmbeddingStore) -> Self {
        let moments = (kind == OptimizerKind::Adam).then(|| {
            let e = || Matrix::zeros(store.entities.rows(), store.entities.cols());
            let r = || Matrix::zeros(store.relations.rows(), store.relations.cols());
            [e(), e(), r(), r()]
        });
        Optimizer {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments,
        }
    }

    pub fn step(&mut self, store: &mut EmbeddingStore, g: &GradBuffer) {
        self.step += 1;
        match &mut self.moments {
            None => {
                for &e in g.touched_entities() {
                    for (x, d) in store.entities.row_mut(e).iter_mut().zip(g.entities.row(e)) {
                        *x -= self.lr * d;
                    }
                }
                for &r in g.touched_relations() {
                    for (x, d) in store.relations.row_mut(r).iter_mut().zip(g.relations.row(r)) {
                        *x -= self.lr * d;
                    }
                }
            }
            Some([me, ve, mr, vr]) => {
                let t = self.step as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
                let update = |x: &mut [f64], m: &mut [f64], v: &mut [f64], d: &[f64]| {
                    for i in 0..x.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * d[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * d[i] * d[i];
                        x[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                };
                for &e in g.touched_entities() {
                    update(store.entities.row_mut(e), me.row_mut(e), ve.row_mut(e), g.entities.row(e));
                }
                for &r in g.touched_relations() {
                    update(store.relations.row_mut(r), mr.row_mut(r), vr.row_mut(r), g.relations.row(r));
                }
            }
        }
    }
}
