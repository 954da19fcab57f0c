//! Score functions and their partial derivatives on raw rows.
//!
//! Relation rows here are always in score form; for RotatE that is
//! `[cos θ.., sin θ..]`. [`phase_gradient`] maps a derivative with respect to
//! that form back onto the stored phases.

use super::{EmbeddingStore, ModelKind};
use crate::kg::Triple;

/// Plausibility of `t` under `store` (higher is more plausible).
pub fn score(store: &EmbeddingStore, t: Triple) -> f64 {
    score_rows(
        store.model,
        store.entity(t.head),
        &store.relation_view(t.rel),
        store.entity(t.tail),
    )
}

pub fn score_rows(model: ModelKind, h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    match model {
        ModelKind::TransE => -h
            .iter()
            .zip(r)
            .zip(t)
            .map(|((a, b), c)| {
                let e = a + b - c;
                e * e
            })
            .sum::<f64>()
            .sqrt(),
        ModelKind::DistMult => h.iter().zip(r).zip(t).map(|((a, b), c)| a * b * c).sum(),
        ModelKind::RotatE => {
            let d = h.len() / 2;
            let mut s = 0.0;
            for i in 0..d {
                let (hr, hi, c, sn, tr, ti) = (h[i], h[d + i], r[i], r[d + i], t[i], t[d + i]);
                let er = hr * c - hi * sn - tr;
                let ei = hr * sn + hi * c - ti;
                s += er * er + ei * ei;
            }
            -s.sqrt()
        }
        ModelKind::ComplEx => {
            let d = h.len() / 2;
            let mut s = 0.0;
            for i in 0..d {
                let (a, b, c, dd, x, y) = (h[i], h[d + i], r[i], r[d + i], t[i], t[d + i]);
                s += (a * c - b * dd) * x + (a * dd + b * c) * y;
            }
            s
        }
    }
}

/// Writes `∂f/∂h`, `∂f/∂r` (score form) and `∂f/∂t` into the buffers and
/// returns `f`. At the TransE/RotatE singular point `h∘r = t` all partials are 0.
pub fn score_grad_rows(
    model: ModelKind,
    h: &[f64],
    r: &[f64],
    t: &[f64],
    gh: &mut [f64],
    gr: &mut [f64],
    gt: &mut [f64],
) -> f64 {
    match model {
        ModelKind::TransE => {
            let mut n2 = 0.0;
            for i in 0..h.len() {
                let e = h[i] + r[i] - t[i];
                gh[i] = e;
                n2 += e * e;
            }
            let n = n2.sqrt();
            let inv = if n > 0.0 { 1.0 / n } else { 0.0 };
            for i in 0..h.len() {
                let e = gh[i] * inv;
                gh[i] = -e;
                gr[i] = -e;
                gt[i] = e;
            }
            -n
        }
        ModelKind::DistMult => {
            let mut f = 0.0;
            for i in 0..h.len() {
                gh[i] = r[i] * t[i];
                gr[i] = h[i] * t[i];
                gt[i] = h[i] * r[i];
                f += h[i] * r[i] * t[i];
            }
            f
        }
        ModelKind::RotatE => {
            let d = h.len() / 2;
            let mut n2 = 0.0;
            // stash residuals in gt, then scale everything once the norm is known
            for i in 0..d {
                let (hr, hi, c, sn, tr, ti) = (h[i], h[d + i], r[i], r[d + i], t[i], t[d + i]);
                let er = hr * c - hi * sn - tr;
                let ei = hr * sn + hi * c - ti;
                gt[i] = er;
                gt[d + i] = ei;
                n2 += er * er + ei * ei;
            }
            let n = n2.sqrt();
            let inv = if n > 0.0 { 1.0 / n } else { 0.0 };
            for i in 0..d {
                let (hr, hi, c, sn) = (h[i], h[d + i], r[i], r[d + i]);
                let er = gt[i] * inv;
                let ei = gt[d + i] * inv;
                gh[i] = -(er * c + ei * sn);
                gh[d + i] = -(-er * sn + ei * c);
                gr[i] = -(er * hr + ei * hi);
                gr[d + i] = -(-er * hi + ei * hr);
                gt[i] = er;
                gt[d + i] = ei;
            }
            -n
        }
        ModelKind::ComplEx => {
            let d = h.len() / 2;
            let mut f = 0.0;
            for i in 0..d {
                let (a, b, c, dd, x, y) = (h[i], h[d + i], r[i], r[d + i], t[i], t[d + i]);
                gh[i] = c * x + dd * y;
                gh[d + i] = -dd * x + c * y;
                gr[i] = a * x + b * y;
                gr[d + i] = -b * x + a * y;
                gt[i] = a * c - b * dd;
                gt[d + i] = a * dd + b * c;
                f += (a * c - b * dd) * x + (a * dd + b * c) * y;
            }
            f
        }
    }
}

/// Chain rule from `(cos θ, sin θ)` to `θ`: `∂f/∂θ = -sin θ ∂f/∂c + cos θ ∂f/∂s`.
pub fn phase_gradient(phases: &[f64], g_view: &[f64], out: &mut [f64]) {
    let d = phases.len();
    for i in 0..d {
        let (s, c) = phases[i].sin_cos();
        out[i] = -s * g_view[i] + c * g_view[d + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;
    use crate::matrix::Matrix;

    fn store(model: ModelKind, ents: Vec<f64>, rels: Vec<f64>, dim: usize) -> EmbeddingStore {
        let dr = model.real_dim(dim);
        let dp = model.relation_param_dim(dim);
        EmbeddingStore {
            model,
            dim,
            entities: Matrix::from_vec(ents.len() / dr, dr, ents),
            relations: Matrix::from_vec(rels.len() / dp, dp, rels),
        }
    }

    #[test]
    fn hand_computed_scores() {
        let s = store(ModelKind::TransE, vec![1., 0., 1., 1.], vec![0., 1.], 2);
        assert_eq!(score(&s, Triple::new(0, 0, 1)), 0.0);
        let s = store(ModelKind::TransE, vec![0., 0.], vec![3., 4.], 2);
        assert_eq!(score(&s, Triple::new(0, 0, 0)), -5.0);
        let s = store(ModelKind::DistMult, vec![1., 2., 3., 1.], vec![2., 0.5], 2);
        assert_eq!(score(&s, Triple::new(0, 0, 1)), 7.0);
        // h = 1, r = i (phase π/2), t = i
        let s = store(
            ModelKind::RotatE,
            vec![1., 0., 0., 1.],
            vec![std::f64::consts::FRAC_PI_2],
            1,
        );
        assert!(score(&s, Triple::new(0, 0, 1)).abs() < 1e-15);
        let s = store(ModelKind::ComplEx, vec![1., 0.], vec![1., 0.], 1);
        assert_eq!(score(&s, Triple::new(0, 0, 0)), 1.0);
    }

    #[test]
    fn complex_conjugates_the_tail() {
        // h = i, r = 1, t = i: Re(i · 1 · conj(i)) = 1; without conjugation it would be -1
        let s = store(ModelKind::ComplEx, vec![0., 1.], vec![1., 0.], 1);
        assert_eq!(score(&s, Triple::new(0, 0, 0)), 1.0);
    }

    #[test]
    fn transe_singular_point_has_zero_gradient() {
        let (h, r, t) = ([1.0, 2.0], [0.5, 0.5], [1.5, 2.5]);
        let (mut gh, mut gr, mut gt) = ([9.0; 2], [9.0; 2], [9.0; 2]);
        let f = score_grad_rows(ModelKind::TransE, &h, &r, &t, &mut gh, &mut gr, &mut gt);
        assert_eq!(f, 0.0);
        assert_eq!((gh, gr, gt), ([0.0; 2], [0.0; 2], [0.0; 2]));
    }
}
