//! Top-k row selection with a data-dependent `k` and a release test.
//!
//! Rows are sorted by norm (descending, ties by id). A Gumbel report-noisy-max
//! over adjacent gaps picks `k`, restricted to `[B, 2B]`. The chosen gap is
//! then checked by a noisy propose-test-release step; if it is not clearly
//! above `C2`, nothing is released.

use rand_distr::{Distribution, Normal, Open01};

use super::DpConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionOutcome {
    /// Selected row ids, largest norm first; `None` is `⊥`.
    pub released: Option<Vec<usize>>,
    pub k: usize,
    pub d_k: f64,
    /// Noisy test statistic (NaN for the trivial case).
    pub d_hat: f64,
    pub passed: bool,
    /// `n <= 2B`: every row is selected and no mechanism runs.
    pub trivial: bool,
}

fn gumbel(scale: f64, rng: &mut Rng) -> f64 {
    let u: f64 = Open01.sample(rng);
    -scale * (-u.ln()).ln()
}

/// Noisy propose-test-release check of a gap `d_k`: returns the noisy
/// statistic and whether it clears `C2`.
pub fn release_test(d_k: f64, cfg: &DpConfig, rng: &mut Rng) -> (f64, bool) {
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    let shift = cfg.sigma_p * cfg.c2 * (2.0 * (1.0 / cfg.delta_t).ln()).sqrt();
    let d_hat = d_k.max(cfg.c2) + cfg.sigma_p * cfg.c2 * z - shift;
    (d_hat, d_hat > cfg.c2)
}

/// Runs the selection over dense row norms (absent rows have norm 0).
pub fn private_selection(norms: &[f64], expected_batch: usize, cfg: &DpConfig, rng: &mut Rng) -> Result<SelectionOutcome> {
    let b = expected_batch;
    if b < 1 {
        return Err(Error::invalid("selection needs B >= 1"));
    }
    let n = norms.len();
    if n <= 2 * b {
        return Ok(SelectionOutcome {
            released: Some((0..n).collect()),
            k: n,
            d_k: 0.0,
            d_hat: f64::NAN,
            passed: true,
            trivial: true,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| norms[c].total_cmp(&norms[a]).then(a.cmp(&c)));
    let sorted = |j: usize| if j <= n { norms[order[j - 1]] } else { 0.0 };

    // j ranges over [B, 2B]; every other gap carries a -inf regularizer
    let scale = 2.0 * cfg.c2 * cfg.sigma_r;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for j in b..=2 * b {
        let v = sorted(j) - sorted(j + 1) + gumbel(scale, rng);
        if v > best.0 {
            best = (v, j);
        }
    }
    let k = best.1;
    let d_k = sorted(k) - sorted(k + 1);
    let (d_hat, passed) = release_test(d_k, cfg, rng);
    Ok(SelectionOutcome {
        released: passed.then(|| order[..k].to_vec()),
        k,
        d_k,
        d_hat,
        passed,
        trivial: false,
    })
}
