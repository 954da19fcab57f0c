//! Threshold sweep, precision/recall/F1 and ROC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::f1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// `(fpr, tpr)`, sorted by fpr
    pub roc: Vec<(f64, f64)>,
    pub best_f1: f64,
    pub best_tau: f64,
    pub auc: f64,
}

/// Evaluates `statistic >= τ` at `-∞`, every midpoint between consecutive
/// distinct values, and `+∞`. NaN statistics must be removed by the caller.
pub fn sweep_threshold(stats: &[f64], labels: &[bool]) -> Result<Sweep> {
    if stats.len() != labels.len() {
        return Err(Error::invalid("statistics and labels differ in length"));
    }
    if stats.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN statistic in sweep"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("sweep needs at least one member and one non-member"));
    }
    let mut idx: Vec<usize> = (0..stats.len()).collect();
    idx.sort_by(|&a, &b| stats[b].total_cmp(&stats[a]));

    // walk thresholds from +∞ downwards; each group of equal values flips at once
    let mut points = vec![SweepPoint {
        tau: f64::INFINITY,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    }];
    let mut roc = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let v = stats[idx[i]];
        while i < idx.len() && stats[idx[i]] == v {
            if labels[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tau = if i < idx.len() {
            let next = stats[idx[i]];
            let mid = v / 2.0 + next / 2.0;
            if mid.is_finite() {
                mid
            } else if v.is_infinite() && v > 0.0 {
                f64::MAX
            } else {
                next
            }
        } else {
            f64::NEG_INFINITY
        };
        // every value ≥ tau is predicted positive: exactly the values seen so far
        let tau = if i < idx.len() && tau <= stats[idx[i]] { next_up(stats[idx[i]]) } else { tau };
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / pos as f64;
        points.push(SweepPoint {
            tau,
            precision,
            recall,
            f1: f1(precision, recall),
        });
        roc.push((fp as f64 / neg as f64, recall));
    }
    let mut auc = 0.0;
    for w in roc.windows(2) {
        auc += (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0;
    }
    let best = points
        .iter()
        .copied()
        .fold(points[0], |b, p| if p.f1 > b.f1 { p } else { b });
    Ok(Sweep {
        points,
        roc,
        best_f1: best.f1,
        best_tau: best.tau,
        auc,
    })
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let b = x.to_bits();
    f64::from_bits(if x > 0.0 { b + 1 } else { b - 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let s = sweep_threshold(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(s.best_f1, 1.0);
        assert!(s.roc.contains(&(0.0, 1.0)));
        assert_eq!(s.auc, 1.0);
        assert!((s.best_tau - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uninformative_statistics() {
        let s = sweep_threshold(&[1.0; 4], &[true, true, false, false]).unwrap();
        assert!((s.best_f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.auc, 0.5);
        assert_eq!(s.best_tau, f64::NEG_INFINITY);
    }

    #[test]
    fn thresholds_reproduce_decisions() {
        let stats = [3.0, f64::INFINITY, -1.0, 3.0, 0.5, f64::NEG_INFINITY];
        let labels = [true, true, false, false, true, false];
        let s = sweep_threshold(&stats, &labels).unwrap();
        for p in &s.points {
            let tp = stats.iter().zip(&labels).filter(|(x, &l)| **x >= p.tau && l).count();
            let pp = stats.iter().filter(|x| **x >= p.tau).count();
            let prec = if pp == 0 { 0.0 } else { tp as f64 / pp as f64 };
            // τ = +∞ predicts nothing by convention, even for +∞ statistics
            if p.tau != f64::INFINITY {
                assert_eq!(prec, p.precision, "tau {}", p.tau);
            }
        }
        assert!(sweep_threshold(&[1.0], &[true]).is_err());
    }
}
