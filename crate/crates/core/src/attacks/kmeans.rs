//! Lloyd's k-means with k-means++ seeding.

use rand::Rng as _;

use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centers: Matrix,
    pub assign: Vec<usize>,
    pub sizes: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center (lowest index on ties) and the squared distance.
pub fn nearest(centers: &Matrix, p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centers.iter_rows().enumerate() {
        let d = sq_dist(row, p);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_centers(points: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = points.rows();
    let mut centers = Matrix::zeros(k, points.cols());
    centers.set_row(0, points.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.set_row(c, points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(c)));
        }
    }
    centers
}

/// Clusters the rows of `points` into `k` groups. Requires `points.rows() >= k >= 1`.
pub fn kmeans(points: &Matrix, k: usize, max_iter: usize, rng: &mut Rng) -> KMeans {
    assert!(k >= 1 && points.rows() >= k, "k-means needs at least k points");
    let n = points.rows();
    let dim = points.cols();
    let mut centers = seed_centers(points, k, rng);
    let mut assign = vec![usize::MAX; n];
    let mut sizes = vec![0; k];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest(&centers, points.row(i));
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        let mut sums = Matrix::zeros(k, dim);
        sizes = vec![0; k];
        for i in 0..n {
            sizes[assign[i]] += 1;
            for (s, x) in sums.row_mut(assign[i]).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                let inv = 1.0 / sizes[c] as f64;
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        if !changed {
            break;
        }
    }
    KMeans {
        centers,
        assign,
        sizes,
        iterations,
    }
}
