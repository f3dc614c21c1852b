//! Seeded k-means++ with Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{MrqError, Result};
use crate::linalg::{l2_sq, Matrix};

pub const DEFAULT_MAX_ITERS: usize = 25;
const TOLERANCE: f64 = 1e-4;
const ASSIGN_CHUNK: usize = 256;

/// Cluster count for a corpus of `n` vectors when none is given.
pub fn default_k(n: usize) -> usize {
    if n >= 1_000_000 {
        4096
    } else {
        (n / 250).max(16).min(n.max(1))
    }
}

#[derive(Clone, Debug)]
pub struct KMeans {
    pub centroids: Matrix,
    /// Nearest centroid of every row under the final centroids.
    pub assignments: Vec<u32>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
}

impl KMeans {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn wcss(&self) -> f64 {
        self.wcss_history.last().copied().unwrap_or(0.0)
    }
}

/// Index and squared distance of the nearest centroid; ties go to the lower
/// index.
pub fn nearest_centroid(centroids: &Matrix, v: &[f32]) -> (usize, f32) {
    let mut best = (0, f32::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = l2_sq(v, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Nearest-centroid assignment of every row with its squared distance.
pub fn assign(data: &Matrix, centroids: &Matrix) -> (Vec<u32>, Vec<f32>) {
    let dim = data.cols();
    let pairs: Vec<(u32, f32)> = data
        .as_slice()
        .par_chunks(ASSIGN_CHUNK * dim.max(1))
        .flat_map_iter(|chunk| {
            chunk.chunks(dim.max(1)).map(|row| {
                let (j, d) = nearest_centroid(centroids, row);
                (j as u32, d)
            })
        })
        .collect();
    pairs.into_iter().unzip()
}

pub fn kmeans(data: &Matrix, k: usize, max_iters: usize, seed: u64) -> Result<KMeans> {
    let n = data.rows();
    if k == 0 {
        return Err(MrqError::config("k must be at least 1"));
    }
    if k > n {
        return Err(MrqError::config(format!("k = {k} exceeds {n} data points")));
    }
    if data.cols() == 0 {
        return Err(MrqError::config("data has zero columns"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(data, k, &mut rng);
    let mut history = Vec::new();

    loop {
        let (assignments, dists) = assign(data, &centroids);
        let wcss: f64 = dists.iter().map(|&d| d as f64).sum();
        let converged = match history.last() {
            Some(&prev) => prev <= 0.0 || (prev - wcss) / prev < TOLERANCE,
            None => wcss == 0.0,
        };
        history.push(wcss);
        if converged || history.len() > max_iters {
            return Ok(KMeans {
                centroids,
                assignments,
                wcss_history: history,
            });
        }
        centroids = update(data, &assignments, &dists, k);
    }
}

fn plus_plus(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = data.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut is_chosen = vec![false; n];
    is_chosen[chosen[0]] = true;
    let mut min_d: Vec<f64> = data
        .iter_rows()
        .map(|r| l2_sq(r, data.row(chosen[0])) as f64)
        .collect();
    while chosen.len() < k {
        let total: f64 = min_d.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in min_d.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the target just past the final sum.
            pick.unwrap_or_else(|| min_d.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every point coincides with a chosen one.
            is_chosen.iter().position(|c| !c).unwrap()
        };
        is_chosen[next] = true;
        chosen.push(next);
        let c = data.row(next);
        min_d
            .par_iter_mut()
            .zip(data.as_slice().par_chunks(data.cols()))
            .for_each(|(m, r)| *m = m.min(l2_sq(r, c) as f64));
    }
    data.select_rows(&chosen)
}

fn update(data: &Matrix, assignments: &[u32], dists: &[f32], k: usize) -> Matrix {
    let dim = data.cols();
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (row, &a) in data.iter_rows().zip(assignments) {
        let a = a as usize;
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row) {
            *s += *v as f64;
        }
    }
    let mut out = Matrix::zeros(k, dim);
    for j in 0..k {
        if counts[j] > 0 {
            let inv = 1.0 / counts[j] as f64;
            for (o, s) in out.row_mut(j).iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                *o = (s * inv) as f32;
            }
        }
    }
    // Re-seed each empty cluster at the farthest member of the currently
    // largest one, which then gives that member up.
    let mut taken = vec![false; data.rows()];
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let largest = (0..k)
            .max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
            .unwrap();
        let far = (0..data.rows())
            .filter(|&i| assignments[i] as usize == largest && !taken[i])
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        if let Some(i) = far {
            taken[i] = true;
            out.row_mut(j).copy_from_slice(data.row(i));
            counts[largest] -= 1;
            counts[j] = 1;
        }
    }
    out
}
