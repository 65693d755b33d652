//! Seeded k-means with k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::sq_dist;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves further than this (Euclidean).
    pub tol: f32,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, max_iter: 25, tol: 1e-4, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Row-major `k × dim`.
    pub centroids: Vec<f32>,
    /// Nearest centroid of every row under the final centroids.
    pub assignments: Vec<u32>,
    pub iterations: usize,
}

/// Nearest centroid by squared L2; ties go to the lower index.
pub fn nearest(point: &[f32], centroids: &[f32], dim: usize) -> (u32, f32) {
    let mut best = (0u32, f32::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

fn assign(data: &[f32], centroids: &[f32], dim: usize) -> Vec<(u32, f32)> {
    data.par_chunks_exact(dim).map(|p| nearest(p, centroids, dim)).collect()
}

fn init_plus_plus(data: &[f32], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = data.par_chunks_exact(dim).map(|p| f64::from(sq_dist(p, row(chosen[0])))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // Every row coincides with a centroid: take unchosen rows in order.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        let c = row(next);
        d2.par_iter_mut()
            .zip(data.par_chunks_exact(dim))
            .for_each(|(w, p)| *w = w.min(f64::from(sq_dist(p, c))));
    }
    chosen.iter().flat_map(|&i| row(i).iter().copied()).collect()
}

/// Lloyd iterations over row-major `data` (`n × dim`, `n ≥ k ≥ 1`).
pub fn fit(data: &[f32], dim: usize, params: KMeansParams) -> KMeans {
    let n = data.len() / dim;
    let k = params.k;
    assert!(k >= 1 && n >= k, "k-means needs n >= k >= 1 (n = {n}, k = {k})");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = init_plus_plus(data, dim, k, &mut rng);
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        let assigned = assign(data, &centroids, dim);
        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in assigned.iter().enumerate() {
            let c = c as usize;
            counts[c] += 1;
            for d in 0..dim {
                sums[c * dim + d] += f64::from(data[i * dim + d]);
            }
        }

        let mut next = vec![0f32; k * dim];
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    next[c * dim + d] = (sums[c * dim + d] / counts[c] as f64) as f32;
                }
            } else {
                // Reseed an empty cluster with the row farthest from its centroid.
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| assigned[a].1.total_cmp(&assigned[b].1).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken.push(far);
                next[c * dim..(c + 1) * dim].copy_from_slice(&data[far * dim..(far + 1) * dim]);
            }
        }

        let shift = centroids
            .chunks_exact(dim)
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0f32, f32::max);
        centroids = next;
        if shift < params.tol {
            break;
        }
    }

    let assignments = assign(data, &centroids, dim).into_iter().map(|(c, _)| c).collect();
    KMeans { centroids, assignments, iterations }
}
