//! Seeded synthetic corpora for index benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn unit(mut v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    for x in &mut v {
        *x = (f64::from(*x) / n) as f32;
    }
    v
}

/// `n` unit vectors drawn uniformly from the sphere.
pub fn sphere(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| unit((0..dim).map(|_| rng.sample(StandardNormal)).collect())).collect()
}

/// Mixture of `topics` random directions on the sphere. Each point is a
/// random center plus isotropic Gaussian noise of per-dimension scale
/// `sigma`, renormalized. Returns `(points, queries)` drawn from the same
/// mixture.
pub fn topic_mixture(
    n: usize,
    n_queries: usize,
    dim: usize,
    topics: usize,
    sigma: f32,
    seed: u64,
) -> (Vec<Vec<f32>>, Vec<Vec<f32>>) {
    let centers = sphere(topics, dim, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let draw = |rng: &mut ChaCha8Rng| {
        let c = &centers[rng.random_range(0..topics)];
        unit(c.iter().map(|&x| x + sigma * rng.sample::<f32, _>(StandardNormal)).collect())
    };
    let points = (0..n).map(|_| draw(&mut rng)).collect();
    let queries = (0..n_queries).map(|_| draw(&mut rng)).collect();
    (points, queries)
}
