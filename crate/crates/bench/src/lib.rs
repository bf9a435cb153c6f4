//! Shared fixtures for the criterion benchmarks.

use eic_core::{GpPosterior, KernelSpec};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` uniform points in `[0,1]^dim`.
pub fn uniform_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// A posterior fitted to `n` noisy samples of a smooth bump, sized like a
/// late iteration of a 2-d run.
pub fn fitted_posterior(n: usize, dim: usize) -> GpPosterior {
    let xs = uniform_points(n, dim, 17);
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| (-x.iter().map(|v| (v - 0.4).powi(2)).sum::<f64>() * 8.0).exp())
        .collect();
    let kernel = KernelSpec::isotropic(1.0, 0.15, dim).expect("valid kernel");
    GpPosterior::fit_rows(&xs, &ys, 0.01, &kernel).expect("posterior fits")
}
