#![allow(dead_code)]

use eic_core::algorithms::step;
use eic_core::gp::KernelSpec;
use eic_core::testbed::observe;
use eic_core::{AlgorithmState, Objective, Result, TrialConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Dense-inverse posterior: mean and variance straight from the formulas.
pub fn dense_predict(
    x: &[Vec<f64>],
    y: &[f64],
    noise_var: f64,
    spec: &KernelSpec,
    q: &[f64],
) -> (f64, f64) {
    let n = x.len();
    let k = |a: &[f64], b: &[f64]| {
        let s: f64 = a
            .iter()
            .zip(b)
            .zip(spec.length_scales())
            .map(|((u, v), h)| ((u - v) / h).powi(2))
            .sum();
        spec.tau_sq() * (-0.5 * s).exp()
    };
    let mut kxx = DMatrix::from_fn(n, n, |i, j| k(&x[i], &x[j]));
    for i in 0..n {
        kxx[(i, i)] += noise_var;
    }
    let inv = kxx.try_inverse().expect("invertible");
    let kq = DVector::from_fn(n, |i, _| k(q, &x[i]));
    let yv = DVector::from_column_slice(y);
    let mean = (kq.transpose() * &inv * yv)[(0, 0)];
    let var = k(q, q) - (kq.transpose() * &inv * &kq)[(0, 0)];
    (mean, var)
}

/// Monte-Carlo mean and standard error of `g(Z)`, Z ~ N(mean, sd²).
pub fn mc_normal<R: Rng, G: Fn(f64) -> f64>(
    mean: f64,
    sd: f64,
    samples: usize,
    rng: &mut R,
    g: G,
) -> (f64, f64) {
    let mut s = 0.0;
    let mut s2 = 0.0;
    for _ in 0..samples {
        let z: f64 = StandardNormal.sample(rng);
        let v = g(mean + sd * z);
        s += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let m = s / n;
    let var = (s2 / n - m * m).max(0.0) * n / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Brute-force fill distance of `design` over a `g×g` grid of [0,1]².
pub fn fill_distance_2d(design: &[Vec<f64>], g: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..g {
        for j in 0..g {
            let p = [i as f64 / (g - 1) as f64, j as f64 / (g - 1) as f64];
            let nearest = design
                .iter()
                .map(|d| ((d[0] - p[0]).powi(2) + (d[1] - p[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
    }
    worst
}

/// f(u) = −(u − c)², maximum 0 at c.
pub struct Quadratic1d {
    pub centre: f64,
}

impl Objective for Quadratic1d {
    fn name(&self) -> &str {
        "QUAD1"
    }
    fn dim(&self) -> usize {
        1
    }
    fn evaluate(&self, u: &[f64]) -> Result<f64> {
        Ok(-(u[0] - self.centre).powi(2))
    }
    fn optimum_value(&self) -> f64 {
        0.0
    }
}

/// f ≡ 0 in d dimensions.
pub struct Flat {
    pub dim: usize,
}

impl Objective for Flat {
    fn name(&self) -> &str {
        "FLAT"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, _u: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
    fn optimum_value(&self) -> f64 {
        0.0
    }
}

/// Records `points` (with noise) and refits.
pub fn seed_state<R: Rng>(
    state: &mut AlgorithmState,
    objective: &dyn Objective,
    points: &[Vec<f64>],
    rng: &mut R,
) {
    for p in points {
        let y = observe(objective, p, state.noise_sd, rng).unwrap();
        state.record(p, y).unwrap();
    }
    state.refit().unwrap();
}

/// Steps the state until `until` observations, returning the decisions' modes.
pub fn drive<R: Rng>(
    state: &mut AlgorithmState,
    cfg: &TrialConfig,
    objective: &dyn Objective,
    until: usize,
    rng: &mut R,
) -> Vec<eic_core::DecisionMode> {
    let mut modes = Vec::new();
    while state.iteration < until {
        let d = step(state, cfg).unwrap();
        modes.push(d.mode);
        let y = observe(objective, &d.point, state.noise_sd, rng).unwrap();
        state.record(&d.point, y).unwrap();
        state.refit().unwrap();
    }
    modes
}

/// Evenly spaced 1-d design points (cell centres).
pub fn centres_1d(m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|k| vec![(2 * k + 1) as f64 / (2 * m) as f64]).collect()
}
