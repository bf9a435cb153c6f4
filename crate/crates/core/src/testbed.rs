//! Analytic benchmark objectives on the unit cube, written for maximization.
//!
//! Each function is defined on its native box and evaluated after an affine
//! map from `[0,1]^d`. The scaling constants put the values at roughly zero
//! mean and unit spread over the box, except Ackley which is used unscaled.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How far above the declared optimum an evaluation may land before it is
/// treated as a transcription error. The declared optima are rounded.
pub const OPTIMUM_SLACK: f64 = 1e-2;

/// A black-box objective on `[0,1]^d` with a known maximum value.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Noise-free value at unit-cube point `u`.
    fn evaluate(&self, u: &[f64]) -> Result<f64>;

    /// f(x*).
    fn optimum_value(&self) -> f64;

    /// f(x*) − f(u), clamped at zero within [`OPTIMUM_SLACK`].
    fn instantaneous_regret(&self, u: &[f64]) -> Result<f64> {
        let r = self.optimum_value() - self.evaluate(u)?;
        if r < -OPTIMUM_SLACK {
            return Err(Error::Consistency(format!(
                "{} evaluates {} above its optimum at {u:?}",
                self.name(),
                -r
            )));
        }
        Ok(r.max(0.0))
    }
}

/// y = f(u) + ε, ε ~ N(0, noise_sd²) drawn from `rng`.
pub fn observe<O, R>(objective: &O, u: &[f64], noise_sd: f64, rng: &mut R) -> Result<f64>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid(format!("noise sd must be >= 0, got {noise_sd}")));
    }
    let f = objective.evaluate(u)?;
    if noise_sd == 0.0 {
        return Ok(f);
    }
    let eps: f64 = StandardNormal.sample(rng);
    Ok(f + noise_sd * eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FunctionId {
    Schwefel2,
    Eggholder2,
    Ackley2,
    Levy4,
    Griewank6,
    Hartmann6,
}

impl FunctionId {
    pub const ALL: [FunctionId; 6] = [
        FunctionId::Schwefel2,
        FunctionId::Eggholder2,
        FunctionId::Ackley2,
        FunctionId::Levy4,
        FunctionId::Griewank6,
        FunctionId::Hartmann6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionId::Schwefel2 => "SCHWEFEL2",
            FunctionId::Eggholder2 => "EGGHOLDER2",
            FunctionId::Ackley2 => "ACKLEY2",
            FunctionId::Levy4 => "LEVY4",
            FunctionId::Griewank6 => "GRIEWANK6",
            FunctionId::Hartmann6 => "HARTMANN6",
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    /// Accepts `ACKLEY2`, `ackley2`, `Ackley-2`, `ackley_2`.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_uppercase();
        FunctionId::ALL
            .into_iter()
            .find(|id| id.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown test function '{s}'")))
    }
}

/// One of the six benchmark functions together with its box and optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    id: FunctionId,
    bounds: Vec<(f64, f64)>,
    optimum_point: Vec<f64>,
    optimum_value: f64,
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn schwefel(x: &[f64]) -> f64 {
    let s: f64 = x
        .iter()
        .map(|xi| {
            let w = 500.0 * xi;
            w * w.abs().sqrt().sin()
        })
        .sum();
    -(418.9829 * 2.0 - s - 838.57) / 274.3
}

fn eggholder(x: &[f64]) -> f64 {
    let (w1, w2) = (512.0 * x[0], 512.0 * x[1]);
    let raw = -(w2 + 47.0) * (w2 + w1 / 2.0 + 47.0).abs().sqrt().sin()
        - w1 * (w1 - (w2 + 47.0)).abs().sqrt().sin();
    -(raw - 1.96) / 347.31
}

fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq: f64 = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs: f64 = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    20.0 * (-0.2 * sq.sqrt()).exp() + cs.exp() - 20.0 - E
}

fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let mut s = (PI * w[0]).sin().powi(2);
    for wi in &w[..d - 1] {
        s += (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2));
    }
    let wd = w[d - 1];
    s += (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2));
    -(s - 42.55) / 27.9
}

fn griewank(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().map(|v| v * v / 4000.0).sum();
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    -(sum - prod + 1.0 - 2.25) / 0.47
}

fn hartmann(x: &[f64]) -> f64 {
    let s: f64 = (0..4)
        .map(|i| {
            let inner: f64 = (0..6)
                .map(|j| HARTMANN_A[i][j] * (x[j] - HARTMANN_P[i][j]).powi(2))
                .sum();
            HARTMANN_ALPHA[i] * (-inner).exp()
        })
        .sum();
    -(-s + 0.26) / 0.38
}

impl TestFunction {
    pub fn new(id: FunctionId) -> Self {
        let (bounds, optimum_point, optimum_value) = match id {
            FunctionId::Schwefel2 => (vec![(-1.0, 1.0); 2], vec![0.8419, 0.8419], 3.057),
            // Canonical Eggholder box w ∈ [-512, 512]²; the optimum sits on its edge.
            FunctionId::Eggholder2 => (vec![(-1.0, 1.0); 2], vec![1.0, 0.7895], 2.769),
            FunctionId::Ackley2 => (vec![(-32.768, 32.768); 2], vec![0.0, 0.0], 0.0),
            FunctionId::Levy4 => (vec![(-10.0, 10.0); 4], vec![1.0; 4], 1.525),
            FunctionId::Griewank6 => (vec![(-50.0, 50.0); 6], vec![0.0; 6], 4.787),
            FunctionId::Hartmann6 => (
                vec![(0.0, 1.0); 6],
                vec![0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573],
                8.059,
            ),
        };
        Self {
            id,
            bounds,
            optimum_point,
            optimum_value,
        }
    }

    pub fn id(&self) -> FunctionId {
        self.id
    }

    pub fn native_bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// x* in native coordinates.
    pub fn optimum_point(&self) -> &[f64] {
        &self.optimum_point
    }

    pub fn to_native(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| lo + v * (hi - lo))
            .collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }

    /// Evaluates the formula at a native-box point (no range check).
    pub fn evaluate_native(&self, x: &[f64]) -> f64 {
        match self.id {
            FunctionId::Schwefel2 => schwefel(x),
            FunctionId::Eggholder2 => eggholder(x),
            FunctionId::Ackley2 => ackley(x),
            FunctionId::Levy4 => levy(x),
            FunctionId::Griewank6 => griewank(x),
            FunctionId::Hartmann6 => hartmann(x),
        }
    }
}

impl Objective for TestFunction {
    fn name(&self) -> &str {
        self.id.as_str()
    }

    fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn evaluate(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::invalid(format!(
                "{} takes {} coordinates, got {}",
                self.id,
                self.dim(),
                u.len()
            )));
        }
        if let Some(v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("coordinate {v} outside the unit box")));
        }
        Ok(self.evaluate_native(&self.to_native(u)))
    }

    fn optimum_value(&self) -> f64 {
        self.optimum_value
    }
}
