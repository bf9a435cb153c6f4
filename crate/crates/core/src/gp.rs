//! Exact Gaussian-process regression with the squared-exponential kernel.
//!
//! The prior mean is zero everywhere and the observation noise variance is a
//! known input. Hyperparameters (global variance and per-dimension
//! length-scales) are estimated by maximizing the log marginal likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, NelderMeadOptions};

/// Smallest jitter tried after a plain factorization fails, relative to τ².
const JITTER_START: f64 = 1e-10;
/// Largest jitter before giving up, relative to τ².
const JITTER_MAX: f64 = 1e-4;

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    tau_sq: f64,
    length_scales: Vec<f64>,
}

impl KernelSpec {
    pub fn new(tau_sq: f64, length_scales: Vec<f64>) -> Result<Self> {
        if !(tau_sq > 0.0 && tau_sq.is_finite()) {
            return Err(Error::invalid(format!("tau_sq must be positive, got {tau_sq}")));
        }
        if length_scales.is_empty() {
            return Err(Error::invalid("kernel needs at least one length-scale"));
        }
        if let Some(h) = length_scales.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::invalid(format!("length-scales must be positive, got {h}")));
        }
        Ok(Self {
            tau_sq,
            length_scales,
        })
    }

    /// Same length-scale on every axis.
    pub fn isotropic(tau_sq: f64, length_scale: f64, dim: usize) -> Result<Self> {
        Self::new(tau_sq, vec![length_scale; dim])
    }

    pub fn tau_sq(&self) -> f64 {
        self.tau_sq
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// τ²·exp(−‖x−x′‖²_h / 2) without dimension checks.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((a, b), h) in x.iter().zip(y).zip(&self.length_scales) {
            let t = (a - b) / h;
            r2 += t * t;
        }
        self.tau_sq * (-0.5 * r2).exp()
    }

    fn to_log_params(&self) -> Vec<f64> {
        std::iter::once(self.tau_sq.ln())
            .chain(self.length_scales.iter().map(|h| h.ln()))
            .collect()
    }

    fn from_log_params(theta: &[f64]) -> Result<Self> {
        Self::new(theta[0].exp(), theta[1..].iter().map(|t| t.exp()).collect())
    }
}

/// Covariance between two points under `spec`.
pub fn kernel_eval(x: &[f64], x_prime: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != spec.dim() || x_prime.len() != spec.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: x has {}, x' has {}, kernel has {}",
            x.len(),
            x_prime.len(),
            spec.dim()
        )));
    }
    Ok(spec.eval_unchecked(x, x_prime))
}

/// Gram matrix of the rows of `x`.
pub fn kernel_matrix(x: &DMatrix<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    let points = Points::from_matrix(x);
    points.check_dim(spec)?;
    Ok(gram(&points, spec))
}

/// Row-major copy of an n×d design so kernel rows are contiguous.
#[derive(Debug, Clone)]
pub(crate) struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub(crate) fn from_matrix(x: &DMatrix<f64>) -> Self {
        let (n, dim) = x.shape();
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            data.extend(x.row(i).iter());
        }
        Self { data, dim }
    }

    pub(crate) fn from_rows<R: AsRef<[f64]>>(rows: &[R], dim: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::invalid(format!(
                    "point has dimension {}, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { data, dim })
    }

    pub(crate) fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn check_dim(&self, spec: &KernelSpec) -> Result<()> {
        if self.dim != spec.dim() {
            return Err(Error::invalid(format!(
                "inputs have dimension {}, kernel has {}",
                self.dim,
                spec.dim()
            )));
        }
        Ok(())
    }

    fn check_unit_box(&self) -> Result<()> {
        match self.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            Some(v) => Err(Error::invalid(format!("input coordinate {v} outside [0,1]"))),
            None => Ok(()),
        }
    }
}

fn gram(points: &Points, spec: &KernelSpec) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = spec.tau_sq;
        for i in (j + 1)..n {
            let v = spec.eval_unchecked(points.row(i), points.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `a`, retrying with diagonal jitter `scale·1e-10` escalating ×10
/// up to `scale·1e-4`. Returns the factor and the jitter that was added.
pub(crate) fn factorize_with_jitter(
    a: DMatrix<f64>,
    scale: f64,
    context: &str,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok((c, 0.0));
    }
    let mut rel = JITTER_START;
    let mut last = 0.0;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(b) {
            return Ok((c, jitter));
        }
        last = jitter;
        rel *= 10.0;
    }
    Err(Error::NumericFailure {
        context: context.to_string(),
        jitter: last,
    })
}

/// In-place forward substitution `L v = b` for a column-major lower-triangular `L`.
#[inline]
fn forward_substitute(l: &DMatrix<f64>, v: &mut [f64]) {
    let n = v.len();
    let data = l.as_slice();
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        let vj = v[j] / col[j];
        v[j] = vj;
        for (vi, lij) in v[j + 1..].iter_mut().zip(&col[j + 1..]) {
            *vi -= lij * vj;
        }
    }
}

/// Posterior mean and variance at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A GP conditioned on data. Immutable once fitted.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    points: Points,
    observations: DVector<f64>,
    noise_var: f64,
    kernel: KernelSpec,
    /// Lower Cholesky factor of K_XX + σ²I (+ jitter·I).
    factor: DMatrix<f64>,
    /// (K_XX + σ²I)⁻¹ Y
    alpha: DVector<f64>,
    jitter: f64,
}

/// Fits the zero-mean GP posterior to the rows of `x` and observations `y`.
pub fn fit_posterior(
    x: &DMatrix<f64>,
    y: &[f64],
    noise_var: f64,
    spec: &KernelSpec,
) -> Result<GpPosterior> {
    GpPosterior::fit_points(Points::from_matrix(x), y, noise_var, spec)
}

impl GpPosterior {
    /// The prior: no conditioning data.
    pub fn prior(spec: &KernelSpec, noise_var: f64) -> Self {
        Self {
            points: Points {
                data: Vec::new(),
                dim: spec.dim(),
            },
            observations: DVector::zeros(0),
            noise_var,
            kernel: spec.clone(),
            factor: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        }
    }

    /// Same as [`fit_posterior`] with the inputs given as rows.
    pub fn fit_rows<R: AsRef<[f64]>>(
        rows: &[R],
        y: &[f64],
        noise_var: f64,
        spec: &KernelSpec,
    ) -> Result<Self> {
        Self::fit_points(Points::from_rows(rows, spec.dim())?, y, noise_var, spec)
    }

    pub(crate) fn fit_points(
        points: Points,
        y: &[f64],
        noise_var: f64,
        spec: &KernelSpec,
    ) -> Result<Self> {
        points.check_dim(spec)?;
        points.check_unit_box()?;
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be >= 0, got {noise_var}")));
        }
        let n = points.len();
        if n != y.len() {
            return Err(Error::invalid(format!("{n} inputs but {} observations", y.len())));
        }
        if n == 0 {
            return Ok(Self::prior(spec, noise_var));
        }
        let mut k = gram(&points, spec);
        for i in 0..n {
            k[(i, i)] += noise_var;
        }
        let (chol, jitter) = factorize_with_jitter(k, spec.tau_sq, "posterior fit")?;
        let observations = DVector::from_column_slice(y);
        let alpha = chol.solve(&observations);
        Ok(Self {
            points,
            observations,
            noise_var,
            kernel: spec.clone(),
            factor: chol.unpack(),
            alpha,
            jitter,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.observations
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Lower-triangular factor of the regularized covariance.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Diagonal jitter added on top of σ² to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// The i-th training input.
    pub fn input(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    fn cross_cov(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.kernel.eval_unchecked(self.points.row(i), x))
            .collect()
    }

    /// Posterior mean and variance at `x`; the variance is clamped to [0, τ²].
    pub fn predict(&self, x: &[f64]) -> Prediction {
        debug_assert_eq!(x.len(), self.dim());
        let tau_sq = self.kernel.tau_sq;
        if self.is_empty() {
            return Prediction {
                mean: 0.0,
                variance: tau_sq,
            };
        }
        let mut v = self.cross_cov(x);
        let mean = v.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum();
        forward_substitute(&self.factor, &mut v);
        let explained: f64 = v.iter().map(|t| t * t).sum();
        Prediction {
            mean,
            variance: (tau_sq - explained).clamp(0.0, tau_sq),
        }
    }

    /// Posterior mean vector and joint covariance over `candidates`.
    pub fn joint(&self, candidates: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let m = candidates.len();
        let cands = Points::from_rows(candidates, self.dim())?;
        let mut cov = gram(&cands, &self.kernel);
        let n = self.len();
        if n == 0 {
            return Ok((DVector::zeros(m), cov));
        }
        // V = L⁻¹ K_Xc, one column per candidate.
        let mut v = DMatrix::zeros(n, m);
        for (j, mut col) in v.column_iter_mut().enumerate() {
            let mut k = self.cross_cov(cands.row(j));
            forward_substitute(&self.factor, &mut k);
            col.copy_from_slice(&k);
        }
        let mean = v.tr_mul(&self.factor.tr_mul(&self.alpha));
        cov -= v.tr_mul(&v);
        Ok((mean, cov))
    }
}

/// Zero-mean log marginal likelihood of `y` under the GP with `spec` and noise `noise_var`.
pub fn log_marginal_likelihood(
    x: &DMatrix<f64>,
    y: &[f64],
    noise_var: f64,
    spec: &KernelSpec,
) -> Result<f64> {
    let points = Points::from_matrix(x);
    lml_points(&points, y, noise_var, spec)
}

fn lml_points(points: &Points, y: &[f64], noise_var: f64, spec: &KernelSpec) -> Result<f64> {
    points.check_dim(spec)?;
    let n = points.len();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} inputs but {} observations", y.len())));
    }
    let mut k = gram(points, spec);
    for i in 0..n {
        k[(i, i)] += noise_var;
    }
    let (chol, _) = factorize_with_jitter(k, spec.tau_sq, "marginal likelihood")?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let half_log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    Ok(-0.5 * yv.dot(&alpha) - half_log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Box for the likelihood search, in natural (not log) units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub tau_sq: (f64, f64),
    pub length_scale: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            tau_sq: (1e-3, 1e3),
            length_scale: (1e-2, 1e1),
        }
    }
}

impl HyperBounds {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("tau_sq", self.tau_sq), ("length_scale", self.length_scale)] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::invalid(format!("bad {name} bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    fn log_box(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.tau_sq.0.ln()];
        let mut hi = vec![self.tau_sq.1.ln()];
        lo.extend(std::iter::repeat_n(self.length_scale.0.ln(), dim));
        hi.extend(std::iter::repeat_n(self.length_scale.1.ln(), dim));
        (lo, hi)
    }
}

fn likelihood_search_options() -> NelderMeadOptions {
    NelderMeadOptions {
        max_iter: 400,
        initial_step: 0.5,
        f_tol: 1e-9,
        x_tol: 1e-6,
    }
}

/// Maximum-likelihood kernel from `restarts` log-uniform random starts inside `bounds`.
pub fn estimate_hyperparameters<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &[f64],
    noise_var: f64,
    bounds: &HyperBounds,
    restarts: usize,
    rng: &mut R,
) -> Result<KernelSpec> {
    bounds.validate()?;
    if restarts == 0 {
        return Err(Error::invalid("need at least one restart"));
    }
    let dim = x.ncols();
    let (lo, hi) = bounds.log_box(dim);
    let starts = (0..restarts)
        .map(|_| {
            let theta: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| l + rng.random::<f64>() * (h - l))
                .collect();
            KernelSpec::from_log_params(&theta)
        })
        .collect::<Result<Vec<_>>>()?;
    estimate_hyperparameters_from(x, y, noise_var, bounds, &starts)
}

/// Local likelihood ascent from each of `starts`; returns the best end point.
pub fn estimate_hyperparameters_from(
    x: &DMatrix<f64>,
    y: &[f64],
    noise_var: f64,
    bounds: &HyperBounds,
    starts: &[KernelSpec],
) -> Result<KernelSpec> {
    bounds.validate()?;
    let points = Points::from_matrix(x);
    if points.len() < 2 {
        return Err(Error::invalid("hyperparameter estimation needs at least 2 observations"));
    }
    if points.len() != y.len() {
        return Err(Error::invalid("inputs and observations differ in length"));
    }
    let dim = points.dim;
    let (lo, hi) = bounds.log_box(dim);
    let objective = |theta: &[f64]| -> f64 {
        match KernelSpec::from_log_params(theta)
            .and_then(|s| lml_points(&points, y, noise_var, &s))
        {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        if start.dim() != dim {
            return Err(Error::invalid("start kernel dimension differs from inputs"));
        }
        let m = optim::minimize(objective, &start.to_log_params(), &lo, &hi, &likelihood_search_options());
        if m.value.is_finite() && best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    match best {
        Some((theta, _)) => {
            // exp(ln(bound)) can land one ulp outside the box.
            let tau_sq = theta[0].exp().clamp(bounds.tau_sq.0, bounds.tau_sq.1);
            let (lo, hi) = bounds.length_scale;
            KernelSpec::new(tau_sq, theta[1..].iter().map(|t| t.exp().clamp(lo, hi)).collect())
        }
        None => Err(Error::NumericFailure {
            context: "hyperparameter estimation: every start failed".into(),
            jitter: JITTER_MAX,
        }),
    }
}
