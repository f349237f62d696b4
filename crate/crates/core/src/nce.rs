//! Noise contrastive estimation for the quartic family against Gaussian noise.
//!
//! With `ℓ_θ(z) = θᵀT(z) − ln q(z)`, the empirical loss on `n` data points
//! `xᵢ ~ P*` and `n` noise points `yᵢ ~ Q` is
//!
//! ```text
//! Lⁿ(θ) = (1/2n) Σ softplus(−ℓ_θ(xᵢ)) + (1/2n) Σ softplus(ℓ_θ(yᵢ))
//! ∇Lⁿ(θ) = −(1/2n) Σ sigmoid(−ℓ_θ(xᵢ)) T(xᵢ) + (1/2n) Σ sigmoid(ℓ_θ(yᵢ)) T(yᵢ)
//! ∇²Lⁿ(θ) = (1/2n) Σ_{all points} sigmoid(ℓ) sigmoid(−ℓ) T Tᵀ
//! ```
//!
//! Density ratios `q/(p+q)` and `p/(p+q)` only ever appear as `sigmoid(∓ℓ)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{gaussian_log_pdf, log_ratio_unchecked, BatchSampler, ProductQuartic, SampleBatch, Source, StandardGaussian};
use crate::error::{Error, Result};
use crate::model::{fill_suff_stats, theta_star, ThetaVector};
use crate::numerics::{log_sigmoid, sigmoid, sym_eig_extremes, RngStream};

/// Number of batches used for batch-means standard errors.
pub const MC_BATCHES: usize = 10;

/// Loss, gradient and (optionally) Hessian at one θ.
#[derive(Debug, Clone, PartialEq)]
pub struct NceEvaluation {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Data and noise batches with sufficient statistics and `ln q` precomputed.
#[derive(Debug, Clone)]
pub struct NceProblem {
    d: usize,
    n: usize,
    data_stats: Vec<f64>,
    data_log_q: Vec<f64>,
    noise_stats: Vec<f64>,
    noise_log_q: Vec<f64>,
}

impl NceProblem {
    pub fn new(data: &SampleBatch, noise: &SampleBatch) -> Result<Self> {
        if data.source() != Source::Data || noise.source() != Source::Noise {
            return Err(Error::Shape("expected a data batch and a noise batch, in that order".into()));
        }
        if data.n() != noise.n() {
            return Err(Error::Shape(format!(
                "data and noise counts differ: {} vs {}",
                data.n(),
                noise.n()
            )));
        }
        if data.dim() != noise.dim() {
            return Err(Error::Shape(format!(
                "data and noise dimensions differ: {} vs {}",
                data.dim(),
                noise.dim()
            )));
        }
        let (data_stats, data_log_q) = prepare(data);
        let (noise_stats, noise_log_q) = prepare(noise);
        Ok(Self {
            d: data.dim(),
            n: data.n(),
            data_stats,
            data_log_q,
            noise_stats,
            noise_log_q,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Points per batch.
    pub fn n(&self) -> usize {
        self.n
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.d + 1 {
            return Err(Error::Shape(format!(
                "theta has {} coordinates, expected {}",
                theta.len(),
                self.d + 1
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("theta must be finite".into()));
        }
        Ok(())
    }

    fn data_rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.data_stats.chunks_exact(self.d + 1).zip(self.data_log_q.iter().copied())
    }

    fn noise_rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.noise_stats.chunks_exact(self.d + 1).zip(self.noise_log_q.iter().copied())
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.loss_unchecked(theta))
    }

    fn loss_unchecked(&self, theta: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (t, lq) in self.data_rows() {
            acc -= log_sigmoid(dot(theta, t) - lq);
        }
        for (t, lq) in self.noise_rows() {
            acc -= log_sigmoid(lq - dot(theta, t));
        }
        acc / (2 * self.n) as f64
    }

    /// Loss and gradient in one pass; the gradient is written into `grad`.
    pub fn loss_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_theta(theta)?;
        if grad.len() != theta.len() {
            return Err(Error::Shape("gradient buffer has the wrong length".into()));
        }
        grad.fill(0.0);
        let mut acc = 0.0;
        for (t, lq) in self.data_rows() {
            let l = dot(theta, t) - lq;
            acc -= log_sigmoid(l);
            axpy(-sigmoid(-l), t, grad);
        }
        for (t, lq) in self.noise_rows() {
            let l = dot(theta, t) - lq;
            acc -= log_sigmoid(-l);
            axpy(sigmoid(l), t, grad);
        }
        let scale = 1.0 / (2 * self.n) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok(acc * scale)
    }

    pub fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        let k = self.d + 1;
        let mut acc = vec![0.0; k * k];
        for (t, lq) in self.data_rows().chain(self.noise_rows()) {
            let l = dot(theta, t) - lq;
            rank_one_upper(sigmoid(l) * sigmoid(-l), t, &mut acc);
        }
        Ok(symmetric_from_upper(&acc, k, 1.0 / (2 * self.n) as f64))
    }

    pub fn evaluate(&self, theta: &ThetaVector, with_hessian: bool) -> Result<NceEvaluation> {
        let mut grad = vec![0.0; self.d + 1];
        let loss = self.loss_and_grad(theta.as_slice(), &mut grad)?;
        let hessian = if with_hessian {
            Some(self.hessian(theta.as_slice())?)
        } else {
            None
        };
        Ok(NceEvaluation { loss, grad, hessian })
    }
}

fn prepare(batch: &SampleBatch) -> (Vec<f64>, Vec<f64>) {
    let mut stats = Vec::with_capacity(batch.n() * (batch.dim() + 1));
    let mut log_q = Vec::with_capacity(batch.n());
    let mut t = Vec::with_capacity(batch.dim() + 1);
    for row in batch.rows() {
        fill_suff_stats(row, &mut t);
        stats.extend_from_slice(&t);
        log_q.push(gaussian_log_pdf(row));
    }
    (stats, log_q)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `acc[i, j] += w · t_i · t_j` for `j ≥ i` (row-major, upper triangle only).
#[inline]
fn rank_one_upper(w: f64, t: &[f64], acc: &mut [f64]) {
    let k = t.len();
    for i in 0..k {
        let wi = w * t[i];
        let row = &mut acc[i * k..(i + 1) * k];
        for j in i..k {
            row[j] += wi * t[j];
        }
    }
}

fn rank_one_upper_with_squares(w: f64, t: &[f64], acc: &mut [f64], sq: &mut [f64]) {
    let k = t.len();
    for i in 0..k {
        let wi = w * t[i];
        let row = &mut acc[i * k..(i + 1) * k];
        let sq_row = &mut sq[i * k..(i + 1) * k];
        for j in i..k {
            let v = wi * t[j];
            row[j] += v;
            sq_row[j] += v * v;
        }
    }
}

fn symmetric_from_upper(acc: &[f64], k: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        acc[a * k + b] * scale
    })
}

/// `Lⁿ(θ)`.
pub fn empirical_loss(theta: &ThetaVector, data: &SampleBatch, noise: &SampleBatch) -> Result<f64> {
    NceProblem::new(data, noise)?.loss(theta.as_slice())
}

/// `∇Lⁿ(θ)`.
pub fn empirical_grad(theta: &ThetaVector, data: &SampleBatch, noise: &SampleBatch) -> Result<Vec<f64>> {
    let problem = NceProblem::new(data, noise)?;
    let mut grad = vec![0.0; problem.dim() + 1];
    problem.loss_and_grad(theta.as_slice(), &mut grad)?;
    Ok(grad)
}

/// `∇²Lⁿ(θ)`, symmetric and positive semi-definite.
pub fn empirical_hessian(theta: &ThetaVector, data: &SampleBatch, noise: &SampleBatch) -> Result<DMatrix<f64>> {
    NceProblem::new(data, noise)?.hessian(theta.as_slice())
}

/// Which sampling representation of `½∫ p*q/(p*+q) TTᵀ` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianRepresentation {
    /// `½ E_{x~P*}[sigmoid(−ℓ(x)) T(x)T(x)ᵀ]`.
    #[default]
    Data,
    /// `½ E_{y~Q}[sigmoid(ℓ(y)) T(y)T(y)ᵀ]`.
    Noise,
}

/// Monte-Carlo estimate of the population Hessian at θ*, with batch means.
#[derive(Debug, Clone)]
pub struct PopulationHessian {
    pub matrix: DMatrix<f64>,
    /// Per-entry standard error from the per-draw sample variance.
    pub entry_stderr: DMatrix<f64>,
    pub batches: Vec<DMatrix<f64>>,
    pub n_mc: usize,
}

impl PopulationHessian {
    /// `λ_max` of the pooled estimate and a batch-means standard error.
    pub fn lambda_max_with_stderr(&self) -> Result<(f64, f64)> {
        let pooled = sym_eig_extremes(&self.matrix)?.lambda_max;
        let per_batch = self
            .batches
            .iter()
            .map(|b| sym_eig_extremes(b).map(|e| e.lambda_max))
            .collect::<Result<Vec<_>>>()?;
        Ok((pooled, batch_stderr(&per_batch)))
    }

    /// `vᵀHv` and its batch-means standard error.
    pub fn quad_form_with_stderr(&self, v: &[f64]) -> Result<(f64, f64)> {
        if v.len() != self.matrix.nrows() {
            return Err(Error::Shape("direction has the wrong length".into()));
        }
        let v = DVector::from_column_slice(v);
        let qf = |m: &DMatrix<f64>| (v.transpose() * m * &v)[(0, 0)];
        let per_batch: Vec<f64> = self.batches.iter().map(qf).collect();
        Ok((qf(&self.matrix), batch_stderr(&per_batch)))
    }
}

/// Standard error of the mean of equally weighted batch statistics.
pub(crate) fn batch_stderr(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    if values.len() < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

fn batch_sizes(n_mc: usize) -> impl Iterator<Item = usize> {
    (0..MC_BATCHES).map(move |b| n_mc / MC_BATCHES + usize::from(b < n_mc % MC_BATCHES))
}

/// Estimates `∇²L(θ*) = ½∫ p*q/(p*+q) TTᵀ` in dimension `d` from `n_mc` draws.
pub fn mc_population_hessian_at_star(
    d: usize,
    n_mc: usize,
    rng: &mut RngStream,
    representation: HessianRepresentation,
) -> Result<PopulationHessian> {
    if n_mc < 1000 {
        return Err(Error::Domain(format!("n_mc must be at least 1000, got {n_mc}")));
    }
    let pstar = ProductQuartic::new(d)?;
    let q = StandardGaussian::new(d)?;
    let k = d + 1;
    let mut x = vec![0.0; d];
    let mut t = Vec::with_capacity(k);
    let mut pooled = vec![0.0; k * k];
    let mut pooled_sq = vec![0.0; k * k];
    let mut batches = Vec::with_capacity(MC_BATCHES);
    for size in batch_sizes(n_mc) {
        let mut acc = vec![0.0; k * k];
        for _ in 0..size {
            let weight = match representation {
                HessianRepresentation::Data => {
                    pstar.sample_into(rng, &mut x);
                    sigmoid(-log_ratio_unchecked(pstar.scalar(), &x))
                }
                HessianRepresentation::Noise => {
                    q.sample_into(rng, &mut x);
                    sigmoid(log_ratio_unchecked(pstar.scalar(), &x))
                }
            };
            fill_suff_stats(&x, &mut t);
            rank_one_upper_with_squares(weight, &t, &mut acc, &mut pooled_sq);
        }
        for (p, a) in pooled.iter_mut().zip(&acc) {
            *p += a;
        }
        batches.push(symmetric_from_upper(&acc, k, 0.5 / size as f64));
    }
    let matrix = symmetric_from_upper(&pooled, k, 0.5 / n_mc as f64);
    let n = n_mc as f64;
    let entry_stderr = DMatrix::from_fn(k, k, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let mean = pooled[a * k + b] / n;
        let var = ((pooled_sq[a * k + b] - n * mean * mean) / (n - 1.0)).max(0.0);
        0.5 * (var / n).sqrt()
    });
    Ok(PopulationHessian {
        matrix,
        entry_stderr,
        batches,
        n_mc,
    })
}

/// Initial point for gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GdInit {
    AtThetaStar,
    /// θ* plus i.i.d. `N(0, scale²)` noise on every coordinate.
    Perturbed(f64),
    Custom(ThetaVector),
}

/// Gradient-descent settings. Defaults: step 1e−2, 5000 iterations,
/// gradient tolerance 1e−7, start at θ* perturbed with scale 0.1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init: GdInit,
}

/// Maximum number of step halvings per iteration.
pub const MAX_HALVINGS: usize = 30;
/// Upper bound on the number of recorded loss values in a report.
pub const TRACE_POINTS: usize = 200;

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-2,
            max_iters: 5000,
            grad_tol: 1e-7,
            init: GdInit::Perturbed(0.1),
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!("step_size must be positive, got {}", self.step_size)));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if let GdInit::Perturbed(s) = self.init {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Config(format!("perturbation scale must be non-negative, got {s}")));
            }
        }
        Ok(())
    }
}

/// Result of a gradient-descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdReport {
    pub theta_hat: ThetaVector,
    #[serde(rename = "iters")]
    pub iters_used: usize,
    pub final_grad_norm: f64,
    pub converged: bool,
    /// Loss values, evenly decimated to at most [`TRACE_POINTS`] entries.
    pub loss_trace: Vec<f64>,
    pub final_step_size: f64,
}

/// Something gradient descent can minimize.
pub trait Objective {
    fn num_params(&self) -> usize;
    /// Writes `∇f(θ)` into `grad` and returns `f(θ)`.
    fn loss_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64>;
    fn loss(&self, theta: &[f64]) -> Result<f64>;
}

impl Objective for NceProblem {
    fn num_params(&self) -> usize {
        self.d + 1
    }

    fn loss_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        NceProblem::loss_and_grad(self, theta, grad)
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        NceProblem::loss(self, theta)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn decimate(trace: &[f64]) -> Vec<f64> {
    if trace.len() <= TRACE_POINTS {
        return trace.to_vec();
    }
    let last = trace.len() - 1;
    (0..TRACE_POINTS)
        .map(|i| trace[i * last / (TRACE_POINTS - 1)])
        .collect()
}

/// Plain gradient descent with step halving on any loss increase.
///
/// A halved step is kept for later iterations. The run ends when the gradient
/// norm drops to `grad_tol`, after `max_iters` iterations, or when
/// [`MAX_HALVINGS`] halvings fail to produce a non-increasing loss.
pub fn minimize<O: Objective>(cfg: &GdConfig, objective: &O, start: ThetaVector) -> Result<GdReport> {
    cfg.validate()?;
    if start.as_slice().len() != objective.num_params() {
        return Err(Error::Shape("initial point has the wrong length".into()));
    }
    let k = objective.num_params();
    let mut theta = start;
    let mut grad = vec![0.0; k];
    let mut trial = vec![0.0; k];
    let mut trial_grad = vec![0.0; k];
    let mut loss = objective.loss_and_grad(theta.as_slice(), &mut grad)?;
    let mut trace = vec![loss];
    if !loss.is_finite() {
        return Err(Error::Optimization {
            message: "initial loss is not finite".into(),
            iters: 0,
            loss_trace: trace,
        });
    }
    let mut step = cfg.step_size;
    let mut grad_norm = norm(&grad);
    let mut iters = 0;
    'outer: while iters < cfg.max_iters && grad_norm > cfg.grad_tol {
        let mut halvings = 0;
        loop {
            for ((t, th), g) in trial.iter_mut().zip(theta.as_slice()).zip(&grad) {
                *t = th - step * g;
            }
            let accepted = match objective.loss_and_grad(&trial, &mut trial_grad) {
                Ok(l) if l.is_finite() && l <= loss => Some(l),
                Ok(_) => None,
                Err(Error::Domain(_)) => None,
                Err(e) => return Err(e),
            };
            if let Some(l) = accepted {
                loss = l;
                break;
            }
            if halvings == MAX_HALVINGS {
                if !loss.is_finite() {
                    return Err(Error::Optimization {
                        message: "loss became non-finite".into(),
                        iters,
                        loss_trace: decimate(&trace),
                    });
                }
                break 'outer;
            }
            step *= 0.5;
            halvings += 1;
        }
        theta.as_mut_slice().copy_from_slice(&trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        grad_norm = norm(&grad);
        trace.push(loss);
        iters += 1;
    }
    Ok(GdReport {
        theta_hat: theta,
        iters_used: iters,
        final_grad_norm: grad_norm,
        converged: grad_norm <= cfg.grad_tol,
        loss_trace: decimate(&trace),
        final_step_size: step,
    })
}

/// Resolves the configured starting point for dimension `d`.
pub fn initial_theta(init: &GdInit, d: usize, rng: &mut RngStream) -> Result<ThetaVector> {
    match init {
        GdInit::AtThetaStar => theta_star(d),
        GdInit::Perturbed(scale) => {
            let mut t = theta_star(d)?;
            for v in t.as_mut_slice() {
                *v += scale * rng.standard_normal();
            }
            Ok(t)
        }
        GdInit::Custom(t) => {
            if t.dim() != d {
                return Err(Error::Shape(format!("custom start has dimension {}, expected {d}", t.dim())));
            }
            Ok(t.clone())
        }
    }
}

/// Minimizes the empirical NCE loss; `rng` is only consumed by a perturbed start.
pub fn gradient_descent(
    cfg: &GdConfig,
    data: &SampleBatch,
    noise: &SampleBatch,
    rng: &mut RngStream,
) -> Result<GdReport> {
    let problem = NceProblem::new(data, noise)?;
    let start = initial_theta(&cfg.init, problem.dim(), rng)?;
    minimize(cfg, &problem, start)
}

/// Monte-Carlo moments of `A(x) = sigmoid(−ℓ(x))·vᵀT(x)` under `P*` and
/// `B(y) = sigmoid(ℓ(y))·vᵀT(y)` under `Q`, with batch-means standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionalStats {
    pub mean_a: f64,
    pub var_a: f64,
    pub mean_sq_a: f64,
    pub mean_b: f64,
    pub var_b: f64,
    pub mean_sq_b: f64,
    pub n_used: usize,
    pub mean_sq_a_stderr: f64,
    pub mean_sq_b_stderr: f64,
    /// Standard error of `var_a − mean_sq_a / 17`.
    pub var_gap_a_stderr: f64,
    /// Standard error of `var_b − mean_sq_b / 17`.
    pub var_gap_b_stderr: f64,
}

impl DirectionalStats {
    /// `Var(A) − E[A²]/17` and `Var(B) − E[B²]/17`.
    pub fn variance_gaps(&self) -> (f64, f64) {
        (self.var_a - self.mean_sq_a / 17.0, self.var_b - self.mean_sq_b / 17.0)
    }
}

#[derive(Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
    n: usize,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
        self.n += 1;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn mean_sq(&self) -> f64 {
        self.sum_sq / self.n as f64
    }

    fn var(&self) -> f64 {
        (self.mean_sq() - self.mean().powi(2)).max(0.0)
    }

    fn merge(&mut self, other: &Moments) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.n += other.n;
    }
}

/// [`directional_stats_along`] with `v = 1^{d+1}`.
pub fn directional_stats(d: usize, n_mc: usize, rng: &mut RngStream) -> Result<DirectionalStats> {
    directional_stats_along(d, &vec![1.0; d + 1], n_mc, rng)
}

/// Moments of `A` and `B` along an arbitrary fixed direction `v`.
pub fn directional_stats_along(d: usize, v: &[f64], n_mc: usize, rng: &mut RngStream) -> Result<DirectionalStats> {
    if n_mc < 1000 {
        return Err(Error::Domain(format!("n_mc must be at least 1000, got {n_mc}")));
    }
    if v.len() != d + 1 {
        return Err(Error::Shape(format!("direction must have length {}, got {}", d + 1, v.len())));
    }
    let pstar = ProductQuartic::new(d)?;
    let q = StandardGaussian::new(d)?;
    let mut x = vec![0.0; d];
    let mut t = Vec::with_capacity(d + 1);
    let mut a_batches = Vec::with_capacity(MC_BATCHES);
    let mut b_batches = Vec::with_capacity(MC_BATCHES);
    for size in batch_sizes(n_mc) {
        let mut a = Moments::default();
        for _ in 0..size {
            pstar.sample_into(rng, &mut x);
            fill_suff_stats(&x, &mut t);
            a.push(sigmoid(-log_ratio_unchecked(pstar.scalar(), &x)) * dot(v, &t));
        }
        a_batches.push(a);
    }
    for size in batch_sizes(n_mc) {
        let mut b = Moments::default();
        for _ in 0..size {
            q.sample_into(rng, &mut x);
            fill_suff_stats(&x, &mut t);
            b.push(sigmoid(log_ratio_unchecked(pstar.scalar(), &x)) * dot(v, &t));
        }
        b_batches.push(b);
    }
    let pool = |batches: &[Moments]| {
        let mut m = Moments::default();
        batches.iter().for_each(|b| m.merge(b));
        m
    };
    let a = pool(&a_batches);
    let b = pool(&b_batches);
    let se = |batches: &[Moments], f: &dyn Fn(&Moments) -> f64| batch_stderr(&batches.iter().map(f).collect::<Vec<_>>());
    let gap = |m: &Moments| m.var() - m.mean_sq() / 17.0;
    Ok(DirectionalStats {
        mean_a: a.mean(),
        var_a: a.var(),
        mean_sq_a: a.mean_sq(),
        mean_b: b.mean(),
        var_b: b.var(),
        mean_sq_b: b.mean_sq(),
        n_used: n_mc,
        mean_sq_a_stderr: se(&a_batches, &Moments::mean_sq),
        mean_sq_b_stderr: se(&b_batches, &Moments::mean_sq),
        var_gap_a_stderr: se(&a_batches, &gap),
        var_gap_b_stderr: se(&b_batches, &gap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_batches() -> (SampleBatch, SampleBatch) {
        let data = SampleBatch::from_rows(Source::Data, &[vec![0.3], vec![-1.2], vec![0.8], vec![2.1]]).unwrap();
        let noise = SampleBatch::from_rows(Source::Noise, &[vec![-0.4], vec![1.7], vec![0.05], vec![-2.5]]).unwrap();
        (data, noise)
    }

    #[test]
    fn loss_matches_direct_density_formula() {
        // Brute force with raw densities: −½ ln(p/(p+q)) and −½ ln(q/(p+q)).
        let (data, noise) = tiny_batches();
        let ts = theta_star(1).unwrap();
        let q = StandardGaussian::new(1).unwrap();
        let p = ProductQuartic::new(1).unwrap();
        let raw = |z: f64| (p.log_pdf(&[z]).unwrap().exp(), q.log_pdf(&[z]).unwrap().exp());
        let mut want = 0.0;
        for x in data.rows() {
            let (pv, qv) = raw(x[0]);
            want += -0.5 * (pv / (pv + qv)).ln() / 4.0;
        }
        for y in noise.rows() {
            let (pv, qv) = raw(y[0]);
            want += -0.5 * (qv / (pv + qv)).ln() / 4.0;
        }
        let got = empirical_loss(&ts, &data, &noise).unwrap();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn equal_density_theta_gives_ln_two() {
        // θ = (0, …, 0, c) makes ℓ_θ(z) = c + ½‖z‖² + (d/2)ln 2π; zero at z = 0 when c = −(d/2)ln 2π.
        let d = 2;
        let zero = vec![0.0; d];
        let data = SampleBatch::from_rows(Source::Data, &[zero.clone(), zero.clone()]).unwrap();
        let noise = SampleBatch::from_rows(Source::Noise, &[zero.clone(), zero]).unwrap();
        let theta = ThetaVector::new(vec![0.0, 0.0, -(2.0 * std::f64::consts::PI).ln()]).unwrap();
        let loss = empirical_loss(&theta, &data, &noise).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn saturated_data_term_vanishes() {
        let (data, noise) = tiny_batches();
        // Huge constant makes every ℓ → +∞.
        let theta = ThetaVector::new(vec![0.0, 800.0]).unwrap();
        let grad = empirical_grad(&theta, &data, &noise).unwrap();
        let mut want = [0.0; 2];
        for y in noise.rows() {
            want[0] += y[0].powi(4) / 8.0;
            want[1] += 1.0 / 8.0;
        }
        assert!((grad[0] - want[0]).abs() < 1e-12 && (grad[1] - want[1]).abs() < 1e-12);
        assert!(empirical_loss(&theta, &data, &noise).unwrap().is_finite());
    }

    #[test]
    fn single_point_hessian_term() {
        let data = SampleBatch::from_rows(Source::Data, &[vec![1.3]]).unwrap();
        // Noise point far in the tail so its weight is ~0 at this θ.
        let noise = SampleBatch::from_rows(Source::Noise, &[vec![40.0]]).unwrap();
        // ℓ_θ(1.3) = 0 with θ = (0, c), c = −½·1.3² − ½ ln 2π.
        let c = -0.5 * 1.3f64.powi(2) - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let theta = ThetaVector::new(vec![0.0, c]).unwrap();
        let h = empirical_hessian(&theta, &data, &noise).unwrap();
        let t = [1.3f64.powi(4), 1.0];
        for i in 0..2 {
            for j in 0..2 {
                let want = 0.5 * 0.25 * t[i] * t[j];
                assert!((h[(i, j)] - want).abs() < 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn shape_and_domain_errors() {
        let (data, noise) = tiny_batches();
        let short = SampleBatch::from_rows(Source::Noise, &[vec![0.0]]).unwrap();
        let ts = theta_star(1).unwrap();
        assert!(matches!(empirical_loss(&ts, &data, &short), Err(Error::Shape(_))));
        assert!(matches!(empirical_loss(&ts, &noise, &data), Err(Error::Shape(_))));
        let problem = NceProblem::new(&data, &noise).unwrap();
        assert!(matches!(problem.loss(&[f64::NAN, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(problem.loss(&[0.0]), Err(Error::Shape(_))));
    }

    struct Quadratic {
        target: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn num_params(&self) -> usize {
            self.target.len()
        }

        fn loss_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
            let mut l = 0.0;
            for ((g, t), a) in grad.iter_mut().zip(theta).zip(&self.target) {
                *g = 2.0 * (t - a);
                l += (t - a).powi(2);
            }
            Ok(l)
        }

        fn loss(&self, theta: &[f64]) -> Result<f64> {
            Ok(theta.iter().zip(&self.target).map(|(t, a)| (t - a).powi(2)).sum())
        }
    }

    #[test]
    fn quadratic_sanity_mode() {
        let obj = Quadratic {
            target: vec![1.0, -2.0, 0.5],
        };
        let cfg = GdConfig {
            step_size: 0.1,
            max_iters: 1000,
            grad_tol: 1e-10,
            init: GdInit::AtThetaStar,
        };
        let report = minimize(&cfg, &obj, ThetaVector::zeros(2)).unwrap();
        assert!(report.converged);
        // Contraction factor 0.8 per step: ‖g_k‖ = 0.8^k ‖g_0‖.
        let g0 = 2.0 * (1.0f64 + 4.0 + 0.25).sqrt();
        let bound = ((cfg.grad_tol / g0).ln() / 0.8f64.ln()).ceil() as usize;
        assert!(report.iters_used <= bound, "{} > {bound}", report.iters_used);
        for (t, a) in report.theta_hat.as_slice().iter().zip(&obj.target) {
            assert!((t - a).abs() <= cfg.grad_tol);
        }
        assert!(report.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn oversized_step_is_halved() {
        let obj = Quadratic { target: vec![3.0, 3.0] };
        let cfg = GdConfig {
            step_size: 10.0,
            max_iters: 500,
            grad_tol: 1e-9,
            init: GdInit::AtThetaStar,
        };
        let report = minimize(&cfg, &obj, ThetaVector::zeros(1)).unwrap();
        assert!(report.converged);
        assert!(report.final_step_size < 1.0);
    }

    #[test]
    fn trace_is_decimated() {
        let trace: Vec<f64> = (0..5001).map(|i| i as f64).collect();
        let d = decimate(&trace);
        assert_eq!(d.len(), TRACE_POINTS);
        assert_eq!(d[0], 0.0);
        assert_eq!(*d.last().unwrap(), 5000.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let obj = Quadratic { target: vec![0.0, 0.0] };
        let mut cfg = GdConfig::default();
        cfg.step_size = 0.0;
        assert!(matches!(minimize(&cfg, &obj, ThetaVector::zeros(1)), Err(Error::Config(_))));
    }

    #[test]
    fn population_hessian_is_exactly_symmetric() {
        let h = mc_population_hessian_at_star(3, 2000, &mut RngStream::new(1, 0), HessianRepresentation::Data).unwrap();
        assert_eq!(h.matrix, h.matrix.transpose());
        assert_eq!(h.batches.len(), MC_BATCHES);
        assert!(mc_population_hessian_at_star(3, 999, &mut RngStream::new(1, 0), HessianRepresentation::Data).is_err());
    }

    #[test]
    fn gd_report_json_keys() {
        let report = GdReport {
            theta_hat: ThetaVector::new(vec![0.5, -1.0]).unwrap(),
            iters_used: 3,
            final_grad_norm: 1e-8,
            converged: true,
            loss_trace: vec![0.7, 0.6],
            final_step_size: 0.01,
        };
        let v: serde_json::Value = serde_json::to_value(&report).unwrap();
        for key in ["theta_hat", "iters", "final_grad_norm", "converged", "loss_trace"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["theta_hat"], serde_json::json!([0.5, -1.0]));
    }
}
