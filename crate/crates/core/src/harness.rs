//! Deterministic experiment orchestration: the MSE-versus-dimension sweep,
//! the Hessian-decay study, the variance identity and anti-concentration.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]. Each unit
//! of work owns an [`RngStream`] seeded by [`derive_seed`], work runs on a
//! rayon pool and results are merged by sorting.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{log_ratio_unchecked, BatchSampler, ProductQuartic, QuarticScalarDist, StandardGaussian, HALF_LN_TWO_PI};
use crate::error::{Error, Result};
use crate::model::{theta_star, ThetaVector};
use crate::nce::{
    directional_stats_along, gradient_descent, mc_population_hessian_at_star, GdConfig, GdInit,
    HessianRepresentation,
};
use crate::numerics::{integrate, sigmoid, sym_eig_extremes, RngStream};
use crate::theory::{self, AnticoncReport};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "NCE_LAB_THREADS";

/// ε used by the anti-concentration experiment.
pub const ANTICONC_EPSILON: f64 = 0.125;

const STREAM_DATA: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_HESSIAN: u64 = 3;
const STREAM_DIRECTIONAL: u64 = 4;
const STREAM_IDENTITY_HESSIAN: u64 = 5;
const STREAM_ANTICONC: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Mse,
    HessianDecay,
    Anticonc,
    Identity,
}

/// Starting point as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    AtThetaStar,
    Perturbed,
}

/// The `gd` block of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdSettings {
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init: InitKind,
    pub perturb_scale: f64,
}

impl Default for GdSettings {
    fn default() -> Self {
        let base = GdConfig::default();
        let perturb_scale = match base.init {
            GdInit::Perturbed(s) => s,
            _ => 0.1,
        };
        GdSettings {
            step_size: base.step_size,
            max_iters: base.max_iters,
            grad_tol: base.grad_tol,
            init: InitKind::Perturbed,
            perturb_scale,
        }
    }
}

impl GdSettings {
    pub fn to_gd_config(&self) -> Result<GdConfig> {
        if !(self.perturb_scale >= 0.0 && self.perturb_scale.is_finite()) {
            return Err(Error::Config(format!("gd.perturb_scale must be finite and >= 0, got {}", self.perturb_scale)));
        }
        let cfg = GdConfig {
            step_size: self.step_size,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            init: match self.init {
                InitKind::AtThetaStar => GdInit::AtThetaStar,
                InitKind::Perturbed => GdInit::Perturbed(self.perturb_scale),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Experiment description; missing keys take the desk-scale MSE defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub dims: Vec<usize>,
    pub n_samples: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub gd: GdSettings,
    pub mc_budget: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::desk_mse()
    }
}

impl ExperimentConfig {
    /// Dimensions 70..=120 in steps of 10, n = 500, 20 trials.
    pub fn desk_mse() -> Self {
        ExperimentConfig {
            kind: Kind::Mse,
            dims: (70..=120).step_by(10).collect(),
            n_samples: 500,
            trials: 20,
            master_seed: 7,
            gd: GdSettings::default(),
            mc_budget: 200_000,
        }
    }

    /// Dimensions 70..=120 in steps of 2, n = 500, 100 trials.
    pub fn full_mse() -> Self {
        ExperimentConfig {
            dims: (70..=120).step_by(2).collect(),
            trials: 100,
            ..ExperimentConfig::desk_mse()
        }
    }

    /// Dimensions 10..=100 in steps of 10 with 2·10⁵ draws each.
    pub fn hessian_decay() -> Self {
        ExperimentConfig {
            kind: Kind::HessianDecay,
            dims: (10..=100).step_by(10).collect(),
            mc_budget: 200_000,
            ..ExperimentConfig::desk_mse()
        }
    }

    pub fn anticonc() -> Self {
        ExperimentConfig {
            kind: Kind::Anticonc,
            dims: vec![50, 100, 200],
            mc_budget: 100_000,
            ..ExperimentConfig::desk_mse()
        }
    }

    pub fn identity() -> Self {
        ExperimentConfig {
            kind: Kind::Identity,
            dims: vec![1, 20],
            mc_budget: 100_000,
            ..ExperimentConfig::desk_mse()
        }
    }

    pub fn defaults_for(kind: Kind) -> Self {
        match kind {
            Kind::Mse => Self::desk_mse(),
            Kind::HessianDecay => Self::hessian_decay(),
            Kind::Anticonc => Self::anticonc(),
            Kind::Identity => Self::identity(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("dims must not be empty".into()));
        }
        if self.dims[0] == 0 {
            return Err(Error::Config("dims must be positive".into()));
        }
        if self.dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("dims must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_samples < 2 {
            return Err(Error::Config("n_samples must be at least 2".into()));
        }
        let min_mc = match self.kind {
            Kind::Anticonc => 10_000,
            _ => 1000,
        };
        if self.kind != Kind::Mse && self.mc_budget < min_mc {
            return Err(Error::Config(format!("mc_budget must be at least {min_mc}")));
        }
        self.gd.to_gd_config()?;
        Ok(())
    }

    fn expect_kind(&self, kind: Kind) -> Result<()> {
        self.validate()?;
        if self.kind != kind {
            return Err(Error::Config(format!("expected a {kind:?} config, got {:?}", self.kind)));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one `(d, trial)` cell. For a fixed master the map is injective on
/// `d, trial < 2³²` because `splitmix64` is a bijection.
pub fn derive_seed(master: u64, d: usize, trial: usize) -> u64 {
    let key = ((d as u64) << 32) | (trial as u64 & 0xffff_ffff);
    splitmix64(splitmix64(master) ^ key)
}

/// Worker count from [`THREADS_ENV`], or rayon's default when unset.
pub fn worker_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn with_pool<T: Send>(job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads()?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Ordinary least squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    #[serde(skip)]
    pub n_points: usize,
}

/// OLS of `y` on `x`. Constant `y` has `r² = 1` by convention.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<FitReport> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Domain("fit points must be finite".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(FitReport {
        slope,
        intercept,
        r_squared,
        n_points: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub d: usize,
    pub trial: usize,
    pub seed_used: u64,
    pub sq_error: f64,
    pub iters: usize,
    pub final_grad_norm: f64,
    pub converged: bool,
}

/// Trial mean and standard error of `sq_error` at one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub d: usize,
    pub mean: f64,
    /// `NaN` for a single trial.
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct MseOutcome {
    pub records: Vec<TrialRecord>,
    /// `θ̂` per record, same order; `None` when the optimizer failed.
    pub estimates: Vec<Option<ThetaVector>>,
    pub summary: Vec<SummaryRow>,
    /// Fit of `ln mean` against `d`; needs three or more dimensions.
    pub fit: Option<FitReport>,
}

fn run_trial(cfg: &ExperimentConfig, gd: &GdConfig, d: usize, trial: usize) -> Result<(TrialRecord, Option<ThetaVector>)> {
    let seed = derive_seed(cfg.master_seed, d, trial);
    let pstar = ProductQuartic::new(d)?;
    let q = StandardGaussian::new(d)?;
    let data = pstar.sample_batch(cfg.n_samples, &mut RngStream::new(seed, STREAM_DATA))?;
    let noise = q.sample_batch(cfg.n_samples, &mut RngStream::new(seed, STREAM_NOISE))?;
    let star = theta_star(d)?;
    let outcome = gradient_descent(gd, &data, &noise, &mut RngStream::new(seed, STREAM_INIT));
    let record = |sq_error, iters, final_grad_norm, converged| TrialRecord {
        d,
        trial,
        seed_used: seed,
        sq_error,
        iters,
        final_grad_norm,
        converged,
    };
    match outcome {
        Ok(report) => Ok((
            record(
                report.theta_hat.sq_distance(&star),
                report.iters_used,
                report.final_grad_norm,
                report.converged,
            ),
            Some(report.theta_hat),
        )),
        Err(Error::Optimization { iters, .. }) => Ok((record(f64::INFINITY, iters, f64::NAN, false), None)),
        Err(e) => Err(e),
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Fresh data and noise per `(d, trial)`, gradient descent, squared error to θ*.
///
/// Failed optimizations are recorded with `sq_error = ∞` and left out of the
/// summary.
pub fn run_mse_experiment(cfg: &ExperimentConfig) -> Result<MseOutcome> {
    cfg.expect_kind(Kind::Mse)?;
    let gd = cfg.gd.to_gd_config()?;
    let cells: Vec<(usize, usize)> = cfg
        .dims
        .iter()
        .flat_map(|&d| (0..cfg.trials).map(move |t| (d, t)))
        .collect();
    let mut results = with_pool(|| {
        cells
            .par_iter()
            .map(|&(d, t)| run_trial(cfg, &gd, d, t))
            .collect::<Result<Vec<_>>>()
    })??;
    results.sort_by_key(|(r, _)| (r.d, r.trial));
    let (records, estimates): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let summary: Vec<SummaryRow> = cfg
        .dims
        .iter()
        .map(|&d| {
            let errs: Vec<f64> = records
                .iter()
                .filter(|r| r.d == d && r.sq_error.is_finite())
                .map(|r| r.sq_error)
                .collect();
            let (mean, stderr) = if errs.is_empty() { (f64::NAN, f64::NAN) } else { mean_and_stderr(&errs) };
            SummaryRow { d, mean, stderr }
        })
        .collect();
    let fit = fit_log(summary.iter().map(|s| (s.d, s.mean)))?;
    Ok(MseOutcome {
        records,
        estimates,
        summary,
        fit,
    })
}

fn fit_log(points: impl Iterator<Item = (usize, f64)>) -> Result<Option<FitReport>> {
    let pts: Vec<(f64, f64)> = points.map(|(d, y)| (d as f64, y.ln())).collect();
    if pts.len() < 3 {
        return Ok(None);
    }
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Data("cannot fit: a per-dimension value is not positive and finite".into()));
    }
    linear_fit(&pts).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRecord {
    pub d: usize,
    pub mc_samples: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub lambda_max_stderr: f64,
    /// `ln` of the Hessian norm upper bound.
    pub bound_log: f64,
}

impl SpectrumRecord {
    pub fn within_bound(&self) -> bool {
        self.lambda_max <= self.bound_log.exp() + 3.0 * self.lambda_max_stderr
    }
}

#[derive(Debug, Clone)]
pub struct HessianDecayOutcome {
    pub records: Vec<SpectrumRecord>,
    /// Fit of `ln λ_max` against `d`.
    pub fit: Option<FitReport>,
}

pub fn run_hessian_decay(cfg: &ExperimentConfig) -> Result<HessianDecayOutcome> {
    cfg.expect_kind(Kind::HessianDecay)?;
    let rho = theory::bhattacharyya_rho()?;
    let scalar = QuarticScalarDist::new()?;
    let mut records = with_pool(|| {
        cfg.dims
            .par_iter()
            .map(|&d| {
                let mut rng = RngStream::new(derive_seed(cfg.master_seed, d, 0), STREAM_HESSIAN);
                let h = mc_population_hessian_at_star(d, cfg.mc_budget, &mut rng, HessianRepresentation::Data)?;
                let (lambda_max, lambda_max_stderr) = h.lambda_max_with_stderr()?;
                let lambda_min = sym_eig_extremes(&h.matrix)?.lambda_min;
                Ok(SpectrumRecord {
                    d,
                    mc_samples: cfg.mc_budget,
                    lambda_max,
                    lambda_min,
                    lambda_max_stderr,
                    bound_log: theory::hessian_norm_bound_with(d, rho, &scalar)?.log_bound,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    records.sort_by_key(|r| r.d);
    let fit = fit_log(records.iter().map(|r| (r.d, r.lambda_max)))?;
    Ok(HessianDecayOutcome { records, fit })
}

/// Both sides of `E[A²] + E[B²] = 2vᵀHv` at one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityRecord {
    pub d: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub combined_stderr: f64,
    pub pass: bool,
}

/// Identity check along `v = 1^{d+1}`; the two sides use independent streams.
pub fn run_identity_check(cfg: &ExperimentConfig) -> Result<Vec<IdentityRecord>> {
    cfg.expect_kind(Kind::Identity)?;
    let mut records = with_pool(|| {
        cfg.dims
            .par_iter()
            .map(|&d| identity_record(d, &vec![1.0; d + 1], cfg.mc_budget, derive_seed(cfg.master_seed, d, 0)))
            .collect::<Result<Vec<_>>>()
    })??;
    records.sort_by_key(|r| r.d);
    Ok(records)
}

/// Monte-Carlo identity check along an arbitrary direction `v`.
pub fn identity_record(d: usize, v: &[f64], n_mc: usize, seed: u64) -> Result<IdentityRecord> {
    let stats = directional_stats_along(d, v, n_mc, &mut RngStream::new(seed, STREAM_DIRECTIONAL))?;
    let h = mc_population_hessian_at_star(
        d,
        n_mc,
        &mut RngStream::new(seed, STREAM_IDENTITY_HESSIAN),
        HessianRepresentation::Data,
    )?;
    let (qf, qf_se) = h.quad_form_with_stderr(v)?;
    let lhs = stats.mean_sq_a + stats.mean_sq_b;
    let rhs = 2.0 * qf;
    let combined_stderr =
        (stats.mean_sq_a_stderr.powi(2) + stats.mean_sq_b_stderr.powi(2) + (2.0 * qf_se).powi(2)).sqrt();
    Ok(IdentityRecord {
        d,
        lhs,
        rhs,
        combined_stderr,
        pass: (lhs - rhs).abs() <= 3.0 * combined_stderr,
    })
}

/// `(E[A²] + E[B²], 2vᵀHv)` at `d = 1` by quadrature, for `v ∈ R²`.
pub fn identity_quadrature_d1(v: [f64; 2]) -> Result<(f64, f64)> {
    let p = QuarticScalarDist::new()?;
    let vt = |x: f64| v[0] * x.powi(4) + v[1];
    let ell = |x: f64| log_ratio_unchecked(&p, &[x]);
    let log_q = |x: f64| -0.5 * x * x - HALF_LN_TWO_PI;
    let tol = 1e-11;
    let inf = f64::INFINITY;
    let a2 = integrate(|x| p.log_pdf(x).exp() * (sigmoid(-ell(x)) * vt(x)).powi(2), -inf, inf, tol)?.value;
    let b2 = integrate(|x| log_q(x).exp() * (sigmoid(ell(x)) * vt(x)).powi(2), -inf, inf, tol)?.value;
    let quad_form = population_hessian_d1_quadrature()?;
    let v = nalgebra::Vector2::new(v[0], v[1]);
    let rhs = 2.0 * (v.transpose() * quad_form * v)[(0, 0)];
    Ok((a2 + b2, rhs))
}

/// `½∫ p*q/(p*+q) TTᵀ` at `d = 1` by quadrature, written as
/// `½∫ p* sigmoid(−ℓ) TTᵀ`.
pub fn population_hessian_d1_quadrature() -> Result<nalgebra::Matrix2<f64>> {
    let p = QuarticScalarDist::new()?;
    let w = |x: f64| 0.5 * p.log_pdf(x).exp() * sigmoid(-log_ratio_unchecked(&p, &[x]));
    let inf = f64::INFINITY;
    let tol = 1e-11;
    let h00 = integrate(|x| w(x) * x.powi(8), -inf, inf, tol)?.value;
    let h01 = integrate(|x| w(x) * x.powi(4), -inf, inf, tol)?.value;
    let h11 = integrate(w, -inf, inf, tol)?.value;
    Ok(nalgebra::Matrix2::new(h00, h01, h01, h11))
}

pub fn run_anticonc_experiment(cfg: &ExperimentConfig) -> Result<Vec<AnticoncReport>> {
    cfg.expect_kind(Kind::Anticonc)?;
    let mut reports = with_pool(|| {
        cfg.dims
            .par_iter()
            .map(|&d| {
                let mut rng = RngStream::new(derive_seed(cfg.master_seed, d, 0), STREAM_ANTICONC);
                theory::verify_anticonc(d, ANTICONC_EPSILON, cfg.mc_budget, &mut rng)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    reports.sort_by_key(|r| r.forward.thresholds.d);
    Ok(reports)
}

/// Sample covariance trace and squared bias of the trial mean of `θ̂`.
///
/// With population (1/T) normalization, `mean sq_error = trace + bias²`
/// holds exactly.
pub fn mse_decomposition(estimates: &[ThetaVector], star: &ThetaVector) -> Result<(f64, f64)> {
    let Some(first) = estimates.first() else {
        return Err(Error::Data("no estimates".into()));
    };
    let k = first.as_slice().len();
    if estimates.iter().any(|e| e.as_slice().len() != k) || star.as_slice().len() != k {
        return Err(Error::Shape("estimates have inconsistent lengths".into()));
    }
    let t = estimates.len() as f64;
    let mut mean = vec![0.0; k];
    for e in estimates {
        for (m, v) in mean.iter_mut().zip(e.as_slice()) {
            *m += v / t;
        }
    }
    let trace: f64 = estimates
        .iter()
        .map(|e| e.as_slice().iter().zip(&mean).map(|(v, m)| (v - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / t;
    let bias_sq = mean.iter().zip(star.as_slice()).map(|(m, s)| (m - s).powi(2)).sum();
    Ok((trace, bias_sq))
}

/// Shortest round-trip representation, so files are byte-stable.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn mse_csv(records: &[TrialRecord]) -> String {
    let mut s = String::from("d,trial,seed,sq_error,iters,final_grad_norm,converged\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.d,
            r.trial,
            r.seed_used,
            num(r.sq_error),
            r.iters,
            num(r.final_grad_norm),
            r.converged
        );
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("d,mean,stderr\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.d, num(r.mean), num(r.stderr));
    }
    s
}

pub fn hessian_csv(records: &[SpectrumRecord]) -> String {
    let mut s = String::from("d,mc_samples,lambda_max,lambda_min,lambda_max_stderr,bound_log\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.d,
            r.mc_samples,
            num(r.lambda_max),
            num(r.lambda_min),
            num(r.lambda_max_stderr),
            num(r.bound_log)
        );
    }
    s
}

pub fn identity_csv(records: &[IdentityRecord]) -> String {
    let mut s = String::from("d,lhs,rhs,combined_stderr,pass\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{},{}", r.d, num(r.lhs), num(r.rhs), num(r.combined_stderr), r.pass);
    }
    s
}

/// One row per dimension for the chosen ratio direction.
pub fn anticonc_csv(reports: &[AnticoncReport], reversed: bool) -> String {
    let mut s = String::from("d,epsilon,L1,L2,frac_below_L1,frac_above_L2,be_band\n");
    for r in reports {
        let rec = if reversed { &r.reversed } else { &r.forward };
        let th = &rec.thresholds;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            th.d,
            num(th.epsilon),
            num(th.log_l1),
            num(th.log_l2),
            num(rec.frac_below_l1),
            num(rec.frac_above_l2),
            num(rec.be_band)
        );
    }
    s
}

pub fn fit_json(fit: &FitReport) -> String {
    serde_json::to_string_pretty(fit).expect("fit report serializes")
}

pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `mse.csv`, `summary.csv` and, when available, `fit.json`.
pub fn write_mse_outputs(dir: &Path, out: &MseOutcome) -> Result<()> {
    write_text(dir, "mse.csv", &mse_csv(&out.records))?;
    write_text(dir, "summary.csv", &summary_csv(&out.summary))?;
    if let Some(fit) = &out.fit {
        write_text(dir, "fit.json", &fit_json(fit))?;
    }
    Ok(())
}

/// Writes `hessian.csv` and, when available, `fit.json`.
pub fn write_hessian_outputs(dir: &Path, out: &HessianDecayOutcome) -> Result<()> {
    write_text(dir, "hessian.csv", &hessian_csv(&out.records))?;
    if let Some(fit) = &out.fit {
        write_text(dir, "fit.json", &fit_json(fit))?;
    }
    Ok(())
}
