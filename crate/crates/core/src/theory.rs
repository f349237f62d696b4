//! Closed-form and quadrature evaluations of the analytic quantities behind the
//! hardness results: Bhattacharyya/Hellinger/TV distances, the Hessian norm
//! upper bound, log-ratio moments for Berry–Esseen anti-concentration, the
//! `T_up` quantiles and the Laurent–Massart χ² tail bound.
//!
//! Powers such as `ρ^d` and thresholds `exp(μd ± α√d)` are kept as logs.

use serde::Serialize;

use crate::dist::{
    kl_gaussian_quartic, kl_quartic_gaussian, log_ratio_unchecked, BatchSampler, ProductQuartic,
    QuarticScalarDist, StandardGaussian, HALF_LN_TWO_PI,
};
use crate::error::{Error, Result};
use crate::model::fill_suff_stats;
use crate::numerics::{integrate, normal_quantile, RngStream};

/// Berry–Esseen constant used when none is supplied. The theorem only
/// guarantees some absolute constant below one.
pub const DEFAULT_BERRY_ESSEEN: f64 = 0.8;

/// Constant `M` with `∫‖TTᵀ‖_F² p* ≤ d²M` for every `d ≥ 1`; the supremum of
/// the ratio is attained at `d = 1` (≈ 13467).
pub const FISHER_M_CONST: f64 = 16384.0;

const QUAD_TOL: f64 = 1e-12;

/// `∫ √(p q)` for one-dimensional log-densities.
pub fn bhattacharyya<P, Q>(log_p: P, log_q: Q) -> Result<f64>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    Ok(integrate(
        |x| (0.5 * (log_p(x) + log_q(x))).exp(),
        f64::NEG_INFINITY,
        f64::INFINITY,
        QUAD_TOL,
    )?
    .value)
}

/// Bhattacharyya coefficient `ρ(P̂, N(0,1))`, about 0.9906.
pub fn bhattacharyya_rho() -> Result<f64> {
    let p = QuarticScalarDist::new()?;
    bhattacharyya(|x| p.log_pdf(x), |x| -0.5 * x * x - HALF_LN_TWO_PI)
}

/// Tensorized distances between `P* = P̂^d` and `Q = N(0, I_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceReport {
    pub d: usize,
    pub rho: f64,
    /// `H² = 2(1 − ρ^d)`.
    pub hellinger_sq_d: f64,
    /// `TV ≥ 1 − ρ^d`.
    pub tv_lower_bound_d: f64,
}

pub fn tv_hellinger_report(d: usize) -> Result<DistanceReport> {
    tv_hellinger_report_with(bhattacharyya_rho()?, d)
}

/// Same as [`tv_hellinger_report`] for a precomputed `rho`.
pub fn tv_hellinger_report_with(rho: f64, d: usize) -> Result<DistanceReport> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!("rho must lie in (0, 1], got {rho}")));
    }
    let gap = -(d as f64 * rho.ln()).exp_m1();
    Ok(DistanceReport {
        d,
        rho,
        hellinger_sq_d: 2.0 * gap,
        tv_lower_bound_d: gap,
    })
}

/// Which log-ratio the Berry–Esseen argument is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioDirection {
    /// `y = ln(q̂/p̂)(x)` with `x ~ P̂`; governs `R₁ = q/p*` under `P*`.
    DataVsNoise,
    /// `y = ln(p̂/q̂)(x)` with `x ~ N(0, 1)`; governs `R₂ = p*/q` under `Q`.
    NoiseVsData,
}

/// Mean, standard deviation and third absolute central moment of the
/// per-coordinate log-ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRatioMoments {
    pub mu_r: f64,
    pub sigma_r: f64,
    pub gamma_r: f64,
}

impl LogRatioMoments {
    /// `C_BE·γ/(σ³√d)`.
    pub fn berry_esseen_band(&self, d: usize, c_be: f64) -> f64 {
        c_be * self.gamma_r / (self.sigma_r.powi(3) * (d as f64).sqrt())
    }

    /// Smallest `d` with `C_BE·γ/(σ³√d) ≤ ε/2`.
    pub fn min_dimension_for(&self, epsilon: f64, c_be: f64) -> usize {
        let ratio = c_be * self.gamma_r / (self.sigma_r.powi(3) * 0.5 * epsilon);
        ratio.powi(2).ceil() as usize
    }
}

/// Log-ratio moments by one-dimensional quadrature.
pub fn kl_and_logratio_moments(direction: RatioDirection) -> Result<LogRatioMoments> {
    let p = QuarticScalarDist::new()?;
    let log_q = |x: f64| -0.5 * x * x - HALF_LN_TWO_PI;
    // (log density of the sampling law, the log-ratio y(x))
    let (log_w, y): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match direction {
        RatioDirection::DataVsNoise => (
            Box::new(move |x| p.log_pdf(x)),
            Box::new(move |x| -log_ratio_unchecked(&p, &[x])),
        ),
        RatioDirection::NoiseVsData => (Box::new(log_q), Box::new(move |x| log_ratio_unchecked(&p, &[x]))),
    };
    let expect = |g: &dyn Fn(f64) -> f64, cuts: &[f64]| -> Result<f64> {
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend_from_slice(cuts);
        edges.push(f64::INFINITY);
        edges.windows(2).try_fold(0.0, |acc, w| {
            Ok(acc + integrate(|x| log_w(x).exp() * g(x), w[0], w[1], QUAD_TOL)?.value)
        })
    };
    let mu = expect(&|x| y(x), &[])?;
    let var = expect(&|x| (y(x) - mu).powi(2), &[])?;
    // y − μ is a quadratic in x², so |y − μ|³ has at most four kinks.
    let sign = match direction {
        RatioDirection::DataVsNoise => 1.0,
        RatioDirection::NoiseVsData => -1.0,
    };
    let cuts = quadratic_in_square_roots(sign / p.sigma4(), -0.5 * sign, y(0.0) - mu);
    let gamma = expect(&|x| (y(x) - mu).abs().powi(3), &cuts)?;
    Ok(LogRatioMoments {
        mu_r: mu,
        sigma_r: var.sqrt(),
        gamma_r: gamma,
    })
}

/// Sorted real roots in `x` of `a x⁴ + b x² + c`.
fn quadratic_in_square_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let mut xs = Vec::new();
    for u in [(-b - disc.sqrt()) / (2.0 * a), (-b + disc.sqrt()) / (2.0 * a)] {
        if u > 0.0 {
            xs.push(-u.sqrt());
            xs.push(u.sqrt());
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Closed-form `μ_r`: `−KL(p̂‖q̂)` or `−KL(q̂‖p̂)`.
pub fn mu_r_closed_form(direction: RatioDirection) -> Result<f64> {
    let p = QuarticScalarDist::new()?;
    Ok(match direction {
        RatioDirection::DataVsNoise => -kl_quartic_gaussian(&p),
        RatioDirection::NoiseVsData => -kl_gaussian_quartic(&p),
    })
}

/// Anti-concentration thresholds on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnticoncThresholds {
    pub d: usize,
    pub epsilon: f64,
    /// `Φ⁻¹(1/2 + ε/2)`, so that `Φ(−c) = 1/2 − ε/2`.
    pub c: f64,
    /// `α = c·σ_r`.
    pub alpha: f64,
    pub mu: f64,
    /// `μd − α√d`.
    pub log_l1: f64,
    /// `μd + α√d`.
    pub log_l2: f64,
}

pub fn anticonc_thresholds(d: usize, epsilon: f64, moments: &LogRatioMoments) -> Result<AnticoncThresholds> {
    if !(epsilon > 0.0 && epsilon <= 0.125) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1/8], got {epsilon}")));
    }
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let c = normal_quantile(0.5 + 0.5 * epsilon);
    let alpha = c * moments.sigma_r;
    let centre = moments.mu_r * d as f64;
    let spread = alpha * (d as f64).sqrt();
    Ok(AnticoncThresholds {
        d,
        epsilon,
        c,
        alpha,
        mu: moments.mu_r,
        log_l1: centre - spread,
        log_l2: centre + spread,
    })
}

/// Empirical check of anti-concentration for one ratio direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnticoncRecord {
    pub direction: RatioDirection,
    pub thresholds: AnticoncThresholds,
    pub moments: LogRatioMoments,
    pub n_mc: usize,
    /// Fraction of draws with log-ratio `≤ log_l1`.
    pub frac_below_l1: f64,
    /// Fraction of draws with log-ratio `≥ log_l2`.
    pub frac_above_l2: f64,
    pub stderr_below: f64,
    pub stderr_above: f64,
    pub be_band: f64,
    /// Empirical CDF at zero of `(Y − μd)/(σ√d)`.
    pub standardized_cdf_at_zero: f64,
    pub pass: bool,
}

impl AnticoncRecord {
    /// Required level `1/2 − ε`.
    pub fn target(&self) -> f64 {
        0.5 - self.thresholds.epsilon
    }
}

/// Both ratio directions at one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnticoncReport {
    pub forward: AnticoncRecord,
    pub reversed: AnticoncRecord,
}

impl AnticoncReport {
    pub fn pass(&self) -> bool {
        self.forward.pass && self.reversed.pass
    }
}

/// Samples `log R₁ = −ℓ(x)` under `P*` and `log R₂ = ℓ(y)` under `Q` and counts
/// how often they fall beyond the thresholds.
pub fn verify_anticonc(d: usize, epsilon: f64, n_mc: usize, rng: &mut RngStream) -> Result<AnticoncReport> {
    verify_anticonc_with(d, epsilon, n_mc, DEFAULT_BERRY_ESSEEN, rng)
}

pub fn verify_anticonc_with(
    d: usize,
    epsilon: f64,
    n_mc: usize,
    c_be: f64,
    rng: &mut RngStream,
) -> Result<AnticoncReport> {
    if n_mc < 10_000 {
        return Err(Error::Domain(format!("n_mc must be at least 10^4, got {n_mc}")));
    }
    let pstar = ProductQuartic::new(d)?;
    let q = StandardGaussian::new(d)?;
    let mut x = vec![0.0; d];
    let mut run = |direction: RatioDirection, rng: &mut RngStream| -> Result<AnticoncRecord> {
        let moments = kl_and_logratio_moments(direction)?;
        let thresholds = anticonc_thresholds(d, epsilon, &moments)?;
        let (mut below, mut above, mut nonpos) = (0usize, 0usize, 0usize);
        let scale = moments.sigma_r * (d as f64).sqrt();
        for _ in 0..n_mc {
            let y = match direction {
                RatioDirection::DataVsNoise => {
                    pstar.sample_into(rng, &mut x);
                    -log_ratio_unchecked(pstar.scalar(), &x)
                }
                RatioDirection::NoiseVsData => {
                    q.sample_into(rng, &mut x);
                    log_ratio_unchecked(pstar.scalar(), &x)
                }
            };
            below += usize::from(y <= thresholds.log_l1);
            above += usize::from(y >= thresholds.log_l2);
            nonpos += usize::from((y - moments.mu_r * d as f64) / scale <= 0.0);
        }
        let n = n_mc as f64;
        let frac_below = below as f64 / n;
        let frac_above = above as f64 / n;
        let se = |p: f64| (p * (1.0 - p) / n).sqrt();
        let target = 0.5 - epsilon;
        let pass = frac_below >= target - 3.0 * se(frac_below) && frac_above >= target - 3.0 * se(frac_above);
        Ok(AnticoncRecord {
            direction,
            thresholds,
            moments,
            n_mc,
            frac_below_l1: frac_below,
            frac_above_l2: frac_above,
            stderr_below: se(frac_below),
            stderr_above: se(frac_above),
            be_band: moments.berry_esseen_band(d, c_be),
            standardized_cdf_at_zero: nonpos as f64 / n,
            pass,
        })
    };
    let forward = run(RatioDirection::DataVsNoise, rng)?;
    let reversed = run(RatioDirection::NoiseVsData, rng)?;
    Ok(AnticoncReport { forward, reversed })
}

/// `∫‖T(x)T(x)ᵀ‖_F² p*(x) dx` against its `d²M` bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherBoundReport {
    pub d: usize,
    pub exact_value: f64,
    pub m_const: f64,
    pub bound: f64,
}

/// `E‖T‖⁴ = d·E[x¹⁶] + d(d−1)·E[x⁸]² + 2d·E[x⁸] + 1` from closed-form moments.
pub fn fisher_frobenius(d: usize) -> Result<FisherBoundReport> {
    fisher_frobenius_with(d, &QuarticScalarDist::new()?)
}

pub fn fisher_frobenius_with(d: usize, p: &QuarticScalarDist) -> Result<FisherBoundReport> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let e8 = p.moment_4k(2)?;
    let e16 = p.moment_4k(4)?;
    let df = d as f64;
    let exact_value = df * e16 + df * (df - 1.0) * e8 * e8 + 2.0 * df * e8 + 1.0;
    Ok(FisherBoundReport {
        d,
        exact_value,
        m_const: FISHER_M_CONST,
        bound: df * df * FISHER_M_CONST,
    })
}

/// Upper bounds on `‖∇²L(θ*)‖₂`, as natural logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianNormBound {
    pub d: usize,
    /// `ln(½ ρ^{d/2} √(E‖T‖⁴))`.
    pub log_bound: f64,
    /// `ln(½ ρ^{d/2} d √M)`.
    pub log_loose_bound: f64,
}

pub fn hessian_norm_bound(d: usize) -> Result<HessianNormBound> {
    hessian_norm_bound_with(d, bhattacharyya_rho()?, &QuarticScalarDist::new()?)
}

pub fn hessian_norm_bound_with(d: usize, rho: f64, p: &QuarticScalarDist) -> Result<HessianNormBound> {
    let fisher = fisher_frobenius_with(d, p)?;
    let base = 0.5f64.ln() + 0.5 * d as f64 * rho.ln();
    Ok(HessianNormBound {
        d,
        log_bound: base + 0.5 * fisher.exact_value.ln(),
        log_loose_bound: base + (d as f64).ln() + 0.5 * fisher.m_const.ln(),
    })
}

/// Empirical upper quantiles of `‖T(x)‖` under `P*` and `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TUpEstimate {
    pub d: usize,
    pub quantile: f64,
    pub t_up_data: f64,
    pub t_up_noise: f64,
}

fn empirical_quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let idx = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1;
    values[idx]
}

pub fn t_up_estimate(d: usize, quantile: f64, n_mc: usize, rng: &mut RngStream) -> Result<TUpEstimate> {
    if n_mc < 10_000 {
        return Err(Error::Domain(format!("n_mc must be at least 10^4, got {n_mc}")));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::Domain(format!("quantile must lie in (0, 1), got {quantile}")));
    }
    let pstar = ProductQuartic::new(d)?;
    let q = StandardGaussian::new(d)?;
    let mut x = vec![0.0; d];
    let mut t = Vec::with_capacity(d + 1);
    let mut norms = |sampler: &dyn BatchSampler, rng: &mut RngStream| -> Vec<f64> {
        (0..n_mc)
            .map(|_| {
                sampler.sample_into(rng, &mut x);
                fill_suff_stats(&x, &mut t);
                t.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect()
    };
    let mut data = norms(&pstar, rng);
    let mut noise = norms(&q, rng);
    Ok(TUpEstimate {
        d,
        quantile,
        t_up_data: empirical_quantile(&mut data, quantile),
        t_up_noise: empirical_quantile(&mut noise, quantile),
    })
}

/// Laurent–Massart: `Pr[X − d ≥ 2√(td) + 2t] ≤ e^{−t}` for `X ~ χ²_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTail {
    pub d: usize,
    pub t: f64,
    /// `d + 2√(td) + 2t`.
    pub threshold: f64,
    pub bound: f64,
    pub empirical: f64,
    pub stderr: f64,
}

pub fn chi_square_tail_check(d: usize, t: f64, n_mc: usize, rng: &mut RngStream) -> Result<ChiSquareTail> {
    if d == 0 || !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("need d >= 1 and t > 0, got d={d}, t={t}")));
    }
    if n_mc == 0 {
        return Err(Error::Domain("n_mc must be positive".into()));
    }
    let threshold = d as f64 + 2.0 * (t * d as f64).sqrt() + 2.0 * t;
    let mut hits = 0usize;
    for _ in 0..n_mc {
        let sq: f64 = (0..d).map(|_| rng.standard_normal().powi(2)).sum();
        hits += usize::from(sq >= threshold);
    }
    let p = hits as f64 / n_mc as f64;
    Ok(ChiSquareTail {
        d,
        t,
        threshold,
        bound: (-t).exp(),
        empirical: p,
        stderr: (p * (1.0 - p) / n_mc as f64).sqrt(),
    })
}
