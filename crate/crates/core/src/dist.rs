//! The data distribution `P* = P̂^d`, the Gaussian noise `Q = N(0, I_d)`, and
//! their log-density ratio.
//!
//! `P̂` has density `p̂(x) = exp(−x⁴/σ⁴) / C` on the real line. The scale
//! `σ = √(4Γ(5/4)/Γ(3/4))` gives unit variance, and `C = 2σΓ(5/4)`. With the
//! substitution `t = x⁴/σ⁴` the magnitude `|x|/σ` is `t^{1/4}` for
//! `t ~ Gamma(1/4, 1)`, which is how draws are produced.
//!
//! Densities are only ever exposed in log form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gamma_quarter_sample, integrate, log_gamma, RngStream};

/// `½ ln(2π)`.
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// One-dimensional quartic density `p̂(x) ∝ exp(−x⁴/σ⁴)` with unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticScalarDist {
    sigma: f64,
    log_norm: f64,
}

impl QuarticScalarDist {
    /// Builds the unit-variance quartic density. Constants come from `ln Γ`.
    pub fn new() -> Result<Self> {
        let lg_5_4 = log_gamma(1.25)?;
        let lg_3_4 = log_gamma(0.75)?;
        let ln_sigma = 0.5 * (4.0f64.ln() + lg_5_4 - lg_3_4);
        let sigma = ln_sigma.exp();
        let log_norm = 2.0f64.ln() + ln_sigma + lg_5_4;
        let dist = Self { sigma, log_norm };
        #[cfg(debug_assertions)]
        {
            let var = dist.variance_by_quadrature()?;
            debug_assert!((var - 1.0).abs() < 1e-8, "quartic variance {var}");
        }
        Ok(dist)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `σ⁴`.
    pub fn sigma4(&self) -> f64 {
        self.sigma.powi(4)
    }

    /// `ln C`, the log normalizer.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        -x.powi(4) / self.sigma4() - self.log_norm
    }

    /// `E[x^{4k}] = σ^{4k} ∏_{j<k} (1/4 + j)` for `k ∈ {1, 2, 3, 4}`.
    pub fn moment_4k(&self, k: u32) -> Result<f64> {
        if !(1..=4).contains(&k) {
            return Err(Error::Domain(format!("moment_4k supports k in 1..=4, got {k}")));
        }
        let rising: f64 = (0..k).map(|j| 0.25 + j as f64).product();
        Ok(self.sigma4().powi(k as i32) * rising)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let t = gamma_quarter_sample(rng);
        rng.sign() * self.sigma * t.powf(0.25)
    }

    /// `∫ x² p̂(x) dx` by quadrature.
    pub fn variance_by_quadrature(&self) -> Result<f64> {
        let r = integrate(
            |x| (2.0 * x.abs().ln() + self.log_pdf(x)).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            1e-12,
        )?;
        Ok(r.value)
    }
}

/// `P* = P̂^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductQuartic {
    d: usize,
    scalar: QuarticScalarDist,
}

impl ProductQuartic {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self {
            d,
            scalar: QuarticScalarDist::new()?,
        })
    }

    pub fn with_scalar(d: usize, scalar: QuarticScalarDist) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self { d, scalar })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn scalar(&self) -> &QuarticScalarDist {
        &self.scalar
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x)?;
        Ok(x.iter().map(|&xi| self.scalar.log_pdf(xi)).sum())
    }
}

/// `Q = N(0, I_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StandardGaussian {
    d: usize,
}

impl StandardGaussian {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self { d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x)?;
        Ok(gaussian_log_pdf(x))
    }
}

/// `ln N(x; 0, I)` without a dimension check.
#[inline]
pub(crate) fn gaussian_log_pdf(x: &[f64]) -> f64 {
    x.iter().map(|&xi| -0.5 * xi * xi - HALF_LN_TWO_PI).sum()
}

fn check_dim(d: usize, x: &[f64]) -> Result<()> {
    if x.len() == d {
        Ok(())
    } else {
        Err(Error::Shape(format!("expected a point of dimension {d}, got {}", x.len())))
    }
}

/// `ℓ(x) = ln p*(x) − ln q(x)`, never exponentiated.
///
/// `R₁(x) = q(x)/p*(x) = e^{−ℓ(x)}` and `R₂(x) = p*(x)/q(x) = e^{ℓ(x)}`.
pub fn log_density_ratio(pstar: &ProductQuartic, q: &StandardGaussian, x: &[f64]) -> Result<f64> {
    if pstar.dim() != q.dim() {
        return Err(Error::Shape(format!(
            "data dimension {} does not match noise dimension {}",
            pstar.dim(),
            q.dim()
        )));
    }
    check_dim(pstar.dim(), x)?;
    Ok(log_ratio_unchecked(pstar.scalar(), x))
}

#[inline]
pub(crate) fn log_ratio_unchecked(scalar: &QuarticScalarDist, x: &[f64]) -> f64 {
    let inv_s4 = 1.0 / scalar.sigma4();
    let per_coord = HALF_LN_TWO_PI - scalar.log_norm();
    x.iter()
        .map(|&xi| {
            let x2 = xi * xi;
            -x2 * x2 * inv_s4 + 0.5 * x2 + per_coord
        })
        .sum()
}

/// Which distribution a batch was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Data,
    Noise,
}

/// `n` i.i.d. points in `ℝ^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    source: Source,
    d: usize,
    points: Vec<f64>,
    seed: u64,
    stream_id: u64,
}

/// Sidecar metadata written next to a batch CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchInfo {
    pub source: Source,
    pub seed: u64,
    pub stream_id: u64,
    pub n: usize,
    pub d: usize,
}

impl SampleBatch {
    /// Wraps explicit points. Used for hand-built batches in tests and tools.
    pub fn from_rows(source: Source, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || d == 0 {
            return Err(Error::Shape("a batch needs at least one non-empty row".into()));
        }
        let mut points = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::Shape("ragged rows in batch".into()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("batch entries must be finite".into()));
            }
            points.extend_from_slice(row);
        }
        Ok(Self {
            source,
            d,
            points,
            seed: 0,
            stream_id: 0,
        })
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.d)
    }

    pub fn info(&self) -> BatchInfo {
        BatchInfo {
            source: self.source,
            seed: self.seed,
            stream_id: self.stream_id,
            n: self.n(),
            d: self.d,
        }
    }

    /// CSV with header `x1,...,xd` and one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.d).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }
}

/// Distributions that can fill a [`SampleBatch`].
pub trait BatchSampler {
    fn dim(&self) -> usize;
    fn source(&self) -> Source;
    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]);

    /// Draws `n` i.i.d. rows.
    fn sample_batch(&self, n: usize, rng: &mut RngStream) -> Result<SampleBatch> {
        if n == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        let d = self.dim();
        let mut points = vec![0.0; n * d];
        for row in points.chunks_exact_mut(d) {
            self.sample_into(rng, row);
        }
        Ok(SampleBatch {
            source: self.source(),
            d,
            points,
            seed: rng.seed(),
            stream_id: rng.stream_id(),
        })
    }
}

impl BatchSampler for ProductQuartic {
    fn dim(&self) -> usize {
        self.d
    }

    fn source(&self) -> Source {
        Source::Data
    }

    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.scalar.sample(rng);
        }
    }
}

impl BatchSampler for StandardGaussian {
    fn dim(&self) -> usize {
        self.d
    }

    fn source(&self) -> Source {
        Source::Noise
    }

    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = rng.standard_normal();
        }
    }
}

/// `KL(p̂ ‖ q̂) = −1/4 − ln C + 1/2 + ½ ln 2π`, closed form.
pub fn kl_quartic_gaussian(scalar: &QuarticScalarDist) -> f64 {
    -0.25 - scalar.log_norm() + 0.5 + HALF_LN_TWO_PI
}

/// `KL(q̂ ‖ p̂) = −1/2 − ½ ln 2π + 3/σ⁴ + ln C`, closed form.
pub fn kl_gaussian_quartic(scalar: &QuarticScalarDist) -> f64 {
    -0.5 - HALF_LN_TWO_PI + 3.0 / scalar.sigma4() + scalar.log_norm()
}
