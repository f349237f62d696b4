//! The exponential family `p_θ(x) = exp(θᵀT(x))` with `T(x) = (x₁⁴, …, x_d⁴, 1)`.
//!
//! The last coordinate of θ carries the negative log normalizer, `θ_{d+1} = −c`,
//! so `ln p_θ` is a plain inner product and no partition function is ever
//! computed.

use serde::{Deserialize, Serialize};

use crate::dist::QuarticScalarDist;
use crate::error::{Error, Result};

/// Natural parameter in `ℝ^{d+1}`. Serializes as a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    /// Wraps `coords` (length `d + 1`, all finite).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Shape(format!("theta needs length d + 1 >= 2, got {}", coords.len())));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("theta coordinates must be finite".into()));
        }
        Ok(Self(coords))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d + 1])
    }

    /// Ambient dimension `d` (one less than the number of coordinates).
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// The log normalizer `c = −θ_{d+1}`.
    pub fn log_normalizer(&self) -> f64 {
        -self.0[self.dim()]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `‖self − other‖²`.
    pub fn sq_distance(&self, other: &ThetaVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).powi(2)).sum()
    }
}

impl TryFrom<Vec<f64>> for ThetaVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThetaVector> for Vec<f64> {
    fn from(t: ThetaVector) -> Self {
        t.0
    }
}

/// `T(x) = (x₁⁴, …, x_d⁴, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats(Vec<f64>);

impl SuffStats {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `1ᵀT(x)`, which is at least one for every `x`.
    pub fn ones_projection(&self) -> f64 {
        self.0.iter().sum()
    }
}

pub fn suff_stats(x: &[f64]) -> SuffStats {
    let mut t = Vec::with_capacity(x.len() + 1);
    fill_suff_stats(x, &mut t);
    SuffStats(t)
}

/// Writes `T(x)` into `out`, replacing its contents.
#[inline]
pub(crate) fn fill_suff_stats(x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(x.iter().map(|&xi| {
        let x2 = xi * xi;
        x2 * x2
    }));
    out.push(1.0);
}

/// `θᵀT(x)`; no normalization is applied beyond what θ carries.
pub fn log_p_theta(theta: &ThetaVector, x: &[f64]) -> Result<f64> {
    if x.len() != theta.dim() {
        return Err(Error::Shape(format!(
            "theta has dimension {} but point has dimension {}",
            theta.dim(),
            x.len()
        )));
    }
    Ok(log_p_theta_unchecked(theta.as_slice(), x))
}

#[inline]
pub(crate) fn log_p_theta_unchecked(theta: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = theta[d];
    for (t, &xi) in theta[..d].iter().zip(x) {
        let x2 = xi * xi;
        acc += t * x2 * x2;
    }
    acc
}

/// `θ* = −(1/σ⁴, …, 1/σ⁴, d·ln C)`, the parameter with `p_{θ*} = P̂^d`.
///
/// The normalizer of the d-fold product is `C^d`, hence the factor `d` in the
/// last coordinate.
pub fn theta_star(d: usize) -> Result<ThetaVector> {
    theta_star_with(d, &QuarticScalarDist::new()?)
}

pub fn theta_star_with(d: usize, scalar: &QuarticScalarDist) -> Result<ThetaVector> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let mut coords = vec![-1.0 / scalar.sigma4(); d];
    coords.push(-(d as f64) * scalar.log_norm());
    ThetaVector::new(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{log_density_ratio, ProductQuartic, StandardGaussian};
    use crate::numerics::{integrate, RngStream};
    use proptest::prelude::*;

    #[test]
    fn suff_stats_examples() {
        assert_eq!(suff_stats(&[0.0, 0.0]).as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(suff_stats(&[1.0, -1.0]).as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(suff_stats(&[2.0]).as_slice(), &[16.0, 1.0]);
    }

    #[test]
    fn theta_star_values() {
        let t1 = theta_star(1).unwrap();
        assert!((t1.as_slice()[0] + 0.114_236_645_261_115_9).abs() < 1e-13);
        assert!((t1.as_slice()[1] + 1.137_246_130_771_523_2).abs() < 1e-12);
        assert!((log_p_theta(&t1, &[0.0]).unwrap() + 1.137_246_130_771_523_2).abs() < 1e-12);
        assert!((t1.log_normalizer() - 1.137_246_130_771_523_2).abs() < 1e-12);

        let t3 = theta_star(3).unwrap();
        assert_eq!(t3.dim(), 3);
        assert!(t3.as_slice()[..3].windows(2).all(|w| w[0] == w[1]));
        assert!(theta_star(0).is_err());
    }

    #[test]
    fn theta_star_normalizes_in_one_dimension() {
        let t1 = theta_star(1).unwrap();
        let total = integrate(
            |x| log_p_theta(&t1, &[x]).unwrap().exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            1e-12,
        )
        .unwrap();
        assert!((total.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn theta_star_reproduces_product_density_and_log_ratio() {
        let mut rng = RngStream::new(3, 0);
        for d in [1usize, 2, 7, 40] {
            let ts = theta_star(d).unwrap();
            let p = ProductQuartic::new(d).unwrap();
            let q = StandardGaussian::new(d).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..d).map(|_| 1.5 * rng.standard_normal()).collect();
                let lp = log_p_theta(&ts, &x).unwrap();
                let want = p.log_pdf(&x).unwrap();
                assert!((lp - want).abs() <= 1e-12 * want.abs().max(1.0), "d={d}");
                let ratio = log_density_ratio(&p, &q, &x).unwrap();
                assert!((lp - q.log_pdf(&x).unwrap() - ratio).abs() <= 1e-12 * ratio.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_theta_and_shape_errors() {
        let z = ThetaVector::zeros(3);
        assert_eq!(log_p_theta(&z, &[1.0, -2.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(log_p_theta(&z, &[1.0]), Err(Error::Shape(_))));
        assert!(ThetaVector::new(vec![1.0]).is_err());
        assert!(ThetaVector::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn json_is_a_plain_array() {
        let t = ThetaVector::new(vec![-0.5, 2.0]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, "[-0.5,2.0]");
        assert_eq!(serde_json::from_str::<ThetaVector>(&s).unwrap(), t);
        assert!(serde_json::from_str::<ThetaVector>("[1.0]").is_err());
    }

    proptest! {
        #[test]
        fn ones_projection_at_least_one(x in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            let t = suff_stats(&x);
            prop_assert_eq!(*t.as_slice().last().unwrap(), 1.0);
            prop_assert!(t.as_slice().iter().all(|&v| v >= 0.0));
            prop_assert!(t.ones_projection() >= 1.0);
        }
    }
}
