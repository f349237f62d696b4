#![allow(dead_code)]

use nalgebra::DMatrix;
use nce_lab::dist::{BatchSampler, ProductQuartic, SampleBatch, StandardGaussian};
use nce_lab::model::{theta_star, ThetaVector};
use nce_lab::nce::{empirical_grad, empirical_hessian, empirical_loss};
use nce_lab::numerics::RngStream;

pub const FD_STEP: f64 = 1e-4;

/// Five-point central difference of `f` along coordinate `i`.
pub fn five_point<F: Fn(&[f64]) -> f64>(f: F, at: &[f64], i: usize, h: f64) -> f64 {
    let shifted = |k: f64| {
        let mut p = at.to_vec();
        p[i] += k * h;
        f(&p)
    };
    (-shifted(2.0) + 8.0 * shifted(1.0) - 8.0 * shifted(-1.0) + shifted(-2.0)) / (12.0 * h)
}

/// A random θ near θ* and fresh batches for draw `k`.
pub fn random_case(d: usize, n: usize, k: u64) -> (ThetaVector, SampleBatch, SampleBatch) {
    let mut rng = RngStream::new(1000 + k, d as u64);
    let mut theta = theta_star(d).unwrap().as_slice().to_vec();
    for v in &mut theta {
        *v += 0.1 * rng.standard_normal();
    }
    let data = ProductQuartic::new(d).unwrap().sample_batch(n, &mut rng).unwrap();
    let noise = StandardGaussian::new(d).unwrap().sample_batch(n, &mut rng).unwrap();
    (ThetaVector::new(theta).unwrap(), data, noise)
}

fn theta(v: &[f64]) -> ThetaVector {
    ThetaVector::new(v.to_vec()).unwrap()
}

/// `max|fd − g| / max|g|` for the gradient.
pub fn grad_fd_error(t: &ThetaVector, data: &SampleBatch, noise: &SampleBatch) -> f64 {
    let g = empirical_grad(t, data, noise).unwrap();
    let loss = |p: &[f64]| empirical_loss(&theta(p), data, noise).unwrap();
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (0..g.len())
        .map(|i| (five_point(loss, t.as_slice(), i, FD_STEP) - g[i]).abs())
        .fold(0.0, f64::max)
        / scale
}

/// `max|fd − H| / max|H|` for the Hessian, differencing the gradient.
pub fn hessian_fd_error(t: &ThetaVector, data: &SampleBatch, noise: &SampleBatch) -> (f64, DMatrix<f64>) {
    let h = empirical_hessian(t, data, noise).unwrap();
    let k = h.nrows();
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..k {
            let gi = |p: &[f64]| empirical_grad(&theta(p), data, noise).unwrap()[i];
            worst = worst.max((five_point(gi, t.as_slice(), j, FD_STEP) - h[(i, j)]).abs());
        }
    }
    (worst / scale, h)
}
