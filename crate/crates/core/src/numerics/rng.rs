use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Two streams with the same pair replay the same sequence; streams sharing a
/// seed but differing in `stream_id` are independent ChaCha streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.inner.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// `+1.0` or `−1.0` with equal probability.
    pub fn sign(&mut self) -> f64 {
        if self.inner.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Exact draw from `Gamma(shape, 1)` for `0 < shape < 1`.
///
/// Ahrens–Dieter rejection: propose from the mixture of the power density
/// `x^{a−1}` on `[0, 1]` and the exponential tail on `(1, ∞)`, then accept with
/// the missing factor (`e^{−x}` or `x^{a−1}` respectively).
pub fn gamma_small_shape_sample(shape: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(shape > 0.0 && shape < 1.0);
    let b = 1.0 + shape / std::f64::consts::E;
    loop {
        let p = b * rng.uniform_open();
        let v = rng.uniform_open();
        if p <= 1.0 {
            let x = p.powf(1.0 / shape);
            if v <= (-x).exp() {
                return x;
            }
        } else {
            let x = -((b - p) / shape).ln();
            if v <= x.powf(shape - 1.0) {
                return x;
            }
        }
    }
}

/// Exact draw from `Gamma(1/4, 1)`.
pub fn gamma_quarter_sample(rng: &mut RngStream) -> f64 {
    gamma_small_shape_sample(0.25, rng)
}
