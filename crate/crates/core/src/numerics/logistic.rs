//! Overflow-free logistic primitives.

/// `ln(1 + e^t)`.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `ln(1 / (1 + e^{−t})) = −softplus(−t)`.
#[inline]
pub fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

/// `1 / (1 + e^{−t})`.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_points() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!((log_sigmoid(-1000.0) + 1000.0).abs() < 1e-12);
        assert!((log_sigmoid(5.0) - (1.0 / (1.0 + (-5.0f64).exp())).ln()).abs() < 1e-15);
        assert!((log_sigmoid(5.0) + 0.006_715_348_489_118).abs() < 1e-12);
        assert_eq!(log_sigmoid(1e6), -0.0);
        assert_eq!(log_sigmoid(-1e6), -1e6);
        assert!((softplus(1e6) - 1e6).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn sigmoid_complements(t in -700.0f64..700.0) {
            prop_assert!((sigmoid(t) + sigmoid(-t) - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn softplus_difference_is_identity(t in -700.0f64..700.0) {
            // softplus(t) − softplus(−t) = t
            prop_assert!((softplus(t) - softplus(-t) - t).abs() <= 1e-12 * t.abs().max(1.0));
        }

        #[test]
        fn log_sigmoid_is_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(log_sigmoid(lo) <= log_sigmoid(hi));
            prop_assert!(log_sigmoid(lo).is_finite());
        }
    }
}
