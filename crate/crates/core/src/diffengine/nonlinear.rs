//! Overflow-safe scalar nonlinearities.

/// `ln(1 + eˣ)`, evaluated as `max(x, 0) + ln(1 + e^{−|x|})`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic function `1 / (1 + e^{−x})`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softplus_reference_points() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(100.0) - 100.0).abs() < 1e-12);
        let tiny = (-100.0f64).exp();
        assert!(((softplus(-100.0) - tiny) / tiny).abs() < 1e-6);
        assert!(softplus(1000.0).is_finite());
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(f64::INFINITY), 1.0);
        assert_eq!(sigmoid(f64::NEG_INFINITY), 0.0);
        assert!(sigmoid(-800.0).is_finite());
    }

    proptest! {
        #[test]
        fn sigmoid_is_symmetric(x in -50.0f64..50.0) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn softplus_derivative_is_sigmoid(x in -30.0f64..30.0) {
            let h = 1e-5;
            let fd = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
            prop_assert!((fd - sigmoid(x)).abs() < 1e-8);
        }
    }
}
