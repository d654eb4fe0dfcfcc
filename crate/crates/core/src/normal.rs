//! Standard normal distribution helpers.

use statrs::function::erf::{erfc, erfc_inv};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile function. `p` must lie in `[0, 1]`.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erfc_inv(2.0 * p)
}

#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert!(
            (cdf(1.959963984540054) - 0.975).abs() < 1e-10,
            "{}",
            cdf(1.959963984540054) - 0.975
        );
        assert!((quantile(0.975) - 1.959963984540054).abs() < 1e-10);
        assert!((quantile(cdf(-2.3)) + 2.3).abs() < 1e-9);
        assert_eq!(cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(cdf(f64::INFINITY), 1.0);
    }
}
