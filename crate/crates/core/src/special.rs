//! Gamma-family helpers shared by the likelihoods.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}

/// Log of the rising factorial `a (a+1) ... (a+n-1)`; zero for `n = 0`.
pub fn pochhammer_log(a: f64, n: u64) -> f64 {
    debug_assert!(a > 0.0);
    if n <= 16 {
        (0..n).map(|k| (a + k as f64).ln()).sum()
    } else {
        ln_gamma(a + n as f64) - ln_gamma(a)
    }
}

/// `log G(a, b) = log Γ(a) − a log b`, the log normaliser of a Gamma(a, b)
/// density in the shape/rate convention.
pub fn gamma_norm_log(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("gamma_norm_log needs a, b > 0, got ({a}, {b})")));
    }
    Ok(ln_gamma(a) - a * b.ln())
}

pub fn log_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Log-density of Gamma(shape, rate) at `x`.
pub fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Numerically stable `log Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pochhammer_examples() {
        assert_eq!(pochhammer_log(0.5, 0), 0.0);
        assert!((pochhammer_log(0.5, 1) - 0.5f64.ln()).abs() < 1e-15);
        assert!((pochhammer_log(0.5, 3) - 1.875f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn pochhammer_branches_agree() {
        for &a in &[0.3, 0.5, 1.7, 12.0] {
            let direct: f64 = (0..40).map(|k| (a + k as f64).ln()).sum();
            assert!((pochhammer_log(a, 40) - direct).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn gamma_norm_examples() {
        assert!(gamma_norm_log(1.0, 1.0).unwrap().abs() < 1e-14);
        assert!((gamma_norm_log(3.0, 2.0).unwrap() - 0.25f64.ln()).abs() < 1e-13);
        assert!((gamma_norm_log(2.0, 0.5).unwrap() - 4f64.ln()).abs() < 1e-13);
        assert!(gamma_norm_log(0.0, 1.0).is_err());
        assert!(gamma_norm_log(1.0, -1.0).is_err());
    }

    #[test]
    fn gamma_ratio_limit() {
        let lambda = 1e6;
        let base = gamma_norm_log(lambda, lambda).unwrap();
        for n in 0..=10u32 {
            for t in [0.5, 1.0, 3.0, 10.0] {
                let v = gamma_norm_log(lambda + n as f64, lambda + t).unwrap() - base;
                assert!(((v + t) / t).abs() < 1e-4, "n={n} t={t} v={v}");
            }
        }
    }

    #[test]
    fn logistic_inverts_logit() {
        for &p in &[1e-9, 0.1, 0.5, 0.73, 1.0 - 1e-9] {
            assert!((logistic(logit(p)) - p).abs() < 1e-12);
        }
        assert_eq!(logit(0.5), 0.0);
    }
}
