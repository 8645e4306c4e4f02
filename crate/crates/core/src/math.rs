//! Small numerical helpers shared across the engine.

use std::f64::consts::{PI, SQRT_2};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln(Σ exp(x_i))` with the max shifted out. Returns `-inf` for empty or all `-inf` input.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Inverse error function, polished by a Newton step on `erf`/`erfc`.
pub fn erf_inv(x: f64) -> f64 {
    if x <= -1.0 {
        return if x == -1.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if x >= 1.0 {
        return if x == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    let mut y = statrs::function::erf::erf_inv(x);
    for _ in 0..2 {
        // residual in the better-conditioned tail form
        let r = if x > 0.5 { (1.0 - x) - libm::erfc(y) } else if x < -0.5 { libm::erfc(-y) - (1.0 + x) } else { libm::erf(y) - x };
        let r = if x > 0.5 { -r } else { r };
        y -= r * PI.sqrt() / 2.0 * (y * y).exp();
    }
    y
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return if p == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    let mut x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let r = if x > 0.0 { (1.0 - p) - normal_sf(x) } else { normal_cdf(x) - p };
        let r = if x > 0.0 { -r } else { r };
        let phi = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if phi > 0.0 {
            x -= r / phi;
        }
    }
    x
}

pub fn ln_factorial(k: f64) -> f64 {
    libm::lgamma(k + 1.0)
}

/// Uniform draw from the open interval (0, 1).
pub(crate) fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_handles_extremes() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = logsumexp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-10, 0.01, 0.3, 0.5, 0.9, 0.999_999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-14 * p.max(1e-3), "{p}");
        }
    }

    #[test]
    fn erf_matches_reference_values() {
        assert!((normal_cdf(-0.75) - 0.226_627_352_376_868_2).abs() < 1e-16);
        assert!((normal_cdf(1.25) - 0.894_350_226_333_144_6).abs() < 1e-15);
        for &x in &[-0.999, -0.6, -0.1, 0.2, 0.55, 0.9, 0.999_99] {
            assert!((libm::erf(erf_inv(x)) - x).abs() < 2e-16, "{x}");
        }
    }
}
