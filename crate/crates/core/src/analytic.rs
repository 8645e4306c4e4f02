//! Closed-form oracles, written independently of the generic engine.

use std::f64::consts::PI;

use crate::error::{invalid, unsupported, Result};

/// Gaussian scenario: standard normal object, `M` features with mean `u·h` and variance `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussParams {
    pub u: f64,
    pub v: f64,
    pub m: usize,
}

impl GaussParams {
    pub fn new(u: f64, v: f64, m: usize) -> Result<Self> {
        if !(v > 0.0) || !u.is_finite() {
            return Err(invalid("gaussian parameters need finite u and v > 0"));
        }
        if m < 2 || !m.is_multiple_of(2) {
            return Err(invalid(format!("feature count must be even and at least 2, got {m}")));
        }
        Ok(Self { u, v, m })
    }

    fn mu2(&self) -> f64 {
        self.m as f64 * self.u * self.u
    }
}

pub fn gauss_fusion(p: &GaussParams, a: &[f64]) -> f64 {
    p.u * a.iter().sum::<f64>() / (p.mu2() + p.v)
}

pub fn gauss_performance(p: &GaussParams, c: f64, h: f64) -> f64 {
    let (mu2, v) = (p.mu2(), p.v);
    let e = mu2 * (c - h) + c * v;
    (mu2 + v) / (p.u * (2.0 * PI * p.m as f64 * v).sqrt()) * (-e * e / (2.0 * mu2 * v)).exp()
}

pub fn gauss_risk(p: &GaussParams) -> f64 {
    p.v / (p.mu2() + p.v)
}

/// Exponential scenario: unit-rate exponential object, `M` sensors with rate `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpoParams {
    pub m: usize,
}

impl ExpoParams {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("exponential scenario needs at least one sensor"));
        }
        Ok(Self { m })
    }
}

pub fn expo_fusion(p: &ExpoParams, a: &[f64]) -> f64 {
    (p.m as f64 + 1.0) / (a.iter().sum::<f64>() + 1.0)
}

/// Density of `C = (M+1)/(S+1)` with `S | h ~ Gamma(M, h)`; zero for `c > M+1`.
pub fn expo_performance(p: &ExpoParams, c: f64, h: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(invalid(format!("performance is defined for c > 0, got {c}")));
    }
    if h < 0.0 {
        return Err(invalid(format!("object value must be nonnegative, got {h}")));
    }
    let m = p.m as f64;
    if c > m + 1.0 {
        return Ok(0.0);
    }
    let s = (m + 1.0) / c - 1.0;
    let ln_fact: f64 = (1..p.m).map(|k| (k as f64).ln()).sum();
    let log_gamma_pdf = m * h.ln() + (m - 1.0) * s.ln() - h * s - ln_fact;
    Ok(((m + 1.0) / (c * c)) * log_gamma_pdf.exp())
}

pub fn expo_risk(p: &ExpoParams) -> f64 {
    2.0 / (p.m as f64 + 2.0)
}

/// Rates of the two-class Poisson rule `f(A, B) = 1` iff `A + B ≤ 2`, with `A, B | H ~ Poisson(H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonRates {
    /// `P(C = 2 | H = 1)`.
    pub false_positive: f64,
    /// `P(C = 1 | H = 2)`.
    pub miss: f64,
    /// `P(C = 1 | H = 1)`.
    pub correct_low: f64,
}

pub fn poisson_binary_rates() -> PoissonRates {
    let pmf = |k: u32, h: f64| (-h).exp() * h.powi(k as i32) / (1..=k).product::<u32>() as f64;
    let accept = |h: f64| -> f64 {
        let mut p = 0.0;
        for a in 0..=2u32 {
            for b in 0..=(2 - a) {
                p += pmf(a, h) * pmf(b, h);
            }
        }
        p
    };
    let low = accept(1.0);
    PoissonRates { false_positive: 1.0 - low, miss: accept(2.0), correct_low: low }
}

/// Two-stage Gaussian network with `K* = K = ℝ` and `u = v = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbpoGauss {
    pub m: usize,
    /// `A* = group_gain · Σ_{group} A_m`.
    pub group_gain: f64,
    /// `C = system_gain · (A* + B*)`.
    pub system_gain: f64,
    pub risk: f64,
}

impl PbpoGauss {
    pub fn local(&self, group: &[f64]) -> f64 {
        self.group_gain * group.iter().sum::<f64>()
    }

    pub fn system(&self, a_star: f64, b_star: f64) -> f64 {
        self.system_gain * (a_star + b_star)
    }

    /// Composition on a full feature vector split into two equal halves.
    pub fn compose(&self, a: &[f64]) -> f64 {
        let (x, y) = a.split_at(self.m / 2);
        self.system(self.local(x), self.local(y))
    }
}

pub fn pbpo_gauss(p: &GaussParams) -> Result<PbpoGauss> {
    if p.u != 1.0 || p.v != 1.0 {
        return Err(unsupported("the two-stage gaussian identity is stated for u = v = 1"));
    }
    let m = p.m as f64;
    let group_gain = 1.0 / (m / 2.0 + 1.0);
    let system_gain = (m + 2.0) / (2.0 * m + 2.0);
    // C = α·Σ A with Σ A = M·H + N(0, M): E(C − H)² = (αM − 1)² + α²M.
    let alpha = group_gain * system_gain;
    let risk = (alpha * m - 1.0).powi(2) + alpha * alpha * m;
    Ok(PbpoGauss { m: p.m, group_gain, system_gain, risk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::composite_legendre;

    #[test]
    fn gauss_values() {
        let p = GaussParams::new(1.0, 1.0, 2).unwrap();
        assert_eq!(gauss_fusion(&p, &[1.0, 1.0]), 2.0 / 3.0);
        assert_eq!(gauss_fusion(&GaussParams::new(0.7, 2.0, 6).unwrap(), &[0.0; 6]), 0.0);
        let p300 = GaussParams::new(1.0, 1.0, 300).unwrap();
        assert!((gauss_fusion(&p300, &[1.0; 300]) - 300.0 / 301.0).abs() < 1e-15);
        assert!((gauss_risk(&p) - 1.0 / 3.0).abs() < 1e-16);
        assert!((gauss_performance(&p, 0.0, 0.0) - 3.0 / (2.0 * PI.sqrt())).abs() < 1e-15);
        assert!(GaussParams::new(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn gauss_rows_normalize_and_peak_at_shrunk_value() {
        for &(u, v, m, h) in &[(1.0, 1.0, 2, 0.0), (1.0, 1.0, 2, 1.3), (0.5, 2.0, 10, -0.8)] {
            let p = GaussParams::new(u, v, m).unwrap();
            let total = composite_legendre(|c| gauss_performance(&p, c, h), -30.0, 30.0, 200, 16);
            assert!((total - 1.0).abs() < 1e-10);
            let peak = p.mu2() * h / (p.mu2() + p.v);
            let f0 = gauss_performance(&p, peak, h);
            assert!(f0 > gauss_performance(&p, peak + 1e-4, h) && f0 > gauss_performance(&p, peak - 1e-4, h));
        }
    }

    #[test]
    fn expo_values() {
        let p1 = ExpoParams::new(1).unwrap();
        assert_eq!(expo_fusion(&p1, &[1.0]), 1.0);
        assert!((expo_risk(&p1) - 2.0 / 3.0).abs() < 1e-16);
        assert!((expo_risk(&ExpoParams::new(3).unwrap()) - 0.4).abs() < 1e-16);
        assert!(expo_performance(&p1, 0.0, 1.0).is_err());
        assert_eq!(expo_performance(&p1, 2.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn expo_rows_normalize() {
        for m in 1..=4 {
            let p = ExpoParams::new(m).unwrap();
            for &h in &[0.3, 1.0, 2.5] {
                let top = m as f64 + 1.0;
                let total = composite_legendre(|c| expo_performance(&p, c, h).unwrap(), 1e-12, top, 4000, 8);
                assert!((total - 1.0).abs() < 1e-8, "M={m} h={h} total={total}");
            }
        }
    }

    #[test]
    fn poisson_rates_match_symbolic_values() {
        let r = poisson_binary_rates();
        let e = std::f64::consts::E;
        assert!((r.false_positive - (1.0 - 5.0 / (e * e))).abs() < 1e-12);
        assert!((r.miss - 13.0 / e.powi(4)).abs() < 1e-12);
        assert!((r.false_positive + r.correct_low - 1.0).abs() < 1e-15);
        assert!((r.false_positive - 0.3233).abs() < 1e-4 && (r.miss - 0.2381).abs() < 1e-4);
    }

    #[test]
    fn pbpo_identity() {
        for &m in &[2usize, 10, 100] {
            let p = GaussParams::new(1.0, 1.0, m).unwrap();
            let net = pbpo_gauss(&p).unwrap();
            assert!((net.risk - 1.0 / (m as f64 + 1.0)).abs() < 1e-12);
        }
        assert!(pbpo_gauss(&GaussParams::new(2.0, 1.0, 2).unwrap()).is_err());
    }
}
