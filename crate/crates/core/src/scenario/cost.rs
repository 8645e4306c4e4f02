use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Cost `W(c − h)` for an even, nonnegative, convex `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum CostFunction {
    /// `½x²`.
    Quadratic,
    /// `x^p / p` for even `p ≥ 2`.
    EvenPower { p: u32 },
    /// `Σ_k coeffs[k]·x^(2k)` with nonnegative coefficients.
    Polynomial { coeffs: Vec<f64> },
}

impl CostFunction {
    pub fn even_power(p: u32) -> Result<Self> {
        if p < 2 || !p.is_multiple_of(2) {
            return Err(invalid(format!("cost exponent must be an even integer >= 2, got {p}")));
        }
        Ok(Self::EvenPower { p })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(invalid("polynomial cost needs finite nonnegative coefficients"));
        }
        Ok(Self::Polynomial { coeffs })
    }

    /// `x²`, the squared error.
    pub fn squared_error() -> Self {
        Self::Polynomial { coeffs: vec![0.0, 1.0] }
    }

    /// `W ≡ 0`.
    pub fn zero() -> Self {
        Self::Polynomial { coeffs: vec![0.0] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Quadratic => Ok(()),
            Self::EvenPower { p } => Self::even_power(*p).map(|_| ()),
            Self::Polynomial { coeffs } => Self::polynomial(coeffs.clone()).map(|_| ()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Quadratic => 0.5 * x * x,
            Self::EvenPower { p } => x.powi(*p as i32) / *p as f64,
            Self::Polynomial { coeffs } => {
                let x2 = x * x;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
            }
        }
    }

    pub fn cost(&self, c: f64, h: f64) -> f64 {
        self.eval(c - h)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Polynomial { coeffs } if coeffs.iter().all(|c| *c == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forms() {
        assert_eq!(CostFunction::Quadratic.eval(2.0), 2.0);
        assert_eq!(CostFunction::even_power(4).unwrap().eval(2.0), 4.0);
        assert_eq!(CostFunction::squared_error().eval(-3.0), 9.0);
        assert_eq!(CostFunction::polynomial(vec![1.0, 0.0, 2.0]).unwrap().eval(2.0), 33.0);
        assert!(CostFunction::even_power(3).is_err());
        assert!(CostFunction::polynomial(vec![-1.0]).is_err());
        assert!(CostFunction::zero().is_zero());
    }

    proptest! {
        #[test]
        fn even_nonnegative_convex(x in -50.0f64..50.0, y in -50.0f64..50.0, t in 0.0f64..1.0) {
            for w in [CostFunction::Quadratic, CostFunction::even_power(6).unwrap(), CostFunction::polynomial(vec![0.0, 1.0, 0.5]).unwrap()] {
                prop_assert_eq!(w.eval(x), w.eval(-x));
                prop_assert!(w.eval(x) >= 0.0);
                let mid = w.eval(t * x + (1.0 - t) * y);
                let chord = t * w.eval(x) + (1.0 - t) * w.eval(y);
                prop_assert!(mid <= chord * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
