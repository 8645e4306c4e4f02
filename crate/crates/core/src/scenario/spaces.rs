use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

fn check_sorted(points: &[f64], what: &str) -> Result<()> {
    if points.is_empty() {
        return Err(invalid(format!("{what}: point list is empty")));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(invalid(format!("{what}: points must be finite")));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(format!("{what}: points must be strictly increasing")));
    }
    Ok(())
}

/// Range `I` of the hidden object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObjectSpace {
    Interval { lo: f64, hi: f64 },
    Points(Vec<f64>),
}

impl ObjectSpace {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(invalid(format!("object interval needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self::Interval { lo, hi })
    }

    pub fn real_line() -> Self {
        Self::Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn points(points: Vec<f64>) -> Result<Self> {
        check_sorted(&points, "object space")?;
        Ok(Self::Points(points))
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Points(_))
    }

    /// Smallest closed interval containing the space.
    pub fn hull(&self) -> (f64, f64) {
        match self {
            Self::Interval { lo, hi } => (*lo, *hi),
            Self::Points(p) => (p[0], p[p.len() - 1]),
        }
    }

    pub fn contains(&self, h: f64) -> bool {
        match self {
            Self::Interval { lo, hi } => h >= *lo && h <= *hi,
            Self::Points(p) => p.binary_search_by(|x| x.total_cmp(&h)).is_ok(),
        }
    }
}

/// Per-dimension feature domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Real,
    NonNegative,
    Interval(f64, f64),
    NonNegativeIntegers,
    /// Finite outcome set; used for derived (decision-valued) features.
    Finite(Vec<f64>),
}

impl Domain {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            Domain::Real => x.is_finite(),
            Domain::NonNegative => x >= 0.0 && x.is_finite(),
            Domain::Interval(lo, hi) => x >= *lo && x <= *hi,
            Domain::NonNegativeIntegers => x >= 0.0 && x.fract() == 0.0 && x.is_finite(),
            Domain::Finite(p) => p.binary_search_by(|v| v.total_cmp(&x)).is_ok(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Domain::NonNegativeIntegers | Domain::Finite(_))
    }
}

/// Feature space `J_m` of one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    domains: Vec<Domain>,
}

impl FeatureSpace {
    pub fn new(domains: Vec<Domain>) -> Result<Self> {
        if domains.is_empty() {
            return Err(invalid("feature space needs at least one dimension"));
        }
        for d in &domains {
            match d {
                Domain::Interval(lo, hi) if !(lo < hi) => {
                    return Err(invalid(format!("feature interval needs lo < hi, got [{lo}, {hi}]")))
                }
                Domain::Finite(p) => check_sorted(p, "feature outcomes")?,
                _ => {}
            }
        }
        Ok(Self { domains })
    }

    pub fn uniform(domain: Domain, dims: usize) -> Result<Self> {
        Self::new(vec![domain; dims])
    }

    pub fn dims(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.domains.len() && a.iter().zip(&self.domains).all(|(x, d)| d.contains(*x))
    }
}

/// Admissible fused outputs `K`; always closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DecisionSpace {
    Interval { lo: f64, hi: f64 },
    Points(Vec<f64>),
    /// Disjoint closed intervals in increasing order.
    Union(Vec<(f64, f64)>),
}

impl DecisionSpace {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(invalid(format!("decision interval needs lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(Self::Interval { lo, hi })
    }

    pub fn real_line() -> Self {
        Self::Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn points(points: Vec<f64>) -> Result<Self> {
        check_sorted(&points, "decision space")?;
        Ok(Self::Points(points))
    }

    pub fn union(mut parts: Vec<(f64, f64)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("decision union is empty"));
        }
        parts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(lo, hi) in &parts {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(invalid(format!("decision union component [{lo}, {hi}] is malformed")));
            }
        }
        if parts.windows(2).any(|w| w[0].1 >= w[1].0) {
            return Err(invalid("decision union components must be disjoint"));
        }
        Ok(Self::Union(parts))
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Points(_))
    }

    pub fn is_real_line(&self) -> bool {
        matches!(self, Self::Interval { lo, hi } if *lo == f64::NEG_INFINITY && *hi == f64::INFINITY)
    }

    pub fn hull(&self) -> (f64, f64) {
        match self {
            Self::Interval { lo, hi } => (*lo, *hi),
            Self::Points(p) => (p[0], p[p.len() - 1]),
            Self::Union(parts) => (parts[0].0, parts[parts.len() - 1].1),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            Self::Interval { lo, hi } => x >= *lo && x <= *hi,
            Self::Points(p) => p.binary_search_by(|v| v.total_cmp(&x)).is_ok(),
            Self::Union(parts) => parts.iter().any(|&(lo, hi)| x >= lo && x <= hi),
        }
    }

    /// Nearest point of the space to `x`; equidistant candidates resolve to the smaller one.
    pub fn quantize(&self, x: f64) -> f64 {
        match self {
            Self::Interval { lo, hi } => x.clamp(*lo, *hi),
            Self::Points(p) => nearest_of_sorted(p, x),
            Self::Union(parts) => {
                let mut best = parts[0].0;
                let mut best_dist = f64::INFINITY;
                for &(lo, hi) in parts {
                    let cand = x.clamp(lo, hi);
                    let dist = (x - cand).abs();
                    // components are increasing, so strict `<` keeps the smaller candidate on ties
                    if dist < best_dist {
                        best = cand;
                        best_dist = dist;
                    }
                }
                best
            }
        }
    }
}

fn nearest_of_sorted(points: &[f64], x: f64) -> f64 {
    let idx = points.partition_point(|&p| p < x);
    if idx == 0 {
        return points[0];
    }
    if idx == points.len() {
        return points[idx - 1];
    }
    let below = points[idx - 1];
    let above = points[idx];
    if above - x < x - below {
        above
    } else {
        below
    }
}
