use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::spaces::ObjectSpace;
use crate::error::{invalid, unsupported, Result};
use crate::math::{normal_cdf, normal_quantile, normal_sf, open_unit, LN_SQRT_2PI};
use crate::quadrature::QuadratureRule;

const HERMITE_NODES: usize = 64;
const LAGUERRE_NODES: usize = 64;
const LEGENDRE_NODES: usize = 128;
const TABLE_SEGMENT_NODES: usize = 8;
/// Half-width, in standard deviations, of the window used for a normal prior on a half-bounded interval.
const NORMAL_WINDOW_SDS: f64 = 12.0;

/// Shape of the prior density `d_H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorForm {
    /// Point masses on the points of a discrete object space.
    Discrete { weights: Vec<f64> },
    /// Normal density restricted (and renormalized) to the object interval.
    Normal { mean: f64, sd: f64 },
    /// Exponential density starting at the lower end of the object interval.
    Exponential { rate: f64 },
    /// Piecewise-linear density through `(points[i], density[i])`, spanning the interval.
    Tabulated { points: Vec<f64>, density: Vec<f64> },
}

/// One quadrature node over the object space: location and log weight (prior mass included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub h: f64,
    pub log_w: f64,
}

/// Which distribution `H'` object values are proposed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalMode {
    Prior,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    over: ObjectSpace,
    form: PriorForm,
    /// Normalizing mass of a truncated normal/exponential, or cumulative table of a tabulated prior.
    norm: f64,
    cumulative: Vec<f64>,
}

impl Prior {
    pub fn discrete(over: ObjectSpace, weights: Vec<f64>) -> Result<Self> {
        let ObjectSpace::Points(points) = &over else {
            return Err(invalid("discrete prior needs a discrete object space"));
        };
        if weights.len() != points.len() {
            return Err(invalid(format!(
                "prior has {} weights for {} object points",
                weights.len(),
                points.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("prior weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("prior weights sum to {total}, not 1")));
        }
        Ok(Self { over, form: PriorForm::Discrete { weights }, norm: 1.0, cumulative: Vec::new() })
    }

    /// Uniform weights over a discrete object space.
    pub fn discrete_uniform(over: ObjectSpace) -> Result<Self> {
        let n = match &over {
            ObjectSpace::Points(p) => p.len(),
            _ => return Err(invalid("discrete prior needs a discrete object space")),
        };
        Self::discrete(over, vec![1.0 / n as f64; n])
    }

    pub fn normal(over: ObjectSpace, mean: f64, sd: f64) -> Result<Self> {
        let ObjectSpace::Interval { lo, hi } = over else {
            return Err(invalid("normal prior needs an interval object space"));
        };
        if !(sd > 0.0) || !mean.is_finite() || !sd.is_finite() {
            return Err(invalid("normal prior needs finite mean and positive sd"));
        }
        let a = (lo - mean) / sd;
        let b = (hi - mean) / sd;
        let norm = if a > 0.0 { normal_sf(a) - normal_sf(b) } else { normal_cdf(b) - normal_cdf(a) };
        if !(norm > 1e-300) {
            return Err(invalid("normal prior carries no mass on the object interval"));
        }
        Ok(Self { over, form: PriorForm::Normal { mean, sd }, norm, cumulative: Vec::new() })
    }

    pub fn standard_normal() -> Self {
        Self::normal(ObjectSpace::real_line(), 0.0, 1.0).expect("valid standard normal")
    }

    pub fn exponential(over: ObjectSpace, rate: f64) -> Result<Self> {
        let ObjectSpace::Interval { lo, hi } = over else {
            return Err(invalid("exponential prior needs an interval object space"));
        };
        if !lo.is_finite() {
            return Err(invalid("exponential prior needs a finite lower end"));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(invalid("exponential prior needs a positive rate"));
        }
        let norm = -(-rate * (hi - lo)).exp_m1();
        Ok(Self { over, form: PriorForm::Exponential { rate }, norm, cumulative: Vec::new() })
    }

    pub fn tabulated(over: ObjectSpace, points: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let ObjectSpace::Interval { lo, hi } = over else {
            return Err(invalid("tabulated prior needs an interval object space"));
        };
        if points.len() < 2 || points.len() != density.len() {
            return Err(invalid("tabulated prior needs matching point and density lists of length >= 2"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("tabulated prior points must be strictly increasing"));
        }
        if points[0] != lo || points[points.len() - 1] != hi {
            return Err(invalid("tabulated prior points must span the object interval exactly"));
        }
        if density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(invalid("tabulated prior densities must be nonnegative"));
        }
        let mut cumulative = vec![0.0];
        for i in 1..points.len() {
            let seg = 0.5 * (density[i - 1] + density[i]) * (points[i] - points[i - 1]);
            cumulative.push(cumulative[i - 1] + seg);
        }
        let total = cumulative[cumulative.len() - 1];
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("tabulated prior integrates to {total}, not 1")));
        }
        Ok(Self { over, form: PriorForm::Tabulated { points, density }, norm: total, cumulative })
    }

    pub fn over(&self) -> &ObjectSpace {
        &self.over
    }

    pub fn form(&self) -> &PriorForm {
        &self.form
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.form, PriorForm::Discrete { .. })
    }

    /// Log prior density (continuous forms) or log point mass (discrete form) at `h`.
    pub fn log_density(&self, h: f64) -> f64 {
        if !self.over.contains(h) {
            return f64::NEG_INFINITY;
        }
        match &self.form {
            PriorForm::Discrete { weights } => {
                let ObjectSpace::Points(points) = &self.over else { unreachable!() };
                let idx = points.binary_search_by(|p| p.total_cmp(&h)).expect("contained point");
                weights[idx].ln()
            }
            PriorForm::Normal { mean, sd } => {
                let z = (h - mean) / sd;
                -0.5 * z * z - LN_SQRT_2PI - sd.ln() - self.norm.ln()
            }
            PriorForm::Exponential { rate } => {
                let (lo, _) = self.over.hull();
                rate.ln() - rate * (h - lo) - self.norm.ln()
            }
            PriorForm::Tabulated { points, density } => {
                let i = segment_of(points, h);
                let t = (h - points[i]) / (points[i + 1] - points[i]);
                (density[i] + t * (density[i + 1] - density[i])).ln()
            }
        }
    }

    pub fn density(&self, h: f64) -> f64 {
        self.log_density(h).exp()
    }

    /// Prior probability of `H <= h`.
    pub fn cdf(&self, h: f64) -> f64 {
        let (lo, hi) = self.over.hull();
        if h < lo {
            return 0.0;
        }
        if h >= hi {
            return 1.0;
        }
        match &self.form {
            PriorForm::Discrete { weights } => {
                let ObjectSpace::Points(points) = &self.over else { unreachable!() };
                points.iter().zip(weights).filter(|(p, _)| **p <= h).map(|(_, w)| w).sum()
            }
            PriorForm::Normal { mean, sd } => {
                let a = (lo - mean) / sd;
                let z = (h - mean) / sd;
                if a > 0.0 {
                    (normal_sf(a) - normal_sf(z)) / self.norm
                } else {
                    (normal_cdf(z) - normal_cdf(a)) / self.norm
                }
            }
            PriorForm::Exponential { rate } => -(-rate * (h - lo)).exp_m1() / self.norm,
            PriorForm::Tabulated { points, density } => {
                let i = segment_of(points, h);
                let width = points[i + 1] - points[i];
                let t = h - points[i];
                self.cumulative[i] + density[i] * t + (density[i + 1] - density[i]) * t * t / (2.0 * width)
            }
        }
    }

    /// Prior mass of `[a, b]`; for discrete priors the closed interval.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        match &self.form {
            PriorForm::Discrete { weights } => {
                let ObjectSpace::Points(points) = &self.over else { unreachable!() };
                points.iter().zip(weights).filter(|(p, _)| **p >= a && **p <= b).map(|(_, w)| w).sum()
            }
            _ => (self.cdf(b) - self.cdf(a)).max(0.0),
        }
    }

    /// Fixed quadrature over the object space with the prior folded into the log weights.
    pub fn base_nodes(&self) -> Vec<QuadNode> {
        let (lo, hi) = self.over.hull();
        match &self.form {
            PriorForm::Discrete { weights } => {
                let ObjectSpace::Points(points) = &self.over else { unreachable!() };
                points.iter().zip(weights).map(|(&h, &w)| QuadNode { h, log_w: w.ln() }).collect()
            }
            PriorForm::Normal { mean, sd } if lo == f64::NEG_INFINITY && hi == f64::INFINITY => {
                let rule = QuadratureRule::gauss_hermite(HERMITE_NODES);
                let ln_sqrt_pi = 0.5 * PI.ln();
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| QuadNode { h: mean + SQRT_2 * sd * x, log_w: w.ln() - ln_sqrt_pi })
                    .collect()
            }
            PriorForm::Normal { mean, sd } => {
                let a = lo.max(mean - NORMAL_WINDOW_SDS * sd);
                let b = hi.min(mean + NORMAL_WINDOW_SDS * sd);
                self.legendre_nodes(a, b)
            }
            PriorForm::Exponential { rate } if hi == f64::INFINITY => {
                let rule = QuadratureRule::gauss_laguerre(LAGUERRE_NODES);
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| QuadNode { h: lo + x / rate, log_w: w.ln() })
                    .collect()
            }
            PriorForm::Exponential { .. } => self.legendre_nodes(lo, hi),
            PriorForm::Tabulated { points, .. } => {
                let rule = QuadratureRule::gauss_legendre(TABLE_SEGMENT_NODES);
                let mut nodes = Vec::with_capacity(rule.len() * (points.len() - 1));
                for seg in points.windows(2) {
                    let half = 0.5 * (seg[1] - seg[0]);
                    let mid = 0.5 * (seg[1] + seg[0]);
                    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                        let h = mid + half * x;
                        nodes.push(QuadNode { h, log_w: (w * half).ln() + self.log_density(h) });
                    }
                }
                nodes
            }
        }
    }

    /// 128-node Gauss–Legendre nodes on `[a, b]` weighted by the prior density.
    pub fn legendre_nodes(&self, a: f64, b: f64) -> Vec<QuadNode> {
        let rule = QuadratureRule::gauss_legendre_on(LEGENDRE_NODES, a, b);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&h, &w)| QuadNode { h, log_w: w.ln() + self.log_density(h) })
            .collect()
    }

    /// Draw `h` from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.over.hull();
        match &self.form {
            PriorForm::Discrete { weights } => {
                let ObjectSpace::Points(points) = &self.over else { unreachable!() };
                let u = open_unit(rng);
                let mut acc = 0.0;
                for (p, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *p;
                    }
                }
                // rounding slack: last point with positive weight
                let last = weights.iter().rposition(|w| *w > 0.0).expect("some positive weight");
                points[last]
            }
            PriorForm::Normal { mean, sd } if lo == f64::NEG_INFINITY && hi == f64::INFINITY => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            PriorForm::Normal { mean, sd } => {
                let a = (lo - mean) / sd;
                let b = (hi - mean) / sd;
                let u = open_unit(rng);
                let z = if a > 0.0 {
                    let (qa, qb) = (normal_sf(a), normal_sf(b));
                    -normal_quantile(qb + u * (qa - qb))
                } else {
                    let (pa, pb) = (normal_cdf(a), normal_cdf(b));
                    normal_quantile(pa + u * (pb - pa))
                };
                (mean + sd * z).clamp(lo, hi)
            }
            PriorForm::Exponential { rate } => {
                let u = open_unit(rng);
                (lo - (-u * self.norm).ln_1p() / rate).min(hi)
            }
            PriorForm::Tabulated { points, density } => {
                let u = open_unit(rng) * self.norm;
                let i = self.cumulative.partition_point(|&c| c <= u).clamp(1, points.len() - 1) - 1;
                let width = points[i + 1] - points[i];
                let slope = (density[i + 1] - density[i]) / width;
                let rem = u - self.cumulative[i];
                let t = if slope.abs() < 1e-300 {
                    rem / density[i]
                } else {
                    let disc = (density[i] * density[i] + 2.0 * slope * rem).max(0.0);
                    2.0 * rem / (density[i] + disc.sqrt())
                };
                (points[i] + t).clamp(points[i], points[i + 1])
            }
        }
    }

    /// Draw `h` from the proposal `H'` and return it with its importance weight `d_H(h) / d_H'(h)`.
    pub fn sample_proposal<R: Rng + ?Sized>(&self, mode: ProposalMode, rng: &mut R) -> Result<(f64, f64)> {
        match mode {
            ProposalMode::Prior => Ok((self.sample(rng), 1.0)),
            ProposalMode::Uniform => match (&self.over, &self.form) {
                (ObjectSpace::Points(points), PriorForm::Discrete { weights }) => {
                    let n = points.len();
                    let idx = ((open_unit(rng) * n as f64) as usize).min(n - 1);
                    Ok((points[idx], weights[idx] * n as f64))
                }
                (ObjectSpace::Interval { lo, hi }, _) => {
                    if !lo.is_finite() || !hi.is_finite() {
                        return Err(unsupported(format!(
                            "uniform proposal needs a bounded object interval, got [{lo}, {hi}]"
                        )));
                    }
                    let h = lo + open_unit(rng) * (hi - lo);
                    Ok((h, self.density(h) * (hi - lo)))
                }
                _ => unreachable!("prior form always matches its object space"),
            },
        }
    }

    /// Check that a proposal mode can be sampled from.
    pub fn check_proposal(&self, mode: ProposalMode) -> Result<()> {
        if mode == ProposalMode::Uniform {
            let (lo, hi) = self.over.hull();
            if !lo.is_finite() || !hi.is_finite() {
                return Err(unsupported(format!(
                    "uniform proposal needs a bounded object interval, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

fn segment_of(points: &[f64], h: f64) -> usize {
    points.partition_point(|&p| p <= h).clamp(1, points.len() - 1) - 1
}
