//! The posterior-mean fusion rule composed with nearest-point quantization.

use crate::error::{FusionError, Result};
use crate::math::LN_SQRT_2PI;
use crate::scenario::{CholFactor, DecisionSpace, QuadNode, Scenario};

/// Log-weight span kept when a posterior is re-integrated on a narrower window.
const WINDOW_LOG_SPAN: f64 = 40.0;
/// Re-integrate when the effective number of contributing nodes drops below this.
const MIN_EFFECTIVE_NODES: f64 = 8.0;
const MAX_REFINEMENTS: usize = 4;

/// A deterministic map from joint feature vectors to decisions.
pub trait DecisionRule: Sync {
    /// Length of the joint feature vector.
    fn dims(&self) -> usize;
    fn decide(&self, a: &[f64]) -> Result<f64>;
}

/// Affine-mean Gaussian sensor with fixed covariance; contributes `c0 + c1·h + c2·h²`.
#[derive(Debug, Clone)]
struct QuadraticTerm {
    start: usize,
    offset: Vec<f64>,
    factor: CholFactor,
    /// `V⁻¹·slope`
    t: Vec<f64>,
    t_norm2: f64,
    log_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FusionRule {
    scenario: Scenario,
    nodes: Vec<QuadNode>,
    quadratic: Vec<QuadraticTerm>,
    generic: Vec<(usize, usize)>,
    dims: usize,
    refine: bool,
}

impl FusionRule {
    pub fn new(scenario: &Scenario) -> Self {
        let mut quadratic = Vec::new();
        let mut generic = Vec::new();
        for (m, (sensor, start)) in scenario.sensors().iter().zip(scenario.offsets()).enumerate() {
            match sensor.affine_gaussian() {
                Some(g) => {
                    let mut t = g.slope.to_vec();
                    g.factor.solve_lower(&mut t);
                    let n = t.len() as f64;
                    quadratic.push(QuadraticTerm {
                        start,
                        offset: g.offset.to_vec(),
                        factor: g.factor.clone(),
                        t_norm2: t.iter().map(|x| x * x).sum(),
                        t,
                        log_norm: -g.factor.log_det() - n * LN_SQRT_2PI,
                    });
                }
                None => generic.push((m, start)),
            }
        }
        Self {
            nodes: scenario.prior().base_nodes(),
            refine: !scenario.prior().is_discrete(),
            dims: scenario.joint_dims(),
            scenario: scenario.clone(),
            quadratic,
            generic,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Per-coordinate terms are summed in sorted order so the result does not depend on feature order.
    fn quadratic_coefficients(&self, a: &[f64]) -> (f64, f64, f64) {
        let (mut c0, mut c2) = (0.0, 0.0);
        let mut z = Vec::new();
        let mut sq = Vec::with_capacity(a.len());
        let mut cross = Vec::with_capacity(a.len());
        for q in &self.quadratic {
            z.clear();
            z.extend(a[q.start..q.start + q.offset.len()].iter().zip(&q.offset).map(|(x, o)| x - o));
            q.factor.solve_lower(&mut z);
            c0 += q.log_norm;
            c2 -= 0.5 * q.t_norm2;
            sq.extend(z.iter().map(|x| x * x));
            cross.extend(z.iter().zip(&q.t).map(|(x, y)| x * y));
        }
        sq.sort_unstable_by(f64::total_cmp);
        cross.sort_unstable_by(f64::total_cmp);
        (c0 - 0.5 * sq.iter().sum::<f64>(), cross.iter().sum(), c2)
    }

    fn log_weights(&self, a: &[f64], nodes: &[QuadNode], coeffs: (f64, f64, f64), out: &mut Vec<f64>) {
        let (c0, c1, c2) = coeffs;
        let sensors = self.scenario.sensors();
        out.clear();
        out.extend(nodes.iter().map(|n| {
            let mut lw = n.log_w + c0 + n.h * (c1 + n.h * c2);
            for &(m, start) in &self.generic {
                let s = &sensors[m];
                lw += s.log_density_unchecked(&a[start..start + s.dims()], n.h);
            }
            lw
        }));
    }

    /// Narrower Gauss–Legendre nodes around the nodes carrying the posterior mass.
    fn window_nodes(&self, nodes: &[QuadNode], lw: &[f64], max: f64) -> Vec<QuadNode> {
        let keep: Vec<usize> = (0..nodes.len()).filter(|&i| lw[i] >= max - WINDOW_LOG_SPAN).collect();
        let first = keep[0].saturating_sub(1);
        let last = (keep[keep.len() - 1] + 1).min(nodes.len() - 1);
        let (lo, hi) = self.scenario.object().hull();
        let mut a = nodes[first].h;
        let mut b = nodes[last].h;
        if first == keep[0] {
            let gap = if nodes.len() > 1 { nodes[1].h - nodes[0].h } else { 1.0 };
            a = (a - 4.0 * gap).max(lo);
        }
        if last == keep[keep.len() - 1] {
            let n = nodes.len();
            let gap = if n > 1 { nodes[n - 1].h - nodes[n - 2].h } else { 1.0 };
            b = (b + 4.0 * gap).min(hi);
        }
        if !(a < b) {
            let mid = nodes[keep[0]].h;
            a = (mid - 1e-6).max(lo);
            b = (mid + 1e-6).min(hi);
        }
        self.scenario.prior().legendre_nodes(a, b)
    }

    /// Posterior mean `E[H | A = a]`, before quantization.
    pub fn posterior_mean(&self, a: &[f64]) -> Result<f64> {
        self.scenario.check_features(a)?;
        let coeffs = self.quadratic_coefficients(a);
        let mut lw = Vec::with_capacity(self.nodes.len());
        self.log_weights(a, &self.nodes, coeffs, &mut lw);
        let mut refined;
        let mut nodes: &[QuadNode] = &self.nodes;
        let mut rounds = 0;
        loop {
            let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(FusionError::Degenerate { features: a.to_vec() });
            }
            let (mut sw, mut sw2, mut swh) = (0.0, 0.0, 0.0);
            for (n, l) in nodes.iter().zip(&lw) {
                let w = (l - max).exp();
                sw += w;
                sw2 += w * w;
                swh += w * n.h;
            }
            if !self.refine || rounds == MAX_REFINEMENTS || sw * sw / sw2 >= MIN_EFFECTIVE_NODES {
                return Ok(swh / sw);
            }
            refined = self.window_nodes(nodes, &lw, max);
            nodes = &refined;
            self.log_weights(a, nodes, coeffs, &mut lw);
            rounds += 1;
        }
    }

    /// Quantized decision `Q(f(a))`.
    pub fn fuse(&self, a: &[f64]) -> Result<f64> {
        Ok(self.scenario.decision().quantize(self.posterior_mean(a)?))
    }

    /// Posterior mean and its quantized decision.
    pub fn fuse_soft(&self, a: &[f64]) -> Result<(f64, f64)> {
        let m = self.posterior_mean(a)?;
        Ok((m, self.scenario.decision().quantize(m)))
    }
}

impl DecisionRule for FusionRule {
    fn dims(&self) -> usize {
        self.dims
    }

    fn decide(&self, a: &[f64]) -> Result<f64> {
        self.fuse(a)
    }
}

pub fn posterior_mean(scenario: &Scenario, a: &[f64]) -> Result<f64> {
    FusionRule::new(scenario).posterior_mean(a)
}

pub fn quantize(space: &DecisionSpace, x: f64) -> f64 {
    space.quantize(x)
}
