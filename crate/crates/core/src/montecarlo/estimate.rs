use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::{SampleBatch, SamplePlan};
use super::grid::{GridSpec, HistogramAccumulator, PerformanceGrid};
use crate::error::{invalid, Result};
use crate::fusion::DecisionRule;
use crate::math::{erf_inv, CompensatedSum};
use crate::rng::CHUNK_LEN;
use crate::scenario::{CostFunction, Scenario};

/// Chunks evaluated in parallel before their results are merged in order.
const CHUNK_GROUP: usize = 64;

/// Histogram weight per sample.
#[derive(Debug, Clone, Copy)]
pub enum WeightScheme<'a> {
    /// `d_H(h) / d_{H'}(h)`; unit weights under the prior proposal.
    Importance,
    /// `∏_m d_{A_m|H}(a_m, h)`, reproducing the literal histogram prescription for comparison.
    Literal(&'a Scenario),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMethod {
    /// `√(2/L)·s·erf⁻¹(R)` with `s` the sample standard deviation of the weighted costs.
    CltEmpirical,
    /// `√(2/L)·(√B_L(W²) + B_L(W))·erf⁻¹(R)`.
    Theorem4Bound,
}

/// Running sums for `B_L(W) = (1/L) Σ w_l W(c_l − h_l)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RiskAccumulator {
    samples: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
    sum_w_cost_sq: CompensatedSum,
}

impl RiskAccumulator {
    pub fn add(&mut self, weight: f64, cost: f64) {
        let x = weight * cost;
        self.samples += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
        self.sum_w_cost_sq.add(weight * cost * cost);
    }

    pub fn merge(&mut self, other: &RiskAccumulator) {
        self.samples += other.samples;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.sum_w_cost_sq.merge(&other.sum_w_cost_sq);
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn mean(&self) -> f64 {
        self.sum.value() / self.samples as f64
    }

    pub fn estimate(&self, confidence: f64, method: RiskMethod) -> Result<RiskEstimate> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(invalid(format!("confidence level must lie in (0, 1), got {confidence}")));
        }
        if self.samples == 0 {
            return Err(invalid("no samples"));
        }
        let l = self.samples as f64;
        let mean = self.mean();
        let spread = match method {
            RiskMethod::CltEmpirical => {
                let var = if self.samples > 1 { (self.sum_sq.value() - l * mean * mean) / (l - 1.0) } else { 0.0 };
                var.max(0.0).sqrt()
            }
            RiskMethod::Theorem4Bound => (self.sum_w_cost_sq.value() / l).max(0.0).sqrt() + mean,
        };
        let half_width = (2.0 / l).sqrt() * spread * erf_inv(confidence);
        Ok(RiskEstimate {
            estimate: mean,
            samples: self.samples,
            confidence,
            half_width,
            ci_low: mean - half_width,
            ci_high: mean + half_width,
            method,
        })
    }
}

/// Bayes-risk point estimate with a two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub estimate: f64,
    pub samples: u64,
    pub confidence: f64,
    pub half_width: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: RiskMethod,
}

impl RiskEstimate {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.ci_low && x <= self.ci_high
    }
}

/// What to accumulate during one pass over the samples.
#[derive(Debug, Clone)]
pub struct Request<'a> {
    pub grid: Option<GridSpec>,
    pub costs: Vec<CostFunction>,
    pub weights: WeightScheme<'a>,
}

impl Request<'_> {
    pub fn risk(cost: CostFunction) -> Self {
        Request { grid: None, costs: vec![cost], weights: WeightScheme::Importance }
    }

    pub fn performance(grid: GridSpec) -> Self {
        Request { grid: Some(grid), costs: Vec::new(), weights: WeightScheme::Importance }
    }
}

/// Accumulated results of a pass.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub histogram: Option<HistogramAccumulator>,
    /// One accumulator per requested cost, in request order.
    pub risks: Vec<RiskAccumulator>,
    pub samples: u64,
    pub min_decision: f64,
    pub max_decision: f64,
}

impl Outcome {
    fn new(req: &Request) -> Self {
        Self {
            histogram: req.grid.clone().map(HistogramAccumulator::new),
            risks: vec![RiskAccumulator::default(); req.costs.len()],
            samples: 0,
            min_decision: f64::INFINITY,
            max_decision: f64::NEG_INFINITY,
        }
    }

    pub fn merge(&mut self, other: &Outcome) -> Result<()> {
        if let (Some(a), Some(b)) = (&mut self.histogram, &other.histogram) {
            a.merge(b)?;
        }
        for (a, b) in self.risks.iter_mut().zip(&other.risks) {
            a.merge(b);
        }
        self.samples += other.samples;
        self.min_decision = self.min_decision.min(other.min_decision);
        self.max_decision = self.max_decision.max(other.max_decision);
        Ok(())
    }

    pub fn grid(&self) -> Option<PerformanceGrid> {
        self.histogram.as_ref().map(HistogramAccumulator::finish)
    }
}

fn process_chunk(rule: &dyn DecisionRule, batch: &SampleBatch, req: &Request) -> Result<Outcome> {
    if batch.dims() != rule.dims() {
        return Err(invalid(format!("rule expects {} features, samples have {}", rule.dims(), batch.dims())));
    }
    let mut out = Outcome::new(req);
    for l in 0..batch.len() {
        let a = batch.features(l);
        let h = batch.objects()[l];
        let w = batch.weights()[l];
        let c = rule.decide(a)?;
        out.samples += 1;
        out.min_decision = out.min_decision.min(c);
        out.max_decision = out.max_decision.max(c);
        for (acc, cost) in out.risks.iter_mut().zip(&req.costs) {
            acc.add(w, cost.cost(c, h));
        }
        if let Some(hist) = &mut out.histogram {
            let hw = match req.weights {
                WeightScheme::Importance => w,
                WeightScheme::Literal(s) => s.log_likelihood(a, h).exp(),
            };
            hist.add(h, c, hw);
        }
    }
    Ok(out)
}

fn run_chunks<F>(rule: &dyn DecisionRule, chunks: usize, chunk: F, req: &Request) -> Result<Outcome>
where
    F: Fn(usize) -> Result<SampleBatch> + Sync,
{
    let mut total = Outcome::new(req);
    for start in (0..chunks).step_by(CHUNK_GROUP) {
        let end = (start + CHUNK_GROUP).min(chunks);
        let parts: Vec<Result<Outcome>> =
            (start..end).into_par_iter().map(|k| process_chunk(rule, &chunk(k)?, req)).collect();
        for p in parts {
            total.merge(&p?)?;
        }
    }
    Ok(total)
}

/// One streaming pass: samples are drawn chunk by chunk and never held all at once.
pub fn run_plan(rule: &dyn DecisionRule, scenario: &Scenario, plan: &SamplePlan, req: &Request) -> Result<Outcome> {
    scenario.prior().check_proposal(plan.mode)?;
    run_chunks(rule, plan.chunk_count(), |k| plan.draw_chunk(scenario, k), req)
}

/// One pass over an existing batch.
pub fn run_batch(rule: &dyn DecisionRule, batch: &SampleBatch, req: &Request) -> Result<Outcome> {
    let chunks = batch.len().div_ceil(CHUNK_LEN);
    run_chunks(rule, chunks, |k| Ok(batch.slice(k * CHUNK_LEN..((k + 1) * CHUNK_LEN).min(batch.len()))), req)
}

pub fn estimate_performance(rule: &dyn DecisionRule, batch: &SampleBatch, grid: GridSpec) -> Result<PerformanceGrid> {
    Ok(run_batch(rule, batch, &Request::performance(grid))?.grid().expect("grid requested"))
}

pub fn estimate_risk(
    rule: &dyn DecisionRule,
    batch: &SampleBatch,
    cost: &CostFunction,
    confidence: f64,
    method: RiskMethod,
) -> Result<RiskEstimate> {
    let out = run_batch(rule, batch, &Request::risk(cost.clone()))?;
    out.risks[0].estimate(confidence, method)
}
