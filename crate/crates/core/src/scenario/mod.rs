//! Problem statement: object space, prior, sensors, decision space and cost.

mod cost;
pub mod file;
mod prior;
mod sensor;
mod spaces;

pub use cost::CostFunction;
pub use prior::{Prior, PriorForm, ProposalMode, QuadNode};
pub use sensor::{AffineGaussian, CholFactor, CovLaw, Family, MeanLaw, SensorModel};
pub use spaces::{DecisionSpace, Domain, FeatureSpace, ObjectSpace};

use crate::error::{invalid, Result};

/// Sensors are conditionally independent given the object value.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    prior: Prior,
    sensors: Vec<SensorModel>,
    decision: DecisionSpace,
    cost: CostFunction,
}

impl Scenario {
    pub fn new(prior: Prior, sensors: Vec<SensorModel>, decision: DecisionSpace, cost: CostFunction) -> Result<Self> {
        if sensors.is_empty() {
            return Err(invalid("a scenario needs at least one sensor"));
        }
        cost.validate()?;
        let probes: Vec<f64> = match prior.over() {
            ObjectSpace::Points(p) => p.clone(),
            ObjectSpace::Interval { .. } => prior.base_nodes().iter().map(|n| n.h).collect(),
        };
        for (m, s) in sensors.iter().enumerate() {
            if let Some(h) = probes.iter().find(|h| !s.accepts_object(**h)) {
                return Err(invalid(format!("sensor {m} is not defined at object value {h}")));
            }
        }
        Ok(Self { prior, sensors, decision, cost })
    }

    pub fn object(&self) -> &ObjectSpace {
        self.prior.over()
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn sensors(&self) -> &[SensorModel] {
        &self.sensors
    }

    pub fn decision(&self) -> &DecisionSpace {
        &self.decision
    }

    pub fn cost(&self) -> &CostFunction {
        &self.cost
    }

    /// Total feature dimension `N = Σ N_m`.
    pub fn joint_dims(&self) -> usize {
        self.sensors.iter().map(SensorModel::dims).sum()
    }

    /// Start offset of each sensor's block in the joint feature vector.
    pub fn offsets(&self) -> Vec<usize> {
        self.sensors
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s.dims();
                Some(o)
            })
            .collect()
    }

    pub fn with_decision(&self, decision: DecisionSpace) -> Self {
        Self { decision, ..self.clone() }
    }

    pub fn with_cost(&self, cost: CostFunction) -> Result<Self> {
        cost.validate()?;
        Ok(Self { cost, ..self.clone() })
    }

    /// Scenario restricted to a subset of sensors, keeping the prior.
    pub fn subset(&self, sensors: &[usize], decision: DecisionSpace) -> Result<Self> {
        let picked = sensors
            .iter()
            .map(|&m| self.sensors.get(m).cloned().ok_or_else(|| invalid(format!("no sensor {m}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.prior.clone(), picked, decision, self.cost.clone())
    }

    /// `Σ_m ln d_{A_m|H}(a_m, h)` without domain checks.
    pub fn log_likelihood(&self, a: &[f64], h: f64) -> f64 {
        self.sensors
            .iter()
            .zip(self.offsets())
            .map(|(s, o)| s.log_density_unchecked(&a[o..o + s.dims()], h))
            .sum()
    }

    /// Check a joint feature vector against every sensor's feature space.
    pub fn check_features(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.joint_dims() {
            return Err(invalid(format!("expected {} features, got {}", self.joint_dims(), a.len())));
        }
        for (s, o) in self.sensors.iter().zip(self.offsets()) {
            let block = &a[o..o + s.dims()];
            if !s.space().contains(block) {
                return Err(invalid(format!("feature block {block:?} outside its sensor's feature space")));
            }
        }
        Ok(())
    }
}
