//! Centralized and two-stage (PBPO) fusion configurations.
//!
//! In a two-stage configuration each group of sensors is fused locally onto an
//! intermediate decision space `K*`, and the system center fuses the local
//! decisions onto `K`. The system center needs the conditional law of each
//! local decision given `H`; it is obtained in one of three ways:
//!
//! * `K* = ℝ`, normal prior on ℝ and affine Gaussian sensors: the local
//!   posterior mean is itself Gaussian given `H`, with closed-form moments.
//! * `K* = ℝ` otherwise: the local center passes its features through.
//! * discrete `K*` and discrete `I`: the table `P(local decision = k | H = h)`
//!   is computed by locating decision boundaries (one continuous feature) or by
//!   enumerating the feature lattice (discrete features).

use crate::error::{invalid, unsupported, Result};
use crate::fusion::{DecisionRule, FusionRule};
use crate::quadrature::composite_legendre;
use crate::scenario::file::TopologySpec;
use crate::scenario::{
    CholFactor, DecisionSpace, Domain, Family, FeatureSpace, ObjectSpace, PriorForm, Scenario, SensorModel,
};

const SCAN_POINTS: usize = 20_000;
const BISECTIONS: usize = 80;
const PANEL_FRACTION: f64 = 1.0 / 4000.0;
const MAX_LATTICE: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum FusionTopology {
    Centralized,
    /// Groups partition the sensor indices; `intermediate[g]` is the local decision space of group `g`.
    Pbpo { groups: Vec<Vec<usize>>, intermediate: Vec<DecisionSpace> },
}

impl FusionTopology {
    /// Same intermediate space for every group.
    pub fn pbpo(groups: Vec<Vec<usize>>, intermediate: DecisionSpace) -> Self {
        let intermediate = vec![intermediate; groups.len()];
        FusionTopology::Pbpo { groups, intermediate }
    }

    pub fn from_spec(spec: &TopologySpec) -> Result<Self> {
        Ok(match spec {
            TopologySpec::Centralized => FusionTopology::Centralized,
            TopologySpec::Pbpo { groups, intermediate } => Self::pbpo(groups.clone(), intermediate.build()?),
        })
    }

    fn validate(&self, sensors: usize) -> Result<()> {
        let FusionTopology::Pbpo { groups, intermediate } = self else { return Ok(()) };
        if groups.is_empty() || groups.len() != intermediate.len() {
            return Err(invalid("topology needs one intermediate decision space per group"));
        }
        let mut seen = vec![false; sensors];
        for g in groups {
            if g.is_empty() {
                return Err(invalid("topology groups must be non-empty"));
            }
            for &m in g {
                if m >= sensors || std::mem::replace(&mut seen[m], true) {
                    return Err(invalid(format!("sensor {m} is out of range or assigned twice")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid("topology groups must cover every sensor"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Local {
    PassThrough,
    Decide(Box<FusionRule>),
}

#[derive(Debug, Clone)]
struct Stage {
    /// `(start, len)` of each member sensor's block in the joint feature vector.
    blocks: Vec<(usize, usize)>,
    local: Local,
}

/// How the system center models one group's output.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivedLaw {
    PassThrough,
    /// Local decision is `offset + slope·h + sd·N(0, 1)`.
    Gaussian { offset: f64, slope: f64, sd: f64 },
    /// `probs[i][k] = P(local decision = outcomes[k] | H = objects[i])`.
    Table { outcomes: Vec<f64>, probs: Vec<Vec<f64>>, max_row_error: f64 },
}

/// Two-stage rule: local fusion per group followed by system fusion.
#[derive(Debug, Clone)]
pub struct ComposedRule {
    dims: usize,
    stages: Vec<Stage>,
    laws: Vec<DerivedLaw>,
    system: FusionRule,
}

impl ComposedRule {
    pub fn system(&self) -> &FusionRule {
        &self.system
    }

    pub fn derived_laws(&self) -> &[DerivedLaw] {
        &self.laws
    }

    /// Outputs of every local center, concatenated in group order.
    pub fn local_outputs(&self, a: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            match &stage.local {
                Local::PassThrough => {
                    for &(s, n) in &stage.blocks {
                        out.extend_from_slice(&a[s..s + n]);
                    }
                }
                Local::Decide(rule) => {
                    let x: Vec<f64> = stage.blocks.iter().flat_map(|&(s, n)| a[s..s + n].iter().copied()).collect();
                    out.push(rule.fuse(&x)?);
                }
            }
        }
        Ok(out)
    }
}

impl DecisionRule for ComposedRule {
    fn dims(&self) -> usize {
        self.dims
    }

    fn decide(&self, a: &[f64]) -> Result<f64> {
        if a.len() != self.dims {
            return Err(invalid(format!("expected {} features, got {}", self.dims, a.len())));
        }
        self.system.fuse(&self.local_outputs(a)?)
    }
}

/// A centralized or two-stage rule.
#[derive(Debug, Clone)]
pub enum NetworkRule {
    Centralized(FusionRule),
    TwoStage(ComposedRule),
}

impl NetworkRule {
    /// System-level posterior mean and its quantized decision.
    pub fn fuse_soft(&self, a: &[f64]) -> Result<(f64, f64)> {
        match self {
            NetworkRule::Centralized(r) => r.fuse_soft(a),
            NetworkRule::TwoStage(r) => {
                if a.len() != r.dims {
                    return Err(invalid(format!("expected {} features, got {}", r.dims, a.len())));
                }
                r.system.fuse_soft(&r.local_outputs(a)?)
            }
        }
    }
}

impl DecisionRule for NetworkRule {
    fn dims(&self) -> usize {
        match self {
            NetworkRule::Centralized(r) => r.dims(),
            NetworkRule::TwoStage(r) => r.dims(),
        }
    }

    fn decide(&self, a: &[f64]) -> Result<f64> {
        match self {
            NetworkRule::Centralized(r) => r.decide(a),
            NetworkRule::TwoStage(r) => r.decide(a),
        }
    }
}

/// Normal prior `(mean, sd)` on the whole real line, if that is the prior.
fn normal_prior(scenario: &Scenario) -> Option<(f64, f64)> {
    match (scenario.object(), scenario.prior().form()) {
        (ObjectSpace::Interval { lo, hi }, PriorForm::Normal { mean, sd }) if lo.is_infinite() && hi.is_infinite() => {
            Some((*mean, *sd))
        }
        _ => None,
    }
}

/// `Σ |V⁻¹ s|²` over affine Gaussian sensors; `None` if any sensor is not of that form.
fn information(sensors: &[&SensorModel]) -> Option<f64> {
    let mut total = 0.0;
    for s in sensors {
        let g = s.affine_gaussian()?;
        let mut t = g.slope.to_vec();
        g.factor.solve_lower(&mut t);
        total += t.iter().map(|x| x * x).sum::<f64>();
    }
    Some(total)
}

pub fn build_pbpo(scenario: &Scenario, topology: &FusionTopology) -> Result<NetworkRule> {
    topology.validate(scenario.sensors().len())?;
    let FusionTopology::Pbpo { groups, intermediate } = topology else {
        return Ok(NetworkRule::Centralized(FusionRule::new(scenario)));
    };
    let offsets = scenario.offsets();
    let mut stages = Vec::new();
    let mut laws = Vec::new();
    let mut derived = Vec::new();
    for (group, kstar) in groups.iter().zip(intermediate) {
        let members: Vec<&SensorModel> = group.iter().map(|&m| &scenario.sensors()[m]).collect();
        let blocks = group.iter().map(|&m| (offsets[m], scenario.sensors()[m].dims())).collect();
        let sub = scenario.subset(group, kstar.clone())?;
        if kstar.is_real_line() {
            match (normal_prior(scenario), information(&members)) {
                (Some((mean, sd)), Some(t)) if t > 0.0 => {
                    let p = 1.0 / (sd * sd) + t;
                    let (offset, slope, spread) = (mean / (sd * sd * p), t / p, t.sqrt() / p);
                    derived.push(SensorModel::gaussian_affine(
                        vec![offset],
                        vec![slope],
                        CholFactor::diagonal(&[spread])?,
                    )?);
                    laws.push(DerivedLaw::Gaussian { offset, slope, sd: spread });
                    stages.push(Stage { blocks, local: Local::Decide(Box::new(FusionRule::new(&sub))) });
                }
                _ => {
                    derived.extend(members.iter().map(|s| (*s).clone()));
                    laws.push(DerivedLaw::PassThrough);
                    stages.push(Stage { blocks, local: Local::PassThrough });
                }
            }
            continue;
        }
        let DecisionSpace::Points(outcomes) = kstar else {
            return Err(unsupported("intermediate decision spaces must be the real line or a finite point set"));
        };
        let ObjectSpace::Points(objects) = scenario.object() else {
            return Err(unsupported(
                "a finite intermediate decision space needs a discrete object space to tabulate local decisions",
            ));
        };
        let rule = FusionRule::new(&sub);
        let (probs, max_row_error) = tabulate(&rule, &members, objects, outcomes)?;
        derived.push(SensorModel::new(
            FeatureSpace::new(vec![Domain::Finite(outcomes.clone())])?,
            Family::Categorical { objects: objects.clone(), outcomes: outcomes.clone(), probs: probs.clone() },
        )?);
        laws.push(DerivedLaw::Table { outcomes: outcomes.clone(), probs, max_row_error });
        stages.push(Stage { blocks, local: Local::Decide(Box::new(rule)) });
    }
    let system = Scenario::new(scenario.prior().clone(), derived, scenario.decision().clone(), scenario.cost().clone())?;
    Ok(NetworkRule::TwoStage(ComposedRule {
        dims: scenario.joint_dims(),
        stages,
        laws,
        system: FusionRule::new(&system),
    }))
}

/// Rows of `P(rule output = outcome | H = h)` and the largest pre-normalization deviation of a row sum from 1.
fn tabulate(
    rule: &FusionRule,
    members: &[&SensorModel],
    objects: &[f64],
    outcomes: &[f64],
) -> Result<(Vec<Vec<f64>>, f64)> {
    let index = |c: f64| outcomes.binary_search_by(|o| o.total_cmp(&c)).expect("decision lies in K*");
    let mut probs = vec![vec![0.0; outcomes.len()]; objects.len()];
    if members.len() == 1 && members[0].dims() == 1 && !members[0].is_discrete() {
        let sensor = members[0];
        let (lo, hi) = objects.iter().map(|&h| sensor.effective_range(h)).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |acc, (a, b)| (acc.0.min(a), acc.1.max(b)),
        );
        let segments = decision_segments(|x| rule.fuse(&[x]), lo, hi)?;
        let panel = (hi - lo) * PANEL_FRACTION;
        for (i, &h) in objects.iter().enumerate() {
            for &(a, b, c) in &segments {
                let panels = ((b - a) / panel).ceil().max(1.0) as usize;
                probs[i][index(c)] +=
                    composite_legendre(|x| sensor.density(&[x], h).unwrap_or(0.0), a, b, panels, 8);
            }
        }
    } else if members.iter().all(|s| s.is_discrete()) {
        let mut axes: Vec<Vec<f64>> = Vec::new();
        for s in members {
            for d in s.space().domains() {
                axes.push(match d {
                    Domain::Finite(p) => p.clone(),
                    Domain::NonNegativeIntegers => {
                        let top = objects.iter().map(|&h| s.effective_range(h).1).fold(0.0, f64::max);
                        (0..=top.ceil() as usize).map(|k| k as f64).collect()
                    }
                    _ => unreachable!("discrete sensor"),
                });
            }
        }
        let size = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len())).unwrap_or(usize::MAX);
        if size > MAX_LATTICE {
            return Err(unsupported(format!("feature lattice of {size} points is too large to enumerate")));
        }
        let mut idx = vec![0usize; axes.len()];
        let mut a = vec![0.0; axes.len()];
        for _ in 0..size {
            for (j, &k) in idx.iter().enumerate() {
                a[j] = axes[j][k];
            }
            let c = index(rule.fuse(&a)?);
            for (i, &h) in objects.iter().enumerate() {
                let mut p = 1.0;
                let mut o = 0;
                for s in members {
                    p *= s.density(&a[o..o + s.dims()], h)?;
                    o += s.dims();
                }
                probs[i][c] += p;
            }
            for j in (0..idx.len()).rev() {
                idx[j] += 1;
                if idx[j] < axes[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    } else {
        return Err(unsupported(
            "tabulating local decisions needs either one continuous scalar feature or only discrete features",
        ));
    }
    let mut max_err: f64 = 0.0;
    for row in &mut probs {
        let total: f64 = row.iter().sum();
        max_err = max_err.max((total - 1.0).abs());
        row.iter_mut().for_each(|p| *p /= total);
    }
    Ok((probs, max_err))
}

/// Maximal intervals of `[lo, hi]` on which `decide` is constant, as `(start, end, decision)`.
fn decision_segments(decide: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<Vec<(f64, f64, f64)>> {
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut segments = Vec::new();
    let mut start = lo;
    let mut prev_x = lo;
    let mut prev = decide(lo)?;
    for i in 1..=SCAN_POINTS {
        let x = if i == SCAN_POINTS { hi } else { lo + i as f64 * step };
        let c = decide(x)?;
        if c != prev {
            let (mut a, mut b) = (prev_x, x);
            for _ in 0..BISECTIONS {
                let m = 0.5 * (a + b);
                if decide(m)? == prev {
                    a = m;
                } else {
                    b = m;
                }
            }
            segments.push((start, b, prev));
            start = b;
            prev = c;
        }
        prev_x = x;
    }
    segments.push((start, hi, prev));
    Ok(segments)
}

/// `E[(C − H)²]` when `C` is the posterior mean given Gaussian evidence of total information `t`
/// about a `N(mean, sd²)` object, computed from the moments of `C = κ0 + κ1·H + noise`.
fn linear_posterior_risk(mean: f64, sd: f64, t: f64) -> f64 {
    let p = 1.0 / (sd * sd) + t;
    let k0 = mean / (sd * sd * p);
    let k1 = t / p;
    let noise = t / (p * p);
    let bias = k0 + (k1 - 1.0) * mean;
    bias * bias + (k1 - 1.0).powi(2) * sd * sd + noise
}

/// Squared-error Bayes risk of a centralized or `K* = ℝ` two-stage rule for a normal prior on ℝ
/// and affine Gaussian sensors, with `K = ℝ`.
pub fn linear_gaussian_risk(scenario: &Scenario, topology: &FusionTopology) -> Result<f64> {
    topology.validate(scenario.sensors().len())?;
    let (mean, sd) =
        normal_prior(scenario).ok_or_else(|| unsupported("linear-gaussian risk needs a normal prior on ℝ"))?;
    if !scenario.decision().is_real_line() {
        return Err(unsupported("linear-gaussian risk needs K = ℝ"));
    }
    let all: Vec<&SensorModel> = scenario.sensors().iter().collect();
    let gaussian_only = || unsupported("linear-gaussian risk needs affine gaussian sensors with fixed covariance");
    match topology {
        FusionTopology::Centralized => Ok(linear_posterior_risk(mean, sd, information(&all).ok_or_else(gaussian_only)?)),
        FusionTopology::Pbpo { groups, intermediate } => {
            let mut t2 = 0.0;
            for (g, k) in groups.iter().zip(intermediate) {
                if !k.is_real_line() {
                    return Err(unsupported("linear-gaussian risk needs K* = ℝ"));
                }
                let members: Vec<&SensorModel> = g.iter().map(|&m| &scenario.sensors()[m]).collect();
                let t = information(&members).ok_or_else(gaussian_only)?;
                let p = 1.0 / (sd * sd) + t;
                let (slope, s) = (t / p, t.sqrt() / p);
                t2 += (slope / s).powi(2);
            }
            Ok(linear_posterior_risk(mean, sd, t2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CostFunction, Prior};

    fn gauss(m: usize) -> Scenario {
        Scenario::new(
            Prior::standard_normal(),
            vec![SensorModel::gaussian_iid(m / 2, 1.0, 1.0).unwrap(), SensorModel::gaussian_iid(m / 2, 1.0, 1.0).unwrap()],
            DecisionSpace::real_line(),
            CostFunction::squared_error(),
        )
        .unwrap()
    }

    #[test]
    fn gaussian_two_stage_matches_centralized() {
        for &m in &[2usize, 10, 100] {
            let s = gauss(m);
            let topo = FusionTopology::pbpo(vec![vec![0], vec![1]], DecisionSpace::real_line());
            let central = linear_gaussian_risk(&s, &FusionTopology::Centralized).unwrap();
            let split = linear_gaussian_risk(&s, &topo).unwrap();
            assert!((central - 1.0 / (m as f64 + 1.0)).abs() < 1e-12);
            assert!((split - central).abs() < 1e-12);
            let NetworkRule::TwoStage(rule) = build_pbpo(&s, &topo).unwrap() else { panic!() };
            let a: Vec<f64> = (0..m).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
            let want = a.iter().sum::<f64>() / (m as f64 + 1.0);
            assert!((rule.decide(&a).unwrap() - want).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_topologies() {
        let s = gauss(2);
        let k = DecisionSpace::real_line();
        assert!(build_pbpo(&s, &FusionTopology::pbpo(vec![vec![0]], k.clone())).is_err());
        assert!(build_pbpo(&s, &FusionTopology::pbpo(vec![vec![0, 1], vec![1]], k.clone())).is_err());
        assert!(build_pbpo(&s, &FusionTopology::pbpo(vec![vec![0], vec![]], k)).is_err());
        let discrete = FusionTopology::pbpo(vec![vec![0], vec![1]], DecisionSpace::points(vec![0.0, 1.0]).unwrap());
        assert!(matches!(build_pbpo(&s, &discrete), Err(crate::FusionError::Unsupported(_))));
    }

    #[test]
    fn segments_of_a_step_function() {
        let seg = decision_segments(|x| Ok(if x < 0.3 { 0.0 } else if x < 0.7 { 1.0 } else { 0.0 }), 0.0, 1.0).unwrap();
        assert_eq!(seg.len(), 3);
        assert!((seg[0].1 - 0.3).abs() < 1e-12 && (seg[1].1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn poisson_tables_by_enumeration() {
        let object = ObjectSpace::points(vec![1.0, 2.0]).unwrap();
        let s = Scenario::new(
            Prior::discrete_uniform(object).unwrap(),
            vec![SensorModel::poisson(), SensorModel::poisson()],
            DecisionSpace::points(vec![1.0, 2.0]).unwrap(),
            CostFunction::squared_error(),
        )
        .unwrap();
        // one group holding both sensors reproduces the centralized decision law
        let topo = FusionTopology::pbpo(vec![vec![0, 1]], DecisionSpace::points(vec![1.0, 2.0]).unwrap());
        let NetworkRule::TwoStage(rule) = build_pbpo(&s, &topo).unwrap() else { panic!() };
        let DerivedLaw::Table { probs, max_row_error, .. } = &rule.derived_laws()[0] else { panic!() };
        let rates = crate::analytic::poisson_binary_rates();
        assert!((probs[0][1] - rates.false_positive).abs() < 1e-12);
        assert!((probs[1][0] - rates.miss).abs() < 1e-12);
        assert!(*max_row_error < 1e-12);
    }
}
