//! TOML scenario documents.
//!
//! Field names are listed in the README. Numbers may be TOML floats or
//! integers, and the strings `"inf"` / `"-inf"` are accepted wherever a
//! number is expected.

use serde::{Deserialize, Serialize};

use super::{
    CholFactor, CostFunction, CovLaw, DecisionSpace, Domain, Family, FeatureSpace, MeanLaw, ObjectSpace, Prior,
    Scenario, SensorModel,
};
use crate::error::{invalid, FusionError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn value(&self) -> Result<f64> {
        match self {
            Num::Float(x) => Ok(*x),
            Num::Int(i) => Ok(*i as f64),
            Num::Text(s) => match s.trim() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                t => t.parse().map_err(|_| FusionError::Parse(format!("not a number: {t:?}"))),
            },
        }
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        if x.is_infinite() {
            Num::Text(if x > 0.0 { "inf".into() } else { "-inf".into() })
        } else {
            Num::Float(x)
        }
    }
}

fn values(xs: &[Num]) -> Result<Vec<f64>> {
    xs.iter().map(Num::value).collect()
}

fn matrix(rows: &[Vec<Num>]) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| values(r)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectSpec {
    Interval { lo: Num, hi: Num },
    Points { points: Vec<Num> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Weights over the object points; omitted means equal weights.
    Discrete { weights: Option<Vec<Num>> },
    Normal { mean: Option<Num>, sd: Option<Num> },
    Exponential { rate: Num },
    Tabulated { points: Vec<Num>, density: Vec<Num> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovScaling {
    Fixed,
    InverseObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SensorSpec {
    /// Mean `offset + slope·h` (or `mean_table`, one row per object point).
    /// Covariance from exactly one of `factor` (lower triangular),
    /// `covariance` (full matrix), `sd` (per-dimension) or `sd_table`.
    Gaussian {
        offset: Option<Vec<Num>>,
        slope: Option<Vec<Num>>,
        mean_table: Option<Vec<Vec<Num>>>,
        factor: Option<Vec<Vec<Num>>>,
        covariance: Option<Vec<Vec<Num>>>,
        sd: Option<Vec<Num>>,
        sd_table: Option<Vec<Vec<Num>>>,
        scaling: Option<CovScaling>,
    },
    Exponential,
    Poisson,
    UniformToObject,
    ExponentialUniformMixture,
    GaussianMixture,
    Categorical { outcomes: Vec<Num>, probs: Vec<Vec<Num>> },
    Mixture { weights: Vec<Num>, components: Vec<SensorSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecisionSpec {
    Real,
    Interval { lo: Num, hi: Num },
    Points { points: Vec<Num> },
    Union { intervals: Vec<(Num, Num)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CostSpec {
    Quadratic,
    EvenPower { p: u32 },
    Polynomial { coeffs: Vec<Num> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    Centralized,
    /// Zero-based sensor indices per group; `intermediate` is the stage-1 decision space.
    Pbpo { groups: Vec<Vec<usize>>, intermediate: DecisionSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub object: ObjectSpec,
    pub prior: PriorSpec,
    pub sensors: Vec<SensorSpec>,
    pub decision: DecisionSpec,
    pub cost: Option<CostSpec>,
    pub topology: Option<TopologySpec>,
}

impl ObjectSpec {
    pub fn build(&self) -> Result<ObjectSpace> {
        match self {
            ObjectSpec::Interval { lo, hi } => ObjectSpace::interval(lo.value()?, hi.value()?),
            ObjectSpec::Points { points } => ObjectSpace::points(values(points)?),
        }
    }
}

impl PriorSpec {
    pub fn build(&self, over: ObjectSpace) -> Result<Prior> {
        match self {
            PriorSpec::Discrete { weights: None } => Prior::discrete_uniform(over),
            PriorSpec::Discrete { weights: Some(w) } => Prior::discrete(over, values(w)?),
            PriorSpec::Normal { mean, sd } => {
                let mean = mean.as_ref().map_or(Ok(0.0), Num::value)?;
                let sd = sd.as_ref().map_or(Ok(1.0), Num::value)?;
                Prior::normal(over, mean, sd)
            }
            PriorSpec::Exponential { rate } => Prior::exponential(over, rate.value()?),
            PriorSpec::Tabulated { points, density } => Prior::tabulated(over, values(points)?, values(density)?),
        }
    }
}

impl SensorSpec {
    fn family(&self, object: &ObjectSpace) -> Result<(Domain, usize, Family)> {
        let table_points = || match object {
            ObjectSpace::Points(p) => Ok(p.clone()),
            ObjectSpace::Interval { .. } => Err(invalid("tabulated sensor laws need a discrete object space")),
        };
        Ok(match self {
            SensorSpec::Gaussian { offset, slope, mean_table, factor, covariance, sd, sd_table, scaling } => {
                let mean = match (offset, slope, mean_table) {
                    (_, Some(slope), None) => {
                        let slope = values(slope)?;
                        let offset = match offset {
                            Some(o) => values(o)?,
                            None => vec![0.0; slope.len()],
                        };
                        MeanLaw::Affine { offset, slope }
                    }
                    (None, None, Some(t)) => MeanLaw::Table { points: table_points()?, values: matrix(t)? },
                    _ => return Err(invalid("gaussian sensor needs either slope (with optional offset) or mean_table")),
                };
                let given = [factor.is_some(), covariance.is_some(), sd.is_some(), sd_table.is_some()];
                if given.iter().filter(|g| **g).count() != 1 {
                    return Err(invalid("gaussian sensor needs exactly one of factor, covariance, sd, sd_table"));
                }
                let cov = if let Some(t) = sd_table {
                    let factors = matrix(t)?.iter().map(|row| CholFactor::diagonal(row)).collect::<Result<_>>()?;
                    CovLaw::Table { points: table_points()?, factors }
                } else {
                    let f = if let Some(f) = factor {
                        CholFactor::from_lower(&matrix(f)?)?
                    } else if let Some(c) = covariance {
                        CholFactor::from_covariance(&matrix(c)?)?
                    } else {
                        CholFactor::diagonal(&values(sd.as_ref().expect("one given"))?)?
                    };
                    match scaling {
                        None | Some(CovScaling::Fixed) => CovLaw::Fixed(f),
                        Some(CovScaling::InverseObject) => CovLaw::InverseObject(f),
                    }
                };
                let dims = match &mean {
                    MeanLaw::Affine { slope, .. } => slope.len(),
                    MeanLaw::Table { values, .. } => values.first().map_or(0, Vec::len),
                };
                (Domain::Real, dims, Family::Gaussian { mean, cov })
            }
            SensorSpec::Exponential => (Domain::NonNegative, 1, Family::Exponential),
            SensorSpec::UniformToObject => (Domain::NonNegative, 1, Family::UniformToObject),
            SensorSpec::Poisson => (Domain::NonNegativeIntegers, 1, Family::Poisson),
            SensorSpec::ExponentialUniformMixture => {
                let s = SensorModel::exponential_uniform_mixture();
                (Domain::NonNegative, 1, s.family().clone())
            }
            SensorSpec::GaussianMixture => {
                let s = SensorModel::narrow_wide_gaussian_mixture();
                (Domain::Real, 1, s.family().clone())
            }
            SensorSpec::Categorical { outcomes, probs } => {
                let outcomes = values(outcomes)?;
                (
                    Domain::Finite(outcomes.clone()),
                    1,
                    Family::Categorical { objects: table_points()?, outcomes, probs: matrix(probs)? },
                )
            }
            SensorSpec::Mixture { weights, components } => {
                let parts = components.iter().map(|c| c.family(object)).collect::<Result<Vec<_>>>()?;
                let (domain, dims) = match parts.first() {
                    Some((d, n, _)) => (d.clone(), *n),
                    None => return Err(invalid("mixture needs components")),
                };
                if parts.iter().any(|(d, n, _)| *d != domain || *n != dims) {
                    return Err(invalid("mixture components must share a feature space"));
                }
                let components = parts.into_iter().map(|(_, _, f)| f).collect();
                (domain, dims, Family::Mixture { weights: values(weights)?, components })
            }
        })
    }

    pub fn build(&self, object: &ObjectSpace) -> Result<SensorModel> {
        let (domain, dims, family) = self.family(object)?;
        SensorModel::new(FeatureSpace::uniform(domain, dims)?, family)
    }
}

impl DecisionSpec {
    pub fn build(&self) -> Result<DecisionSpace> {
        match self {
            DecisionSpec::Real => Ok(DecisionSpace::real_line()),
            DecisionSpec::Interval { lo, hi } => DecisionSpace::interval(lo.value()?, hi.value()?),
            DecisionSpec::Points { points } => DecisionSpace::points(values(points)?),
            DecisionSpec::Union { intervals } => DecisionSpace::union(
                intervals.iter().map(|(a, b)| Ok((a.value()?, b.value()?))).collect::<Result<_>>()?,
            ),
        }
    }

    pub fn from_space(space: &DecisionSpace) -> Self {
        match space {
            DecisionSpace::Interval { lo, hi } if lo.is_infinite() && hi.is_infinite() => DecisionSpec::Real,
            DecisionSpace::Interval { lo, hi } => DecisionSpec::Interval { lo: (*lo).into(), hi: (*hi).into() },
            DecisionSpace::Points(p) => DecisionSpec::Points { points: p.iter().map(|x| (*x).into()).collect() },
            DecisionSpace::Union(parts) => {
                DecisionSpec::Union { intervals: parts.iter().map(|(a, b)| ((*a).into(), (*b).into())).collect() }
            }
        }
    }
}

impl CostSpec {
    pub fn build(&self) -> Result<CostFunction> {
        match self {
            CostSpec::Quadratic => Ok(CostFunction::Quadratic),
            CostSpec::EvenPower { p } => CostFunction::even_power(*p),
            CostSpec::Polynomial { coeffs } => CostFunction::polynomial(values(coeffs)?),
        }
    }
}

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FusionError::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<Scenario> {
        let object = self.object.build()?;
        let prior = self.prior.build(object.clone())?;
        let sensors = self.sensors.iter().map(|s| s.build(&object)).collect::<Result<Vec<_>>>()?;
        let cost = self.cost.as_ref().map_or(Ok(CostFunction::Quadratic), CostSpec::build)?;
        Scenario::new(prior, sensors, self.decision.build()?, cost)
    }
}

/// Parse a scenario document and build the scenario plus its optional topology section.
pub fn parse_scenario(text: &str) -> Result<(Scenario, Option<TopologySpec>)> {
    let doc = ScenarioDoc::parse(text)?;
    Ok((doc.build()?, doc.topology))
}
