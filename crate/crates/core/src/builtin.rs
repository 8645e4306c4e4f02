//! Named example scenarios, built programmatically.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::network::FusionTopology;
use crate::scenario::{CostFunction, DecisionSpace, ObjectSpace, Prior, Scenario, SensorModel};

pub const NAMES: [&str; 7] =
    ["gauss", "expo", "fourclass-hard", "fourclass-soft", "fourclass-pbpo", "poisson-binary", "mixture"];

const FOURCLASS_SD_A: [f64; 4] = [1.7, 0.4, 3.0, 1.0];
const FOURCLASS_SD_B: [f64; 4] = [0.5, 2.0, 0.7, 2.0];

/// A named scenario with its topology and the parameters it was built from.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub name: String,
    pub params: BTreeMap<String, String>,
    pub scenario: Scenario,
    pub topology: FusionTopology,
}

/// Parse `key=value` pairs separated by commas.
pub fn parse_params(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| invalid(format!("expected key=value, got {part:?}")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

struct Params {
    given: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Params {
    fn get<T: std::str::FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T> {
        let value = match self.given.remove(key) {
            Some(v) => v.parse().map_err(|_| invalid(format!("cannot parse parameter {key}={v}")))?,
            None => default,
        };
        self.used.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    fn optional(&mut self, key: &str) -> Result<Option<f64>> {
        match self.given.remove(key) {
            Some(v) => {
                let x = v.parse().map_err(|_| invalid(format!("cannot parse parameter {key}={v}")))?;
                self.used.insert(key.to_string(), v);
                Ok(Some(x))
            }
            None => Ok(None),
        }
    }

    fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(k) = self.given.keys().next() {
            return Err(invalid(format!("unknown parameter {k:?}")));
        }
        Ok(self.used)
    }
}

/// Standard normal object; two sensors with `M/2` features each, mean `u·h`, variance `v`.
/// `bound=b` truncates the object space to `[-b, b]`.
pub fn gauss(u: f64, v: f64, m: usize, bound: Option<f64>) -> Result<Scenario> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(invalid(format!("M must be even and at least 2, got {m}")));
    }
    let prior = match bound {
        None => Prior::standard_normal(),
        Some(b) => Prior::normal(ObjectSpace::interval(-b, b)?, 0.0, 1.0)?,
    };
    let half = SensorModel::gaussian_iid(m / 2, u, v)?;
    Scenario::new(prior, vec![half.clone(), half], DecisionSpace::real_line(), CostFunction::squared_error())
}

/// Unit-rate exponential object; `M` sensors exponential with rate `h`.
pub fn expo(m: usize) -> Result<Scenario> {
    if m == 0 {
        return Err(invalid("M must be at least 1"));
    }
    Scenario::new(
        Prior::exponential(ObjectSpace::interval(0.0, f64::INFINITY)?, 1.0)?,
        vec![SensorModel::exponential(); m],
        DecisionSpace::interval(0.0, f64::INFINITY)?,
        CostFunction::squared_error(),
    )
}

/// Four equally likely classes `{0,1,2,3}` seen by two Gaussian sensors with class-dependent spread.
pub fn fourclass(decision: DecisionSpace) -> Result<Scenario> {
    let points = vec![0.0, 1.0, 2.0, 3.0];
    Scenario::new(
        Prior::discrete_uniform(ObjectSpace::points(points.clone())?)?,
        vec![
            SensorModel::gaussian_table(points.clone(), points.clone(), FOURCLASS_SD_A.to_vec())?,
            SensorModel::gaussian_table(points.clone(), points, FOURCLASS_SD_B.to_vec())?,
        ],
        decision,
        CostFunction::squared_error(),
    )
}

pub fn fourclass_points() -> DecisionSpace {
    DecisionSpace::points(vec![0.0, 1.0, 2.0, 3.0]).expect("sorted")
}

/// Two equally likely objects `{1, 2}`; two Poisson sensors with rate `h`.
pub fn poisson_binary() -> Result<Scenario> {
    Scenario::new(
        Prior::discrete_uniform(ObjectSpace::points(vec![1.0, 2.0])?)?,
        vec![SensorModel::poisson(), SensorModel::poisson()],
        DecisionSpace::points(vec![1.0, 2.0])?,
        CostFunction::squared_error(),
    )
}

/// Normal object restricted to `[0, 4]`; an exponential-uniform and a Gaussian mixture sensor.
pub fn mixture() -> Result<Scenario> {
    Scenario::new(
        Prior::normal(ObjectSpace::interval(0.0, 4.0)?, 0.0, 1.0)?,
        vec![SensorModel::exponential_uniform_mixture(), SensorModel::narrow_wide_gaussian_mixture()],
        DecisionSpace::interval(0.0, 4.0)?,
        CostFunction::squared_error(),
    )
}

/// Build a named scenario. Parameters:
///
/// * `gauss`: `u` (1), `v` (1), `M` (2), optional `bound`
/// * `expo`: `M` (1)
/// * `fourclass-pbpo`: `kstar` (`points` or `real`), `K` (`points` or `interval`)
pub fn builtin(name: &str, params: &str) -> Result<Builtin> {
    let mut p = Params { given: parse_params(params)?, used: BTreeMap::new() };
    let mut topology = FusionTopology::Centralized;
    let scenario = match name {
        "gauss" => {
            let u = p.get("u", 1.0)?;
            let v = p.get("v", 1.0)?;
            let m = p.get("M", 2usize)?;
            let bound = p.optional("bound")?;
            gauss(u, v, m, bound)?
        }
        "expo" => expo(p.get("M", 1usize)?)?,
        "fourclass-hard" => fourclass(fourclass_points())?,
        "fourclass-soft" => fourclass(DecisionSpace::interval(0.0, 3.0)?)?,
        "fourclass-pbpo" => {
            let kstar = match p.get("kstar", "points".to_string())?.as_str() {
                "points" => fourclass_points(),
                "real" => DecisionSpace::real_line(),
                other => return Err(invalid(format!("kstar must be points or real, got {other}"))),
            };
            let k = match p.get("K", "points".to_string())?.as_str() {
                "points" => fourclass_points(),
                "interval" => DecisionSpace::interval(0.0, 3.0)?,
                other => return Err(invalid(format!("K must be points or interval, got {other}"))),
            };
            topology = FusionTopology::pbpo(vec![vec![0], vec![1]], kstar);
            fourclass(k)?
        }
        "poisson-binary" => poisson_binary()?,
        "mixture" => mixture()?,
        other => return Err(invalid(format!("unknown scenario {other:?}; expected one of {}", NAMES.join(", ")))),
    };
    Ok(Builtin { name: name.to_string(), params: p.finish()?, scenario, topology })
}
