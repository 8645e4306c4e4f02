use std::fs;

use anyhow::{bail, Context, Result};
use bayes_fusion::builtin::builtin;
use bayes_fusion::network::FusionTopology;
use bayes_fusion::scenario::file::{parse_scenario, TopologySpec};
use bayes_fusion::scenario::{CostFunction, Scenario};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::UsageError;

const BUILTIN_PREFIX: &str = "builtin:";

/// A scenario resolved from a file or a built-in name, with the topology that applies to it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub topology: FusionTopology,
    /// sha256 of the scenario file, or of the builtin name and parameters.
    pub fingerprint: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn builtin_name(source: &str) -> Option<&str> {
    source.strip_prefix(BUILTIN_PREFIX)
}

/// `source` is a path or `builtin:<name>`; `topology` overrides any topology the source carries.
pub fn load(source: &str, params: &str, topology: Option<&str>) -> Result<Loaded> {
    let (scenario, own, fingerprint) = match builtin_name(source) {
        Some(name) => {
            let b = builtin(name, params).map_err(|e| UsageError(e.to_string()))?;
            let canonical: Vec<String> = b.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let fp = sha256_hex(format!("{name}?{}", canonical.join(",")).as_bytes());
            (b.scenario, b.topology, fp)
        }
        None => {
            if !params.is_empty() {
                bail!(UsageError("--params only applies to builtin scenarios".into()));
            }
            let text = fs::read_to_string(source).with_context(|| format!("reading scenario file {source}"))?;
            let (scenario, spec) = parse_scenario(&text).map_err(|e| UsageError(format!("{source}: {e}")))?;
            let topology = match spec {
                Some(spec) => FusionTopology::from_spec(&spec)?,
                None => FusionTopology::Centralized,
            };
            (scenario, topology, sha256_hex(text.as_bytes()))
        }
    };
    let topology = match topology {
        Some(text) => parse_topology(text)?,
        None => own,
    };
    Ok(Loaded { scenario, topology, fingerprint })
}

/// `centralized`, or a TOML inline table with the fields of a scenario file's `[topology]` section.
pub fn parse_topology(text: &str) -> Result<FusionTopology> {
    #[derive(Deserialize)]
    struct Wrap {
        t: TopologySpec,
    }
    let text = text.trim();
    if text == "centralized" {
        return Ok(FusionTopology::Centralized);
    }
    let wrap: Wrap = toml::from_str(&format!("t = {text}")).map_err(|e| UsageError(format!("--topology: {e}")))?;
    Ok(FusionTopology::from_spec(&wrap.t)?)
}

/// `squared` (x²), `quadratic` (x²/2), `power:P` (x^P/P) or `poly:c0,c1,...` (Σ c_k x^(2k)).
pub fn parse_cost(text: &str) -> Result<CostFunction> {
    let usage = |msg: String| anyhow::Error::new(UsageError(msg));
    let text = text.trim();
    let cost = match text.split_once(':') {
        None if text == "squared" => CostFunction::squared_error(),
        None if text == "quadratic" => CostFunction::Quadratic,
        Some(("power", p)) => {
            let p = p.trim().parse().map_err(|_| usage(format!("bad exponent in --cost {text}")))?;
            CostFunction::even_power(p).map_err(|e| usage(e.to_string()))?
        }
        Some(("poly", cs)) => {
            let coeffs = cs
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| usage(format!("bad coefficient in --cost {text}")))?;
            CostFunction::polynomial(coeffs).map_err(|e| usage(e.to_string()))?
        }
        _ => return Err(usage(format!("unknown cost {text:?}; use squared, quadratic, power:P or poly:c0,c1,..."))),
    };
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_forms() {
        assert_eq!(parse_topology("centralized").unwrap(), FusionTopology::Centralized);
        let t = parse_topology(r#"{ kind = "pbpo", groups = [[0], [1]], intermediate = { kind = "real" } }"#).unwrap();
        assert!(matches!(t, FusionTopology::Pbpo { ref groups, .. } if groups.len() == 2));
        assert!(parse_topology("{ kind = \"tree\" }").is_err());
    }

    #[test]
    fn cost_forms() {
        assert_eq!(parse_cost("squared").unwrap().eval(3.0), 9.0);
        assert_eq!(parse_cost("quadratic").unwrap().eval(2.0), 2.0);
        assert_eq!(parse_cost("power:4").unwrap().eval(2.0), 4.0);
        assert_eq!(parse_cost("poly:1,2").unwrap().eval(1.0), 3.0);
        assert!(parse_cost("power:3").is_err());
        assert!(parse_cost("cubic").is_err());
    }

    #[test]
    fn builtin_fingerprint_ignores_parameter_order() {
        let a = load("builtin:gauss", "u=1,M=4", None).unwrap();
        let b = load("builtin:gauss", "M=4, u=1", None).unwrap();
        assert_eq!(a.fingerprint, b.fingerprint);
        assert!(load("builtin:gauss", "M=3", None).is_err());
    }
}
