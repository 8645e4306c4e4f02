use anyhow::Result;
use bayes_fusion::analytic::{
    expo_performance, expo_risk, gauss_performance, gauss_risk, pbpo_gauss, poisson_binary_rates, ExpoParams,
    GaussParams,
};
use bayes_fusion::builtin::builtin;
use bayes_fusion::montecarlo::{Axis, GridSpec};
use serde_json::{json, Value};

use crate::output::grid_csv;
use crate::UsageError;

pub const ANALYTIC_CSV: &str = "analytic.csv";

/// Closed-form rule coefficients and risk for a built-in scenario, plus its performance grid as CSV.
pub struct ClosedForm {
    pub report: Value,
    pub grid_csv: Vec<u8>,
}

pub fn run_analytic(name: &str, params: &str, decision_bins: usize, object_bins: usize) -> Result<ClosedForm> {
    let b = builtin(name, params).map_err(|e| UsageError(e.to_string()))?;
    let num = |key: &str| b.params[key].parse::<f64>().map_err(|e| UsageError(format!("{key}: {e}")));
    let spec = || GridSpec::for_scenario(&b.scenario, decision_bins, object_bins);
    let (report, grid) = match name {
        "gauss" if !b.params.contains_key("bound") => {
            let p = GaussParams::new(num("u")?, num("v")?, num("M")? as usize)?;
            let spec = spec()?;
            let grid = grid_csv(&spec.decision, &spec.object, |r, k| {
                gauss_performance(&p, spec.decision.center(k), spec.object.center(r))
            })?;
            let pbpo = pbpo_gauss(&p).ok().map(|g| {
                json!({ "group_gain": g.group_gain, "system_gain": g.system_gain, "risk": g.risk })
            });
            let gain = p.u / (p.m as f64 * p.u * p.u + p.v);
            (json!({ "rule": { "form": "gain * sum(a)", "gain": gain }, "risk": gauss_risk(&p), "pbpo": pbpo }), grid)
        }
        "expo" => {
            let p = ExpoParams::new(num("M")? as usize)?;
            let spec = spec()?;
            let mut cells = vec![vec![0.0; spec.decision.len()]; spec.object.len()];
            for (r, row) in cells.iter_mut().enumerate() {
                for (k, cell) in row.iter_mut().enumerate() {
                    *cell = expo_performance(&p, spec.decision.center(k), spec.object.center(r))?;
                }
            }
            let grid = grid_csv(&spec.decision, &spec.object, |r, k| cells[r][k])?;
            let rule = json!({ "form": "numerator / (sum(a) + 1)", "numerator": p.m as f64 + 1.0 });
            (json!({ "rule": rule, "risk": expo_risk(&p) }), grid)
        }
        "poisson-binary" => {
            let rates = poisson_binary_rates();
            let axis = Axis::Points { points: vec![1.0, 2.0] };
            let table = [[rates.correct_low, rates.false_positive], [rates.miss, 1.0 - rates.miss]];
            let grid = grid_csv(&axis, &axis, |r, k| table[r][k])?;
            let report = json!({
                "rule": { "form": "2 if a + b > 2 else 1" },
                "false_positive": rates.false_positive,
                "miss": rates.miss,
                "risk": 0.5 * (rates.false_positive + rates.miss),
            });
            (report, grid)
        }
        other => return Err(UsageError(format!("no closed form for {other}")).into()),
    };
    let params = b.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",");
    let mut report = report;
    report["scenario"] = json!(name);
    report["params"] = json!(params);
    Ok(ClosedForm { report, grid_csv: grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::read_grid_csv;

    #[test]
    fn gauss_report() {
        let f = run_analytic("gauss", "M=2", 20, 8).unwrap();
        assert_eq!(f.report["risk"], json!(1.0 / 3.0));
        assert!((f.report["pbpo"]["risk"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let t = read_grid_csv(&f.grid_csv).unwrap();
        assert_eq!((t.decision.len(), t.object.len(), t.rows[0].len()), (20, 8, 20));
    }

    #[test]
    fn poisson_table_rows_sum_to_one() {
        let f = run_analytic("poisson-binary", "", 1, 1).unwrap();
        for row in read_grid_csv(&f.grid_csv).unwrap().rows {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn numerical_scenarios_have_no_closed_form() {
        assert!(run_analytic("mixture", "", 10, 10).is_err());
        assert!(run_analytic("gauss", "bound=2", 10, 10).is_err());
    }
}
