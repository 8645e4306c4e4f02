use bayes_fusion::builtin::builtin;
use bayes_fusion::fusion::DecisionRule;
use bayes_fusion::montecarlo::{run_plan, Request, RiskMethod, SamplePlan};
use bayes_fusion::network::{build_pbpo, DerivedLaw, NetworkRule};
use bayes_fusion::scenario::{CostFunction, ProposalMode};

/// Exact squared-error risk of the two-stage four-class rule from its local decision tables.
fn exact_table_risk(rule: &bayes_fusion::network::ComposedRule) -> f64 {
    let tables: Vec<&Vec<Vec<f64>>> = rule
        .derived_laws()
        .iter()
        .map(|l| match l {
            DerivedLaw::Table { probs, .. } => probs,
            other => panic!("expected a table, got {other:?}"),
        })
        .collect();
    let mut risk = 0.0;
    for h in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                let p = 0.25 * tables[0][h][i] * tables[1][h][j];
                if p == 0.0 {
                    continue;
                }
                let c = rule.system().fuse(&[i as f64, j as f64]).unwrap();
                risk += p * (c - h as f64).powi(2);
            }
        }
    }
    risk
}

#[test]
fn fourclass_pbpo_tables_reproduce_reported_risk() {
    let b = builtin("fourclass-pbpo", "").unwrap();
    let NetworkRule::TwoStage(rule) = build_pbpo(&b.scenario, &b.topology).unwrap() else { panic!() };
    for law in rule.derived_laws() {
        let DerivedLaw::Table { probs, max_row_error, .. } = law else { panic!() };
        assert!(*max_row_error < 1e-9);
        assert!(probs.iter().all(|row| (row.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }
    assert!((exact_table_risk(&rule) - 0.57862).abs() < 0.005);
}

#[test]
fn discrete_intermediate_loses_information() {
    let plan = SamplePlan::new(200_000, ProposalMode::Prior, 3).unwrap();
    let req = Request::risk(CostFunction::squared_error());
    let est = |name: &str| {
        let b = builtin(name, "").unwrap();
        let rule = build_pbpo(&b.scenario, &b.topology).unwrap();
        run_plan(&rule, &b.scenario, &plan, &req).unwrap().risks[0].estimate(0.95, RiskMethod::CltEmpirical).unwrap()
    };
    let central = est("fourclass-hard");
    let split = est("fourclass-pbpo");
    assert!(central.ci_high < split.ci_low, "{central:?} {split:?}");
}

#[test]
fn real_intermediate_passes_features_through() {
    let soft = builtin("fourclass-soft", "").unwrap();
    let pass = builtin("fourclass-pbpo", "kstar=real,K=interval").unwrap();
    let central = bayes_fusion::fusion::FusionRule::new(&soft.scenario);
    let rule = build_pbpo(&pass.scenario, &pass.topology).unwrap();
    assert!(matches!(rule, NetworkRule::TwoStage(_)));
    for i in 0..200 {
        let a = [(i as f64 * 0.37).sin() * 4.0, (i as f64 * 0.91).cos() * 4.0];
        assert_eq!(rule.decide(&a).unwrap(), central.decide(&a).unwrap());
    }
}
