use std::f64::consts::PI;

use bayes_fusion::analytic::{expo_risk, gauss_performance, gauss_risk, ExpoParams, GaussParams};
use bayes_fusion::builtin::{builtin, expo, gauss};
use bayes_fusion::fusion::FusionRule;
use bayes_fusion::montecarlo::*;
use bayes_fusion::scenario::{CostFunction, ProposalMode};

fn plan(samples: usize, seed: u64) -> SamplePlan {
    SamplePlan::new(samples, ProposalMode::Prior, seed).unwrap()
}

#[test]
fn gaussian_risk_within_ci() {
    let s = gauss(1.0, 1.0, 2, None).unwrap();
    let rule = FusionRule::new(&s);
    let out = run_plan(&rule, &s, &plan(1_000_000, 11), &Request::risk(CostFunction::squared_error())).unwrap();
    let est = out.risks[0].estimate(0.95, RiskMethod::CltEmpirical).unwrap();
    let truth = gauss_risk(&GaussParams::new(1.0, 1.0, 2).unwrap());
    assert!(est.contains(truth), "{est:?}");
    let bound = out.risks[0].estimate(0.95, RiskMethod::Theorem4Bound).unwrap();
    assert!(bound.half_width >= est.half_width);
}

#[test]
fn exponential_risk_and_decision_range() {
    for m in [1usize, 2] {
        let s = expo(m).unwrap();
        let rule = FusionRule::new(&s);
        let grid = GridSpec::for_scenario(&s, 200, 64).unwrap();
        let req = Request { grid: Some(grid), costs: vec![CostFunction::squared_error()], weights: WeightScheme::Importance };
        let out = run_plan(&rule, &s, &plan(1_000_000, 12), &req).unwrap();
        let est = out.risks[0].estimate(0.95, RiskMethod::CltEmpirical).unwrap();
        assert!(est.contains(expo_risk(&ExpoParams::new(m).unwrap())), "M={m} {est:?}");
        assert!(out.max_decision <= m as f64 + 1.0);
        let g = out.grid().unwrap();
        for r in 0..g.rows() {
            assert_eq!(g.mass_above(r, m as f64 + 1.0), 0.0);
        }
    }
}

#[test]
fn gaussian_grid_value_at_origin() {
    let s = gauss(1.0, 1.0, 2, None).unwrap();
    let rule = FusionRule::new(&s);
    let spec = GridSpec { decision: Axis::bins(-3.0, 3.0, 201).unwrap(), object: Axis::bins(-2.0, 2.0, 65).unwrap() };
    let batch = draw_batch(&s, 1_000_000, ProposalMode::Prior, 13).unwrap();
    let g = estimate_performance(&rule, &batch, spec.clone()).unwrap();
    let (r, k) = (spec.object.locate(0.0).unwrap(), spec.decision.locate(0.0).unwrap());
    assert_eq!((spec.object.center(r), spec.decision.center(k)), (0.0, 0.0));
    let want = 3.0 / (2.0 * PI.sqrt());
    assert!((want - gauss_performance(&GaussParams::new(1.0, 1.0, 2).unwrap(), 0.0, 0.0)).abs() < 1e-15);
    let got = g.row(r)[k];
    assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
    assert!(g.report.max_deviation < 1e-9);
}

#[test]
fn grid_risk_matches_closed_form_and_direct_estimate() {
    let s = gauss(1.0, 1.0, 2, None).unwrap();
    let rule = FusionRule::new(&s);
    let grid = GridSpec::for_scenario(&s, 200, 64).unwrap();
    let req = Request { grid: Some(grid), costs: vec![CostFunction::squared_error()], weights: WeightScheme::Importance };
    let out = run_plan(&rule, &s, &plan(1_000_000, 14), &req).unwrap();
    let from_grid = risk_from_grid(&out.grid().unwrap(), s.prior(), &CostFunction::squared_error());
    assert!((from_grid.value - 1.0 / 3.0).abs() < 0.03 / 3.0, "{from_grid:?}");
    assert!(from_grid.covered_mass > 0.99);
    let direct = out.risks[0].estimate(0.95, RiskMethod::CltEmpirical).unwrap();
    assert!((from_grid.value - direct.estimate).abs() < 0.01 + direct.half_width);
}

#[test]
fn fourclass_soft_grid_risk() {
    let b = builtin("fourclass-soft", "").unwrap();
    let rule = FusionRule::new(&b.scenario);
    let grid = GridSpec::for_scenario(&b.scenario, 200, 64).unwrap();
    let out = run_plan(&rule, &b.scenario, &plan(1_000_000, 15), &Request::performance(grid)).unwrap();
    let r = risk_from_grid(&out.grid().unwrap(), b.scenario.prior(), &CostFunction::squared_error());
    assert!((r.value - 0.35536).abs() < 0.005, "{r:?}");
}

#[test]
fn zero_cost_has_zero_width() {
    let s = gauss(1.0, 1.0, 2, None).unwrap();
    let batch = draw_batch(&s, 5000, ProposalMode::Prior, 1).unwrap();
    let est = estimate_risk(&FusionRule::new(&s), &batch, &CostFunction::zero(), 0.95, RiskMethod::CltEmpirical).unwrap();
    assert_eq!((est.estimate, est.half_width), (0.0, 0.0));
}

#[test]
fn half_width_scales_with_inverse_root_l() {
    let s = gauss(1.0, 1.0, 2, None).unwrap();
    let rule = FusionRule::new(&s);
    let width = |l: usize| {
        let out = run_plan(&rule, &s, &plan(l, 16), &Request::risk(CostFunction::squared_error())).unwrap();
        out.risks[0].estimate(0.95, RiskMethod::CltEmpirical).unwrap().half_width
    };
    for l in [20_000usize, 80_000] {
        let ratio = width(l) / width(2 * l);
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.15, "L={l} ratio={ratio}");
    }
}

#[test]
fn split_passes_merge_exactly() {
    let b = builtin("fourclass-hard", "").unwrap();
    let rule = FusionRule::new(&b.scenario);
    let grid = GridSpec::for_scenario(&b.scenario, 200, 64).unwrap();
    let req = Request { grid: Some(grid), costs: vec![CostFunction::squared_error()], weights: WeightScheme::Importance };
    let p = plan(10_000, 17);
    let whole = run_plan(&rule, &b.scenario, &p, &req).unwrap();
    let first = run_batch(&rule, &p.draw_chunks(&b.scenario, 0..4).unwrap(), &req).unwrap();
    let mut second = run_batch(&rule, &p.draw_chunks(&b.scenario, 4..p.chunk_count()).unwrap(), &req).unwrap();
    second.merge(&first).unwrap();
    assert_eq!(second.histogram, whole.histogram);
    assert_eq!(second.samples, whole.samples);
}

#[test]
fn uniform_proposal_reweights_to_the_prior() {
    let s = gauss(1.0, 1.0, 2, Some(4.0)).unwrap();
    let rule = FusionRule::new(&s);
    let p = SamplePlan::new(400_000, ProposalMode::Uniform, 18).unwrap();
    let out = run_plan(&rule, &s, &p, &Request::risk(CostFunction::squared_error())).unwrap();
    let est = out.risks[0].estimate(0.95, RiskMethod::CltEmpirical).unwrap();
    // truncation at ±4 moves the risk by less than 1e-3
    assert!((est.estimate - 1.0 / 3.0).abs() < est.half_width + 1e-3, "{est:?}");
}

#[test]
fn literal_weights_still_normalize() {
    let b = builtin("poisson-binary", "").unwrap();
    let rule = FusionRule::new(&b.scenario);
    let grid = GridSpec::for_scenario(&b.scenario, 200, 64).unwrap();
    let req = Request { grid: Some(grid), costs: vec![], weights: WeightScheme::Literal(&b.scenario) };
    let g = run_plan(&rule, &b.scenario, &plan(20_000, 19), &req).unwrap().grid().unwrap();
    assert!(g.report.max_deviation < 1e-9);
    assert!(g.report.empty_rows.is_empty());
}
