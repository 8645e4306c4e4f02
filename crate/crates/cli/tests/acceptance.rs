//! The eleven acceptance criteria, each run at its stated tolerance.
//! Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

use std::fs;
use std::time::{Duration, Instant};

use bayes_fusion::analytic::{gauss_fusion, gauss_risk, pbpo_gauss, poisson_binary_rates, GaussParams};
use bayes_fusion::builtin::{builtin, gauss};
use bayes_fusion::fusion::{DecisionRule, FusionRule};
use bayes_fusion::montecarlo::{
    draw_batch, estimate_risk, run_plan, GridSpec, Request, RiskMethod, SamplePlan, WeightScheme,
    DEFAULT_DECISION_BINS, DEFAULT_OBJECT_BINS,
};
use bayes_fusion::network::{build_pbpo, FusionTopology};
use bayes_fusion::scenario::{CostFunction, DecisionSpace, ProposalMode, Scenario};
use bayes_fusion::Result as FusionResult;
use bayes_fusion_cli::manifest::{run_report, RunKind, RunManifest};
use bayes_fusion_cli::validate::{run_validate, ValidationReport};

const L: usize = 1_000_000;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn check(report: &ValidationReport, name: &str) -> bool {
    report.checks.iter().find(|c| c.name == name).map(|c| c.passed).unwrap_or(false)
}

fn estimate_of(report: &ValidationReport, name: &str) -> f64 {
    report.checks.iter().find(|c| c.name == name).and_then(|c| c.estimate).unwrap_or(f64::NAN)
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool").install(f)
}

fn gaussian_closed_form(report: &ValidationReport, elapsed: Duration) -> Verdict {
    let exact = gauss_risk(&GaussParams::new(1.0, 1.0, 2).unwrap()) == 1.0 / 3.0;
    let c = report.checks.iter().find(|c| c.name == "risk").unwrap();
    verdict(
        c.passed && exact && elapsed < Duration::from_secs(30),
        format!(
            "estimate {:.6} in [{:.6}, {:.6}], oracle exactly 1/3: {exact}, {:.1} s single-threaded",
            c.estimate.unwrap(),
            c.ci_low.unwrap(),
            c.ci_high.unwrap(),
            elapsed.as_secs_f64()
        ),
    )
}

fn gaussian_density(report: &ValidationReport) -> Verdict {
    verdict(
        check(report, "performance mean abs error") && check(report, "peak offset (bins)"),
        format!(
            "mean abs error {:.4} (< 0.02), peak offset {:.3} bins (< 1)",
            estimate_of(report, "performance mean abs error"),
            estimate_of(report, "peak offset (bins)")
        ),
    )
}

fn exponential() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in 1..=3 {
        let r = run_validate("expo", &format!("M={m}"), L, 30 + m as u64, 0.95).unwrap();
        ok &= r.passed;
        parts.push(format!(
            "M={m}: risk {:.5} vs {:.5}, mass above M+1 {}, rule gap {:.1e}",
            estimate_of(&r, "risk"),
            2.0 / (m as f64 + 2.0),
            estimate_of(&r, "mass above M+1"),
            estimate_of(&r, "fusion rule vs closed form")
        ));
    }
    verdict(ok, parts.join("; "))
}

fn fourclass() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, seed) in [("fourclass-hard", 41), ("fourclass-soft", 42), ("fourclass-pbpo", 43)] {
        let r = run_validate(name, "", L, seed, 0.95).unwrap();
        let c = &r.checks[0];
        ok &= r.passed;
        parts.push(format!("{name} {:.5} vs {:.5}", c.estimate.unwrap(), c.oracle.unwrap()));
    }
    verdict(ok, format!("{} (each within 0.005)", parts.join(", ")))
}

/// `P(A = a, B = b | H = h)` for two independent Poisson(h) features.
fn poisson_joint(a: u32, b: u32, h: f64) -> f64 {
    let pmf = |k: u32| (-h).exp() * h.powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
    pmf(a) * pmf(b)
}

fn poisson() -> Verdict {
    let rates = poisson_binary_rates();
    let e2 = (-2.0f64).exp();
    let fp_err = (rates.false_positive - (1.0 - 5.0 * e2)).abs();
    let miss_err = (rates.miss - 13.0 * e2 * e2).abs();
    let b = builtin("poisson-binary", "").unwrap();
    let rule = FusionRule::new(&b.scenario);
    const N: u32 = 40;
    let mut table = vec![vec![0.0; N as usize]; N as usize];
    for a in 0..N {
        for bb in 0..N {
            table[a as usize][bb as usize] = rule.fuse(&[a as f64, bb as f64]).unwrap();
        }
    }
    let risk = |t: &Vec<Vec<f64>>| {
        let mut r = 0.0;
        for a in 0..N {
            for bb in 0..N {
                for h in [1.0, 2.0] {
                    r += 0.5 * poisson_joint(a, bb, h) * (t[a as usize][bb as usize] - h).powi(2);
                }
            }
        }
        r
    };
    let base = risk(&table);
    let mut flips_worse = true;
    for a in 0..=2u32 {
        for bb in 0..=(2 - a) {
            let mut t = table.clone();
            let c = &mut t[a as usize][bb as usize];
            *c = if *c == 1.0 { 2.0 } else { 1.0 };
            flips_worse &= risk(&t) > base;
        }
    }
    verdict(
        fp_err < 1e-12 && miss_err < 1e-12 && flips_worse,
        format!("rate errors {fp_err:.1e}, {miss_err:.1e}; every single flip with A+B <= 2 raises the risk: {flips_worse}"),
    )
}

fn corollary6() -> Verdict {
    let mut worst_risk: f64 = 0.0;
    let mut worst_rule: f64 = 0.0;
    for m in [2usize, 10, 100] {
        let p = GaussParams::new(1.0, 1.0, m).unwrap();
        let pbpo = pbpo_gauss(&p).unwrap();
        worst_risk = worst_risk.max((pbpo.risk - 1.0 / (m as f64 + 1.0)).abs());
        let s = gauss(1.0, 1.0, m, None).unwrap();
        let central = FusionRule::new(&s);
        let composed = build_pbpo(&s, &FusionTopology::pbpo(vec![vec![0], vec![1]], DecisionSpace::real_line())).unwrap();
        let batch = draw_batch(&s, 10_000, ProposalMode::Prior, 60 + m as u64).unwrap();
        for l in 0..batch.len() {
            let a = batch.features(l);
            let c = central.decide(a).unwrap();
            worst_rule = worst_rule.max((composed.decide(a).unwrap() - c).abs());
            worst_rule = worst_rule.max((pbpo.compose(a) - gauss_fusion(&p, a)).abs());
        }
    }
    verdict(
        worst_risk < 1e-12 && worst_rule < 1e-12,
        format!("max |risk - 1/(M+1)| {worst_risk:.1e}, max composed vs centralized {worst_rule:.1e} (M = 2, 10, 100)"),
    )
}

fn decay() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [2usize, 10, 50, 300] {
        let s = gauss(1.0, 1.0, m, None).unwrap();
        let plan = SamplePlan::new(L, ProposalMode::Prior, 70 + m as u64).unwrap();
        let out = run_plan(&FusionRule::new(&s), &s, &plan, &Request::risk(CostFunction::squared_error())).unwrap();
        let est = out.risks[0].estimate(0.95, RiskMethod::CltEmpirical).unwrap();
        let truth = 1.0 / (m as f64 + 1.0);
        ok &= est.contains(truth);
        parts.push(format!("M={m} {:.6} [{:.6}, {:.6}] vs {truth:.6}", est.estimate, est.ci_low, est.ci_high));
    }
    let start = Instant::now();
    let s = gauss(1.0, 1.0, 300, Some(2.0)).unwrap();
    let grid = GridSpec::for_scenario(&s, DEFAULT_DECISION_BINS, DEFAULT_OBJECT_BINS).unwrap();
    let plan = SamplePlan::new(60_000, ProposalMode::Uniform, 77).unwrap();
    let req = Request { grid: Some(grid.clone()), costs: vec![], weights: WeightScheme::Importance };
    let g = run_plan(&FusionRule::new(&s), &s, &plan, &req).unwrap().grid().unwrap();
    let elapsed = start.elapsed();
    let row = grid.object.locate(0.0).unwrap();
    let sd = g.row_moments(row).map(|(_, sd)| sd).unwrap_or(f64::NAN);
    ok &= sd < 0.07 && elapsed < Duration::from_secs(300);
    parts.push(format!("M=300 uniform L=60000: row sd at h=0 {sd:.4} (< 0.07) in {:.1} s", elapsed.as_secs_f64()));
    verdict(ok, parts.join("; "))
}

/// Posterior mean shifted by `eps·sin(Σa)`, quantized onto the scenario's decision space.
struct Perturbed<'a> {
    base: &'a FusionRule,
    eps: f64,
}

impl DecisionRule for Perturbed<'_> {
    fn dims(&self) -> usize {
        self.base.dims()
    }

    fn decide(&self, a: &[f64]) -> FusionResult<f64> {
        let x = self.base.posterior_mean(a)? + self.eps * a.iter().sum::<f64>().sin();
        Ok(self.base.scenario().decision().quantize(x))
    }
}

fn theorem4() -> Verdict {
    let s = gauss(1.0, 1.0, 10, None).unwrap().with_cost(CostFunction::even_power(4).unwrap()).unwrap();
    let cost = s.cost().clone();
    let rule = FusionRule::new(&s);
    let batch = draw_batch(&s, L, ProposalMode::Prior, 80).unwrap();
    let base = estimate_risk(&rule, &batch, &cost, 0.99, RiskMethod::CltEmpirical).unwrap();
    let mut ok = true;
    let mut parts = vec![format!("M=10 posterior mean {:.6} [{:.6}, {:.6}]", base.estimate, base.ci_low, base.ci_high)];
    for eps in [0.05, 0.2] {
        let est = estimate_risk(&Perturbed { base: &rule, eps }, &batch, &cost, 0.99, RiskMethod::CltEmpirical).unwrap();
        ok &= base.ci_high < est.ci_low;
        parts.push(format!("eps={eps} {:.6} [{:.6}, {:.6}]", est.estimate, est.ci_low, est.ci_high));
    }
    verdict(ok, parts.join("; "))
}

fn rms_error(s: &Scenario, rule: &FusionRule, samples: usize, seeds: std::ops::Range<u64>) -> f64 {
    let truth = 1.0 / 3.0;
    let n = seeds.end - seeds.start;
    let sq: f64 = seeds
        .map(|seed| {
            let plan = SamplePlan::new(samples, ProposalMode::Prior, seed).unwrap();
            let out = run_plan(rule, s, &plan, &Request::risk(CostFunction::squared_error())).unwrap();
            (out.risks[0].mean() - truth).powi(2)
        })
        .sum();
    (sq / n as f64).sqrt()
}

fn ci_machinery() -> Verdict {
    let s = gauss(1.0, 1.0, 2, None).unwrap();
    let rule = FusionRule::new(&s);
    let covered = (0..200u64)
        .filter(|k| {
            let plan = SamplePlan::new(10_000, ProposalMode::Prior, 1000 + k).unwrap();
            let out = run_plan(&rule, &s, &plan, &Request::risk(CostFunction::squared_error())).unwrap();
            out.risks[0].estimate(0.95, RiskMethod::CltEmpirical).unwrap().contains(1.0 / 3.0)
        })
        .count();
    let sizes = [1_000usize, 10_000, 100_000, 1_000_000];
    let points: Vec<(f64, f64)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let seeds = 5000 + 100 * i as u64..5010 + 100 * i as u64;
            ((n as f64).ln(), rms_error(&s, &rule, n, seeds).ln())
        })
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let slope = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / points.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    verdict(
        covered >= 180 && (slope + 0.5).abs() <= 0.15,
        format!("coverage {covered}/200 (>= 180), log-log slope of RMS error {slope:.3} (-0.5 +/- 0.15)"),
    )
}

fn mixture() -> Verdict {
    let r = run_validate("mixture", "", L, 100, 0.95).unwrap();
    verdict(
        r.passed,
        format!(
            "largest decision {:.4} (< 2.6), row normalization error {:.1e}",
            estimate_of(&r, "largest decision"),
            estimate_of(&r, "row normalization error")
        ),
    )
}

fn reproducibility() -> Verdict {
    let mut manifests = Vec::new();
    for (kind, scenario, params, samples, mode) in [
        (RunKind::Report, "builtin:gauss", "M=10", 100_000, ProposalMode::Prior),
        (RunKind::Report, "builtin:fourclass-pbpo", "", 100_000, ProposalMode::Prior),
        (RunKind::Performance, "builtin:gauss", "M=300,bound=2", 20_000, ProposalMode::Uniform),
        (RunKind::Risk, "builtin:mixture", "", 50_000, ProposalMode::Prior),
    ] {
        let mut m = RunManifest::new(kind, scenario);
        m.params = params.into();
        m.samples = samples;
        m.mode = mode;
        m.seed = 110;
        manifests.push(m);
    }
    let mut identical = 0;
    let mut files = 0;
    for m in &manifests {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let done = run_report(m, a.path()).unwrap();
        let recorded = RunManifest::read(&a.path().join("manifest.json")).unwrap();
        run_report(&recorded, b.path()).unwrap();
        for name in done.outputs.iter().map(|o| o.path.as_str()).chain(["manifest.json"]) {
            files += 1;
            if fs::read(a.path().join(name)).unwrap() == fs::read(b.path().join(name)).unwrap() {
                identical += 1;
            }
        }
    }
    verdict(identical == files, format!("{identical}/{files} output files byte-identical after manifest rerun"))
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, title: &str, v: Verdict, took: Duration| {
        let status = if v.passed { "PASS" } else { "FAIL" };
        failures += usize::from(!v.passed);
        println!("{status} {n:>2} {title}: {} [{:.1} s]", v.detail, took.as_secs_f64());
    };

    let start = Instant::now();
    let gauss_report = single_threaded(|| run_validate("gauss", "u=1,v=1,M=2", L, 10, 0.95).unwrap());
    let gauss_time = start.elapsed();
    report(1, "Gaussian closed-form risk", gaussian_closed_form(&gauss_report, gauss_time), gauss_time);
    report(2, "Gaussian performance density", gaussian_density(&gauss_report), Duration::ZERO);

    let criteria: [(usize, &str, fn() -> Verdict); 9] = [
        (3, "Exponential scenario", exponential),
        (4, "Four-class risks", fourclass),
        (5, "Poisson binary rates and local optimality", poisson),
        (6, "Two-stage Gaussian composition", corollary6),
        (7, "Risk decay with M", decay),
        (8, "Posterior mean beats perturbed rules (quartic cost)", theorem4),
        (9, "Confidence interval machinery", ci_machinery),
        (10, "Mixture example", mixture),
        (11, "Reproducibility", reproducibility),
    ];
    for (n, title, f) in criteria {
        let t = Instant::now();
        let v = f();
        report(n, title, v, t.elapsed());
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
