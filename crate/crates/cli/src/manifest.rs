//! Reproducible Monte Carlo runs: a [`RunManifest`] fixes every input, and
//! [`run_report`] turns it into output files plus a manifest carrying their
//! checksums. Rerunning a manifest rewrites the same bytes.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bayes_fusion::montecarlo::{
    risk_from_grid, run_plan, GridSpec, Request, RiskMethod, SamplePlan, WeightScheme, DEFAULT_DECISION_BINS,
    DEFAULT_OBJECT_BINS,
};
use bayes_fusion::network::build_pbpo;
use bayes_fusion::scenario::ProposalMode;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::output::{json_bytes, performance_csv, write};
use crate::source::{load, parse_cost, sha256_hex};
use crate::UsageError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PERFORMANCE_CSV: &str = "performance.csv";
pub const PERFORMANCE_JSON: &str = "performance.json";
pub const RISK_JSON: &str = "risk.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Performance,
    Risk,
    /// Performance grid and risk from one pass.
    Report,
}

impl RunKind {
    fn outputs(self) -> &'static [&'static str] {
        match self {
            RunKind::Performance => &[PERFORMANCE_CSV, PERFORMANCE_JSON],
            RunKind::Risk => &[RISK_JSON],
            RunKind::Report => &[PERFORMANCE_CSV, PERFORMANCE_JSON, RISK_JSON],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine_version: String,
    pub subcommand: RunKind,
    /// File path or `builtin:<name>`.
    pub scenario: String,
    #[serde(default)]
    pub params: String,
    /// Filled in by [`run_report`]; a rerun refuses a scenario whose fingerprint changed.
    #[serde(default)]
    pub scenario_sha256: String,
    #[serde(default)]
    pub topology: Option<String>,
    pub seed: u64,
    pub samples: usize,
    pub mode: ProposalMode,
    pub decision_bins: usize,
    pub object_bins: usize,
    /// Cost for the risk estimate; the scenario's own cost when absent.
    #[serde(default)]
    pub cost: Option<String>,
    pub confidence: f64,
    pub method: RiskMethod,
    #[serde(default)]
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(subcommand: RunKind, scenario: impl Into<String>) -> Self {
        Self {
            engine_version: crate::ENGINE_VERSION.to_string(),
            subcommand,
            scenario: scenario.into(),
            params: String::new(),
            scenario_sha256: String::new(),
            topology: None,
            seed: 0,
            samples: 100_000,
            mode: ProposalMode::Prior,
            decision_bins: DEFAULT_DECISION_BINS,
            object_bins: DEFAULT_OBJECT_BINS,
            cost: None,
            confidence: 0.95,
            method: RiskMethod::CltEmpirical,
            outputs: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }
}

/// Run the manifest, write its outputs and `manifest.json` into `out`, and return the completed manifest.
pub fn run_report(manifest: &RunManifest, out: &Path) -> Result<RunManifest> {
    if manifest.engine_version != crate::ENGINE_VERSION {
        eprintln!("warning: manifest engine version {} differs from {}", manifest.engine_version, crate::ENGINE_VERSION);
    }
    let loaded = load(&manifest.scenario, &manifest.params, manifest.topology.as_deref())?;
    if !manifest.scenario_sha256.is_empty() && manifest.scenario_sha256 != loaded.fingerprint {
        bail!(UsageError(format!("scenario {} no longer matches the manifest fingerprint", manifest.scenario)));
    }
    let scenario = &loaded.scenario;
    let cost = match &manifest.cost {
        Some(text) => parse_cost(text)?,
        None => scenario.cost().clone(),
    };
    let rule = build_pbpo(scenario, &loaded.topology)?;
    let plan = SamplePlan::new(manifest.samples, manifest.mode, manifest.seed)?;
    let wants_grid = manifest.subcommand != RunKind::Risk;
    let grid = if wants_grid {
        Some(GridSpec::for_scenario(scenario, manifest.decision_bins, manifest.object_bins)?)
    } else {
        None
    };
    let req = Request { grid, costs: vec![cost.clone()], weights: WeightScheme::Importance };
    let outcome = run_plan(&rule, scenario, &plan, &req)?;

    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    if let Some(grid) = outcome.grid() {
        let grid_risk = risk_from_grid(&grid, scenario.prior(), &cost);
        let sidecar = json!({
            "engine_version": crate::ENGINE_VERSION,
            "scenario": manifest.scenario,
            "params": manifest.params,
            "seed": manifest.seed,
            "L": manifest.samples,
            "mode": manifest.mode,
            "grid": grid.spec,
            "normalization": grid.report,
            "row_samples": grid.row_samples,
            "decision_range": [outcome.min_decision, outcome.max_decision],
            "grid_risk": grid_risk,
        });
        files.push((PERFORMANCE_CSV, performance_csv(&grid)?));
        files.push((PERFORMANCE_JSON, json_bytes(&sidecar)?));
    }
    if manifest.subcommand != RunKind::Performance {
        let est = outcome.risks[0].estimate(manifest.confidence, manifest.method)?;
        let report = json!({
            "estimate": est.estimate,
            "ci_low": est.ci_low,
            "ci_high": est.ci_high,
            "L": manifest.samples,
            "seed": manifest.seed,
            "method": est.method,
            "confidence": est.confidence,
            "half_width": est.half_width,
            "cost": cost,
        });
        files.push((RISK_JSON, json_bytes(&report)?));
    }
    debug_assert_eq!(files.iter().map(|f| f.0).collect::<Vec<_>>(), manifest.subcommand.outputs());

    let mut done = manifest.clone();
    done.engine_version = crate::ENGINE_VERSION.to_string();
    done.scenario_sha256 = loaded.fingerprint;
    done.outputs = files.iter().map(|(name, bytes)| OutputFile { path: name.to_string(), sha256: sha256_hex(bytes) }).collect();
    for (name, bytes) in &files {
        write(out, name, bytes)?;
    }
    write(out, MANIFEST_FILE, &json_bytes(&done)?)?;
    Ok(done)
}

/// Output files whose checksums differ between two completed manifests.
pub fn checksum_mismatches(recorded: &RunManifest, rerun: &RunManifest) -> Vec<String> {
    let mut bad = Vec::new();
    for want in &recorded.outputs {
        match rerun.outputs.iter().find(|o| o.path == want.path) {
            Some(got) if got.sha256 == want.sha256 => {}
            _ => bad.push(want.path.clone()),
        }
    }
    bad
}
