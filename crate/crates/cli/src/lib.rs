//! `bfuse`: command-line access to the fusion engine.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use bayes_fusion::fusion::DecisionRule;
use bayes_fusion::montecarlo::{RiskMethod, DEFAULT_DECISION_BINS, DEFAULT_OBJECT_BINS};
use bayes_fusion::network::build_pbpo;
use bayes_fusion::scenario::ProposalMode;
use bayes_fusion::FusionError;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod closed_form;
pub mod manifest;
pub mod output;
pub mod source;
pub mod validate;

use manifest::{checksum_mismatches, run_report, RunKind, RunManifest, MANIFEST_FILE};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

/// Bad flags, unknown scenario names, malformed scenario files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Exit status for an error: 3 for numerical degeneracy, 2 for usage and input errors, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<FusionError>() {
            return match e {
                FusionError::Degenerate { .. } => EXIT_DEGENERATE,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_VALIDATION
}

#[derive(Debug, Parser)]
#[command(name = "bfuse", version, about = "Bayes-optimal fusion rules, their performance and their risk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse feature rows from a CSV file.
    Fuse {
        #[command(flatten)]
        common: Common,
        /// CSV with a header row and one column per joint feature.
        #[arg(long)]
        input: PathBuf,
        /// Also emit the posterior mean before quantization.
        #[arg(long)]
        soft: bool,
    },
    /// Monte Carlo performance grid (CSV) with a JSON sidecar.
    Performance {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo Bayes risk with a confidence interval.
    Risk {
        #[command(flatten)]
        common: Common,
        /// squared, quadratic, power:P or poly:c0,c1,...; defaults to the scenario's cost.
        #[arg(long)]
        cost: Option<String>,
        #[arg(long, value_enum, default_value_t = Method::Clt)]
        method: Method,
    },
    /// Closed-form rule, risk and performance grid of a built-in scenario.
    Analytic {
        #[command(flatten)]
        common: Common,
    },
    /// Check a built-in scenario's Monte Carlo estimates against closed forms.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Rerun a manifest and compare output checksums.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; defaults to the manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file path or builtin:<name>.
    #[arg(long)]
    pub scenario: String,
    /// Builtin parameters, e.g. "u=1,v=1,M=2".
    #[arg(long, default_value = "")]
    pub params: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Proposal::Prior)]
    pub proposal: Proposal,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Decision bins, or DxO for decision and object bins.
    #[arg(long, default_value_t = Bins::default())]
    pub bins: Bins,
    /// "centralized" or a TOML inline table, e.g. {kind="pbpo", groups=[[0],[1]], intermediate={kind="real"}}.
    #[arg(long)]
    pub topology: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Proposal {
    Prior,
    Uniform,
}

impl From<Proposal> for ProposalMode {
    fn from(p: Proposal) -> Self {
        match p {
            Proposal::Prior => ProposalMode::Prior,
            Proposal::Uniform => ProposalMode::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Sample standard deviation.
    Clt,
    /// Bound from the sample moments of the cost.
    Theorem4,
}

impl From<Method> for RiskMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Clt => RiskMethod::CltEmpirical,
            Method::Theorem4 => RiskMethod::Theorem4Bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bins {
    pub decision: usize,
    pub object: usize,
}

impl Default for Bins {
    fn default() -> Self {
        Self { decision: DEFAULT_DECISION_BINS, object: DEFAULT_OBJECT_BINS }
    }
}

impl fmt::Display for Bins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.decision, self.object)
    }
}

impl FromStr for Bins {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or(format!("bad bin count {t:?}"));
        match s.split_once('x') {
            Some((d, o)) => Ok(Self { decision: parse(d)?, object: parse(o)? }),
            None => Ok(Self { decision: parse(s)?, object: DEFAULT_OBJECT_BINS }),
        }
    }
}

const DEFAULT_OUT: &str = "bfuse-out";

impl Common {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    fn builtin(&self) -> Result<&str> {
        source::builtin_name(&self.scenario)
            .ok_or_else(|| UsageError(format!("expected builtin:<name>, got {}", self.scenario)).into())
    }

    pub fn manifest(&self, kind: RunKind) -> RunManifest {
        let mut m = RunManifest::new(kind, &self.scenario);
        m.params = self.params.clone();
        m.topology = self.topology.clone();
        m.seed = self.seed;
        m.samples = self.samples;
        m.mode = self.proposal.into();
        m.decision_bins = self.bins.decision;
        m.object_bins = self.bins.object;
        m.confidence = self.confidence;
        m
    }
}

fn print(bytes: &[u8]) -> Result<()> {
    io::stdout().write_all(bytes)?;
    Ok(())
}

/// Run a parsed command; returns the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Fuse { common, input, soft } => {
            let bytes = fuse_csv(&common, &input, soft)?;
            match &common.out {
                Some(dir) => output::write(dir, "decisions.csv", &bytes)?,
                None => print(&bytes)?,
            }
            Ok(EXIT_OK)
        }
        Command::Performance { common } => {
            let done = run_report(&common.manifest(RunKind::Performance), &common.out_dir())?;
            print(&output::json_bytes(&done)?)?;
            Ok(EXIT_OK)
        }
        Command::Risk { common, cost, method } => {
            let mut m = common.manifest(RunKind::Risk);
            m.cost = cost;
            m.method = method.into();
            let out = common.out_dir();
            run_report(&m, &out)?;
            print(&fs::read(out.join(manifest::RISK_JSON))?)?;
            Ok(EXIT_OK)
        }
        Command::Analytic { common } => {
            let f = closed_form::run_analytic(common.builtin()?, &common.params, common.bins.decision, common.bins.object)?;
            if let Some(dir) = &common.out {
                output::write(dir, closed_form::ANALYTIC_CSV, &f.grid_csv)?;
                output::write(dir, "analytic.json", &output::json_bytes(&f.report)?)?;
            }
            print(&output::json_bytes(&f.report)?)?;
            Ok(EXIT_OK)
        }
        Command::Validate { common } => {
            let report =
                validate::run_validate(common.builtin()?, &common.params, common.samples, common.seed, common.confidence)?;
            let bytes = output::json_bytes(&report)?;
            if let Some(dir) = &common.out {
                output::write(dir, "validation.json", &bytes)?;
            }
            print(&bytes)?;
            Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Report { manifest, out } => {
            let recorded = RunManifest::read(&manifest)?;
            let dir = out.unwrap_or_else(|| manifest.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
            let rerun = run_report(&recorded, &dir)?;
            let bad = checksum_mismatches(&recorded, &rerun);
            for path in &bad {
                eprintln!("checksum mismatch: {path}");
            }
            eprintln!("wrote {}", dir.join(MANIFEST_FILE).display());
            Ok(if bad.is_empty() { EXIT_OK } else { EXIT_VALIDATION })
        }
    }
}

/// Decisions for each row of a feature CSV, as CSV.
pub fn fuse_csv(common: &Common, input: &Path, soft: bool) -> Result<Vec<u8>> {
    let loaded = source::load(&common.scenario, &common.params, common.topology.as_deref())?;
    let rule = build_pbpo(&loaded.scenario, &loaded.topology)?;
    let mut rd = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    if soft {
        w.write_record(["decision", "posterior_mean"])?;
    } else {
        w.write_record(["decision"])?;
    }
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let a = rec
            .iter()
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| UsageError(format!("row {}: {e}", i + 1)))?;
        if a.len() != rule.dims() {
            return Err(UsageError(format!("row {}: expected {} features, got {}", i + 1, rule.dims(), a.len())).into());
        }
        if soft {
            let (mean, decision) = rule.fuse_soft(&a)?;
            w.write_record([decision.to_string(), mean.to_string()])?;
        } else {
            w.write_record([rule.decide(&a)?.to_string()])?;
        }
    }
    Ok(w.into_inner()?)
}
