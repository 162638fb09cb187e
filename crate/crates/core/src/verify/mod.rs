//! Suite runner: seeded sampling, tolerance bookkeeping, and JSON/CSV reports.

mod suites;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::metric::MetricDescriptor;
use crate::riemann::EngineConfig;

pub use suites::icosphere;

pub const SCHEMA_VERSION: u32 = 1;

/// Named tolerances with their defaults.
pub const DEFAULT_TOLERANCES: &[(&str, f64, &str)] = &[
    ("identity", 1e-3, "curvature identities through finite differences"),
    ("algebraic", 1e-8, "algebraic and duality relations"),
    ("ode", 1e-3, "identities along integrated curves"),
    ("fat", 0.5, "lower bound for |det ω_V| at unit V"),
    ("cdr", 1e-10, "margins at or below this count as zero"),
    ("wnn", 1e-6, "slack allowed below zero in the WNN inequality"),
    ("good-triple", 1e-4, "doubly ruled surface mismatch"),
    ("negative-control", 1e-2, "lower bound for the mismatch of a wrong initial derivative"),
    ("warp", 1e-2, "relative error of the warped curvature formulas"),
    ("decay", 1e-3, "|S| at the largest regularization parameter"),
    ("base-family", 1e-2, "slack below 1 for the induced base curvature"),
    ("holonomy", 2.0, "max |ξ(t)|/|ξ(0)| of holonomy fields"),
];

pub struct SuiteInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub default_t: &'static [f64],
    pub default_span: f64,
}

pub const REGISTRY: &[SuiteInfo] = &[
    SuiteInfo { name: "riemann-symmetries", description: "symmetries and Bianchi identity of the curvature tensor; K = 1 on the round 7-sphere", default_t: &[], default_span: 0.0 },
    SuiteInfo { name: "cheeger-formula-vs-oracle", description: "closed-form κ_t against the curvature of g_t on C_t⁻¹-planes; κ_t ≥ κ_0", default_t: &[0.1, 1.0, 10.0], default_span: 0.0 },
    SuiteInfo { name: "fatness", description: "ω_V nondegenerate for every nonzero vertical V", default_t: &[], default_span: 0.0 },
    SuiteInfo { name: "cdr", description: "K_B |A*_X U*|² > <U*, (∇_X A)_X Y>² over a 162-point grid of algebra directions", default_t: &[], default_span: 0.0 },
    SuiteInfo { name: "wnn", description: "τ|X|²|A*_X V|² ≥ <(∇_X A*)_X V + A*_X S_X V, A*_X V> and its holonomy-field form", default_t: &[], default_span: 0.0 },
    SuiteInfo { name: "tapp-identities", description: "curvature identities of the good triple {X, V, -A*_X V} (totally geodesic fibers)", default_t: &[], default_span: 0.0 },
    SuiteInfo { name: "corollary-flat", description: "R(X, Y, Y, V) = 0 for Y in ker A_X, and for all Y when fat", default_t: &[], default_span: 0.0 },
    SuiteInfo { name: "k-identity", description: "K(ċ, ν) = ½(|ν|²)'' - 3|S_ċ ν|² + |A*_ċ ν|² along dual holonomy fields", default_t: &[], default_span: 1.0 },
    SuiteInfo { name: "dual-inv", description: "A*_ċ ν is unchanged by a vertical deformation of the metric", default_t: &[2.0], default_span: 1.0 },
    SuiteInfo { name: "good-triple", description: "exp(s V(t)) = exp(t X(s)) for 𝒜 = -A*_X V, with 𝒜 = 0 as negative control", default_t: &[], default_span: 0.5 },
    SuiteInfo { name: "basicness", description: "A*_X γ' is basic along vertical geodesics (totally geodesic fibers)", default_t: &[], default_span: 1.0 },
    SuiteInfo { name: "warping", description: "hh, vv and vh curvature of a vertical warping by a basic function", default_t: &[], default_span: 0.0 },
    SuiteInfo { name: "regularization-decay", description: "|S| of t g_t|V + g|H decays in t; induced base curvature stays ≥ 1", default_t: &[10.0, 100.0, 1000.0], default_span: 0.0 },
    SuiteInfo { name: "holonomy-bounded", description: "holonomy fields stay within a bounded factor of their initial length", default_t: &[], default_span: 10.0 },
];

pub fn find_suite(name: &str) -> Result<&'static SuiteInfo> {
    REGISTRY.iter().find(|s| s.name == name).ok_or_else(|| Error::UnknownSuite {
        name: name.to_string(),
        registry: REGISTRY.iter().map(|s| s.name).collect::<Vec<_>>().join(", "),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub bundle: String,
    pub metric: String,
    pub samples: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    /// Deformation parameters; empty selects the suite default.
    pub t: Vec<f64>,
    /// Curve length for ODE suites; `None` selects the suite default.
    pub span: Option<f64>,
    pub tau: f64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub engine: EngineConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            bundle: "hopf".into(),
            metric: "reference".into(),
            samples: 10,
            seed: 0,
            tolerances: DEFAULT_TOLERANCES.iter().map(|(k, v, _)| (k.to_string(), *v)).collect(),
            t: Vec::new(),
            span: None,
            tau: 1.0,
            workers: 0,
            engine: EngineConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn for_target(bundle: &str, metric: &str) -> Self {
        Self { bundle: bundle.into(), metric: metric.into(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        for (name, tol) in &self.tolerances {
            if !DEFAULT_TOLERANCES.iter().any(|(k, _, _)| k == name) {
                return Err(Error::Config(format!("unknown tolerance `{name}`")));
            }
            if !(*tol > 0.0 && tol.is_finite()) {
                return Err(Error::Config(format!("tolerance `{name}` must be positive, got {tol}")));
            }
        }
        if let Some(&t) = self.t.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!("t values must be positive, got {t}")));
        }
        if let Some(span) = self.span {
            if !(span > 0.0 && span.is_finite()) {
                return Err(Error::Config(format!("span must be positive, got {span}")));
            }
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        self.engine.validate()?;
        Bundle::from_name(&self.bundle)?;
        self.metric.parse::<MetricDescriptor>()?;
        Ok(())
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .or_else(|| DEFAULT_TOLERANCES.iter().find(|(k, _, _)| *k == name).map(|(_, v, _)| *v))
            .expect("tolerance name is registered")
    }

    /// Sets `name=value`.
    pub fn set_tolerance(&mut self, assignment: &str) -> Result<()> {
        let (name, value) = assignment.split_once('=').ok_or_else(|| Error::Config(format!("expected name=value, got `{assignment}`")))?;
        let value: f64 = value.trim().parse().map_err(|_| Error::Config(format!("bad tolerance value in `{assignment}`")))?;
        self.tolerances.insert(name.trim().to_string(), value);
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: SuiteConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v, _) in DEFAULT_TOLERANCES {
            cfg.tolerances.entry(k.to_string()).or_insert(*v);
        }
        Ok(cfg)
    }
}

/// Independent generator for sample `index`: the seed selects the key, the index the stream.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `residual ≤ tolerance`
    AtMost,
    /// `residual ≥ -tolerance`
    NotBelow,
    /// `residual ≥ tolerance`
    AtLeast,
    /// `residual > tolerance`
    Above,
}

impl Bound {
    pub fn holds(self, residual: f64, tolerance: f64) -> bool {
        match self {
            Bound::AtMost => residual <= tolerance,
            Bound::NotBelow => residual >= -tolerance,
            Bound::AtLeast => residual >= tolerance,
            Bound::Above => residual > tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordVerdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    /// Hypothesis of the check not met at this sample.
    #[serde(rename = "n/a")]
    Skipped,
}

impl RecordVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordVerdict::Pass => "pass",
            RecordVerdict::Fail => "fail",
            RecordVerdict::Skipped => "n/a",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// `<sample index>.<check>`
    pub sample_id: String,
    pub point: Vec<f64>,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub bound: Bound,
    pub verdict: RecordVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub count: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    /// Every failure is a margin that is exactly zero.
    #[serde(rename = "fail-strict")]
    FailStrict,
    #[serde(rename = "degenerate everywhere")]
    DegenerateEverywhere,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::FailStrict => "fail-strict",
            Verdict::DegenerateEverywhere => "degenerate everywhere",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub suite: String,
    pub config: SuiteConfig,
    pub records: Vec<Record>,
    pub aggregates: Option<Aggregates>,
    pub verdict: Verdict,
    pub summary: String,
    pub wall_time_s: f64,
}

impl CheckReport {
    /// Residuals of evaluated records, in sample order.
    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.residual).collect()
    }

    /// Residuals of the records whose check name (after the sample index) is `check`.
    pub fn residuals_of(&self, check: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.sample_id.split_once('.').is_some_and(|(_, c)| c == check))
            .filter_map(|r| r.residual)
            .collect()
    }
}

pub fn aggregate(records: &[Record]) -> Option<Aggregates> {
    let values: Vec<f64> = records.iter().filter_map(|r| r.residual).collect();
    if values.is_empty() {
        return None;
    }
    Some(Aggregates {
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        count: values.len(),
        skipped: records.len() - values.len(),
    })
}

pub fn run_suite(name: &str, config: &SuiteConfig) -> Result<CheckReport> {
    let info = find_suite(name)?;
    config.validate()?;
    let start = Instant::now();
    let ctx = suites::Context::new(info, config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<suites::SampleOutcome>> = pool.install(|| {
        (0..config.samples)
            .into_par_iter()
            .map(|i| suites::run_sample(&ctx, &mut sample_rng(config.seed, i)))
            .collect()
    });
    let mut records = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        let point: Vec<f64> = outcome.point.iter().copied().collect();
        for check in outcome.checks {
            let tolerance = config.tolerance(check.tolerance);
            let verdict = match check.value {
                None => RecordVerdict::Skipped,
                Some(r) if check.bound.holds(r, tolerance) => RecordVerdict::Pass,
                Some(_) => RecordVerdict::Fail,
            };
            records.push(Record {
                sample_id: format!("{i}.{}", check.name),
                point: point.clone(),
                residual: check.value,
                tolerance,
                bound: check.bound,
                verdict,
            });
        }
    }
    let verdict = suites::verdict(info.name, &records, config);
    let summary = summarize(&records);
    Ok(CheckReport {
        schema_version: SCHEMA_VERSION,
        suite: info.name.to_string(),
        config: config.clone(),
        aggregates: aggregate(&records),
        records,
        verdict,
        summary,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn summarize(records: &[Record]) -> String {
    let count = |v: RecordVerdict| records.iter().filter(|r| r.verdict == v).count();
    let (pass, fail, skipped) = (count(RecordVerdict::Pass), count(RecordVerdict::Fail), count(RecordVerdict::Skipped));
    let mut s = format!("{pass} passed, {fail} failed, {skipped} n/a");
    if let Some(r) = records.iter().find(|r| r.verdict == RecordVerdict::Fail) {
        s.push_str(&format!("; first failure {} (residual {:.3e}, tolerance {:.1e})", r.sample_id, r.residual.unwrap_or(f64::NAN), r.tolerance));
    }
    s
}

/// Minimum CDR margin per sampled frame over the algebra grid.
pub fn scan_cdr(bundle: &str, metric: &str, t_list: &[f64], samples: usize, seed: u64) -> Result<CheckReport> {
    let config = SuiteConfig { samples, seed, t: t_list.to_vec(), ..SuiteConfig::for_target(bundle, metric) };
    run_suite("cdr", &config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::Config(format!("unknown report format `{s}` (expected json or csv)"))),
        }
    }
}

pub const CSV_HEADER: [&str; 5] = ["suite", "sample_id", "residual", "tolerance", "verdict"];

pub fn render_report(report: &CheckReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).map_err(|e| Error::Serialize(e.to_string())),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let ser = |e: csv::Error| Error::Serialize(e.to_string());
            w.write_record(CSV_HEADER).map_err(ser)?;
            for r in &report.records {
                let residual = r.residual.map(|v| format!("{v:e}")).unwrap_or_default();
                w.write_record([report.suite.as_str(), &r.sample_id, &residual, &format!("{:e}", r.tolerance), r.verdict.as_str()])
                    .map_err(ser)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
        }
    }
}

pub fn emit_report(report: &CheckReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format)?;
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn read_report(path: &Path) -> Result<CheckReport> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Serialize(e.to_string()))
}
