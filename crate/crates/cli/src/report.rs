//! Report envelope, provenance and exit-code classification.

use std::fmt;
use std::path::Path;

use anyhow::Context;
use creativity_cert::certificates::CertificateKind;
use creativity_cert::metrics::MetricKind;
use creativity_cert::{Certificate, Error, Metric};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "creativity-cert";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_CERTIFIED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PRECONDITION: u8 = 3;

/// An error with the process exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::BoundViolation { .. } | Error::WeightViolation { .. }) => EXIT_PRECONDITION,
            Some(Error::Infeasible { .. } | Error::Protocol { .. }) => EXIT_NOT_CERTIFIED,
            _ => EXIT_USAGE,
        };
        Self { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// The whole command line minus `--out`/`--jobs`, which do not affect results.
pub fn canonical_command(args: &[String]) -> String {
    let mut out = vec![TOOL.to_string()];
    let mut skip_next = false;
    for a in args.iter().skip(1) {
        if skip_next {
            skip_next = false;
            continue;
        }
        if a == "--out" || a == "--jobs" {
            skip_next = true;
            continue;
        }
        if a.starts_with("--out=") || a.starts_with("--jobs=") {
            continue;
        }
        out.push(a.clone());
    }
    out.join(" ")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical (sorted-key) JSON rendering of `inputs`.
pub fn config_hash(inputs: &Value) -> String {
    sha256_hex(serde_json::to_string(inputs).expect("json value serializes").as_bytes())
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Value,
    pub result: Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: String, inputs: Value, result: Value) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            config_hash: config_hash(&inputs),
            seed: None,
            inputs,
            result,
            notes: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Writes the report to `out`, or prints it when no path is given.
pub fn emit(report: &Report, out: Option<&Path>, summary: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, report.render()).with_context(|| format!("writing {}", path.display()))?;
            println!("{summary}");
        }
        None => print!("{}", report.render()),
    }
    Ok(())
}

/// Serialized metric. `value: null` stands for `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricView {
    pub kind: MetricKind,
    pub value: Option<f64>,
    pub n: usize,
    #[serde(default)]
    pub r_min_used: Option<f64>,
    #[serde(default)]
    pub m_observed: Option<f64>,
}

impl From<&Metric> for MetricView {
    fn from(m: &Metric) -> Self {
        Self {
            kind: m.kind,
            value: Some(m.value).filter(|v| v.is_finite()),
            n: m.n,
            r_min_used: m.r_min_used,
            m_observed: m.m_observed.filter(|v| v.is_finite()).or(m.m_observed.map(|_| f64::MAX)),
        }
    }
}

impl MetricView {
    pub fn to_metric(&self) -> Metric {
        Metric {
            kind: self.kind,
            value: self.value.unwrap_or(f64::INFINITY),
            n: self.n,
            r_min_used: self.r_min_used,
            m_observed: self.m_observed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateView {
    pub kind: CertificateKind,
    pub delta: f64,
    pub t: f64,
    pub m_bound: Option<f64>,
    pub r_min: Option<f64>,
    pub certified: bool,
    pub n: usize,
    pub required_n: Option<u64>,
    pub margin: Option<i64>,
    pub threshold: Option<f64>,
    pub statement: String,
}

impl CertificateView {
    pub fn new(c: &Certificate, delta: f64, t: f64, m_bound: Option<f64>, r_min: Option<f64>) -> Self {
        Self {
            kind: c.kind,
            delta,
            t,
            m_bound,
            r_min,
            certified: c.certified,
            n: c.n,
            required_n: c.required_n,
            margin: c.margin.map(|m| m.clamp(i64::MIN as i128, i64::MAX as i128) as i64),
            threshold: c.threshold.filter(|v| v.is_finite()),
            statement: c.statement.clone(),
        }
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("value serializes")
}
