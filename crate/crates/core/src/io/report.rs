//! Diversity reports.
//!
//! JSON form: a key-sorted document
//!
//! ```json
//! {
//!   "baseline": "baseline",
//!   "context": { "factors": "1,1.1,1.2" },
//!   "fingerprint": "9f2c…",
//!   "groups": { "pooling_max": { "K=1/c3": { "half_width": 0.05, "kind": "fraction", "n": 100, "value": 0.3 } } },
//!   "improvements": { "pooling_max": { "K=1/c3": { "baseline_fraction": 0.1, "method_fraction": 0.3, "ratio": 3.0 } } },
//!   "kind": "color"
//! }
//! ```
//!
//! CSV forms: metrics as `group,metric,kind,value,half_width,n` and
//! improvements as `group,metric,baseline,method,ratio`, rows sorted by group
//! then metric. Missing half-widths are empty cells; undefined ratios are `n/a`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::batch::{multiplicative_improvement, proportion_ci, ImprovementScore, MeanEstimate};
use crate::io::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Fraction of batches; eligible for multiplicative improvement.
    Fraction,
    Mean,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Fraction => "fraction",
            MetricKind::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub kind: MetricKind,
    pub n: usize,
    pub half_width: Option<f64>,
}

impl MetricValue {
    pub fn fraction(p: f64, n: usize) -> Self {
        MetricValue {
            value: p,
            kind: MetricKind::Fraction,
            n,
            half_width: Some(proportion_ci(p, n).half_width),
        }
    }

    pub fn mean(estimate: &MeanEstimate) -> Self {
        MetricValue {
            value: estimate.mean,
            kind: MetricKind::Mean,
            n: estimate.n,
            half_width: estimate.half_width,
        }
    }
}

pub type GroupMetrics = BTreeMap<String, MetricValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    /// `color`, `pairwise` or `coverage`.
    pub kind: String,
    /// Hex SHA-256 over `kind` and `context`.
    pub fingerprint: String,
    /// Evaluation settings and any sampler provenance supplied by the caller.
    pub context: BTreeMap<String, String>,
    pub groups: BTreeMap<String, GroupMetrics>,
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default)]
    pub improvements: BTreeMap<String, BTreeMap<String, ImprovementScore>>,
}

pub fn context_fingerprint(kind: &str, context: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(b"\n");
    for (k, v) in context {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("report kinds differ: {method} vs {baseline}")]
    KindMismatch { method: String, baseline: String },
    #[error("report fingerprints differ ({method} vs {baseline}); evaluation contexts are not comparable, pass --force to override")]
    FingerprintMismatch { method: String, baseline: String },
    #[error("baseline group {0:?} not found")]
    UnknownGroup(String),
    #[error("group {group:?}: metric keys differ: only in method [{}], only in baseline [{}]", .method_only.join(", "), .baseline_only.join(", "))]
    MetricKeyMismatch {
        group: String,
        method_only: Vec<String>,
        baseline_only: Vec<String>,
    },
}

impl DiversityReport {
    pub fn new(kind: impl Into<String>, context: BTreeMap<String, String>) -> Self {
        let kind = kind.into();
        DiversityReport {
            fingerprint: context_fingerprint(&kind, &context),
            kind,
            context,
            groups: BTreeMap::new(),
            baseline: None,
            improvements: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, group: &str, metric: &str, value: MetricValue) {
        self.groups
            .entry(group.to_string())
            .or_default()
            .insert(metric.to_string(), value);
    }

    pub fn get(&self, group: &str, metric: &str) -> Option<&MetricValue> {
        self.groups.get(group)?.get(metric)
    }

    /// Fills `improvements` for every group against `baseline`, which must be
    /// one of this report's groups.
    pub fn set_baseline(&mut self, baseline: &str) -> Result<(), CompareError> {
        let base = self
            .groups
            .get(baseline)
            .ok_or_else(|| CompareError::UnknownGroup(baseline.to_string()))?
            .clone();
        let mut improvements = BTreeMap::new();
        for (group, metrics) in &self.groups {
            improvements.insert(group.clone(), improvement_table(group, metrics, &base)?);
        }
        self.baseline = Some(baseline.to_string());
        self.improvements = improvements;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        let bad = |m: String| Err(FormatError::Report(m));
        if self.fingerprint != context_fingerprint(&self.kind, &self.context) {
            return bad("fingerprint does not match kind and context".into());
        }
        for (group, metrics) in &self.groups {
            for (metric, v) in metrics {
                if !v.value.is_finite() || v.half_width.is_some_and(|h| !h.is_finite() || h < 0.0) {
                    return bad(format!("{group}/{metric}: non-finite value or interval"));
                }
            }
        }
        for (group, table) in &self.improvements {
            for (metric, s) in table {
                let finite = s.baseline_fraction.is_finite()
                    && s.method_fraction.is_finite()
                    && s.ratio.is_none_or(f64::is_finite);
                if !finite {
                    return bad(format!("improvement {group}/{metric}: non-finite value"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, FormatError> {
        self.validate()?;
        // serde_json's map is ordered, so going through Value sorts every key.
        let value = serde_json::to_value(self).map_err(|e| FormatError::Report(e.to_string()))?;
        Ok(serde_json::to_string_pretty(&value).expect("report serialization is infallible") + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let report: DiversityReport = serde_json::from_str(text).map_err(|e| FormatError::Json {
            what: "report",
            message: e.to_string(),
        })?;
        report.validate()?;
        Ok(report)
    }

    pub fn metrics_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "metric", "kind", "value", "half_width", "n"]).unwrap();
        for (group, metrics) in &self.groups {
            for (metric, v) in metrics {
                let half = v.half_width.map(|h| h.to_string()).unwrap_or_default();
                w.write_record([group, metric, v.kind.as_str(), &v.value.to_string(), &half, &v.n.to_string()])
                    .unwrap();
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn improvements_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "metric", "baseline", "method", "ratio"]).unwrap();
        for (group, table) in &self.improvements {
            for (metric, s) in table {
                let ratio = s.ratio.map_or_else(|| "n/a".to_string(), |r| r.to_string());
                w.write_record([
                    group,
                    metric,
                    &s.baseline_fraction.to_string(),
                    &s.method_fraction.to_string(),
                    &ratio,
                ])
                .unwrap();
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn fraction_keys(metrics: &GroupMetrics) -> BTreeSet<&String> {
    metrics
        .iter()
        .filter(|(_, v)| v.kind == MetricKind::Fraction)
        .map(|(k, _)| k)
        .collect()
}

fn improvement_table(
    group: &str,
    method: &GroupMetrics,
    baseline: &GroupMetrics,
) -> Result<BTreeMap<String, ImprovementScore>, CompareError> {
    let (m, b) = (fraction_keys(method), fraction_keys(baseline));
    if m != b {
        return Err(CompareError::MetricKeyMismatch {
            group: group.to_string(),
            method_only: m.difference(&b).map(|s| s.to_string()).collect(),
            baseline_only: b.difference(&m).map(|s| s.to_string()).collect(),
        });
    }
    Ok(m.into_iter()
        .map(|k| (k.clone(), multiplicative_improvement(method[k].value, baseline[k].value)))
        .collect())
}

/// Improvement of every group in `method` over `baseline`. With
/// `baseline_group` (or a single-group baseline report) every method group is
/// scored against that group; otherwise groups are paired by name.
pub fn compare_reports(
    method: &DiversityReport,
    baseline: &DiversityReport,
    baseline_group: Option<&str>,
    force: bool,
) -> Result<DiversityReport, CompareError> {
    if method.kind != baseline.kind {
        return Err(CompareError::KindMismatch {
            method: method.kind.clone(),
            baseline: baseline.kind.clone(),
        });
    }
    if method.fingerprint != baseline.fingerprint && !force {
        return Err(CompareError::FingerprintMismatch {
            method: method.fingerprint.clone(),
            baseline: baseline.fingerprint.clone(),
        });
    }
    let fixed = match baseline_group {
        Some(g) => Some(g.to_string()),
        None if baseline.groups.len() == 1 => baseline.groups.keys().next().cloned(),
        None => None,
    };
    let mut out = method.clone();
    out.improvements.clear();
    for (group, metrics) in &method.groups {
        let base_name = fixed.as_deref().unwrap_or(group);
        let base = baseline
            .groups
            .get(base_name)
            .ok_or_else(|| CompareError::UnknownGroup(base_name.to_string()))?;
        out.improvements.insert(group.clone(), improvement_table(group, metrics, base)?);
    }
    out.baseline = Some(fixed.unwrap_or_else(|| "matched by group".to_string()));
    Ok(out)
}

pub fn write_report(report: &DiversityReport, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, report.to_json()?).map_err(|e| FormatError::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<DiversityReport, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    DiversityReport::from_json(&text)
}
