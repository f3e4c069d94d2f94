//! Residual reports with a three-way numerical verdict and their JSON/CSV
//! serialization.

use indexmap::IndexMap;
use num_complex::Complex64 as C64;
use serde::{Serialize, Serializer};

use crate::jets::Jet;

pub fn serialize_complex_vec<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
    pairs.serialize(s)
}

fn serialize_complex_map<S: Serializer>(
    m: &IndexMap<String, C64>,
    s: S,
) -> Result<S::Ok, S::Error> {
    let pairs: IndexMap<&str, [f64; 2]> =
        m.iter().map(|(k, c)| (k.as_str(), [c.re, c.im])).collect();
    pairs.serialize(s)
}

fn serialize_opt_complex<S: Serializer>(v: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
    v.map(|c| [c.re, c.im]).serialize(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    DecomposableConsistent,
    Rejected,
    Inconclusive,
}

impl Classification {
    pub fn exit_code(self) -> i32 {
        match self {
            Classification::DecomposableConsistent => 0,
            Classification::Rejected => 2,
            Classification::Inconclusive => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::DecomposableConsistent => "decomposable-consistent",
            Classification::Rejected => "rejected",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

/// Relative thresholds of the verdict. Residuals are compared against
/// `threshold * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionPolicy {
    pub accept: f64,
    pub reject: f64,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        DecisionPolicy {
            accept: 1e-8,
            reject: 1e-6,
        }
    }
}

impl DecisionPolicy {
    pub fn classify(&self, max_abs: f64, scale: f64, skipped: usize) -> Classification {
        if max_abs > self.reject * scale {
            Classification::Rejected
        } else if skipped > 0 || max_abs > self.accept * scale {
            Classification::Inconclusive
        } else {
            Classification::DecomposableConsistent
        }
    }
}

/// Largest `|d^alpha u|` at the base with `1 <= |alpha| <= 3`.
pub fn derivative_scale(u: &Jet) -> f64 {
    let space = u.space().clone();
    space
        .exponents()
        .iter()
        .filter(|e| {
            let d: usize = e.iter().map(|&k| k as usize).sum();
            (1..=3).contains(&d)
        })
        .map(|e| u.derivative_at_base(e).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PointRecord {
    pub index: usize,
    #[serde(serialize_with = "serialize_complex_vec")]
    pub z: Vec<C64>,
    #[serde(serialize_with = "serialize_complex_map")]
    pub residuals: IndexMap<String, C64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub star_margin: Option<f64>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "serialize_opt_complex"
    )]
    pub lambda: Option<C64>,
    #[serde(skip_serializing_if = "IndexMap::is_empty")]
    pub diagnostics: IndexMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repaired: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    /// Derivative scale of `u` at this point (not serialized).
    #[serde(skip)]
    pub scale: f64,
}

impl PointRecord {
    pub fn new(index: usize, z: Vec<C64>) -> PointRecord {
        PointRecord {
            index,
            z,
            ..Default::default()
        }
    }

    pub fn skipped(index: usize, z: Vec<C64>, reason: String) -> PointRecord {
        PointRecord {
            skipped: Some(reason),
            ..PointRecord::new(index, z)
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.residuals
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub max_abs: f64,
    pub median: f64,
    pub scale: f64,
    pub classification: Classification,
    pub accept_threshold: f64,
    pub reject_threshold: f64,
    pub points: usize,
    pub skipped: usize,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub test: String,
    pub surface: String,
    pub u: String,
    pub seed: u64,
    pub order: usize,
    pub points: Vec<PointRecord>,
    pub summary: Summary,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

impl ResidualReport {
    pub fn new(
        test: &str,
        surface: &str,
        u: &str,
        seed: u64,
        order: usize,
        points: Vec<PointRecord>,
        policy: &DecisionPolicy,
    ) -> ResidualReport {
        let summary = summarize(&points, policy);
        ResidualReport {
            test: test.to_string(),
            surface: surface.to_string(),
            u: u.to_string(),
            seed,
            order,
            points,
            summary,
        }
    }

    pub fn classification(&self) -> Classification {
        self.summary.classification
    }

    /// Every residual value under `name`, in point order.
    pub fn values(&self, name: &str) -> Vec<C64> {
        self.points
            .iter()
            .filter_map(|p| p.residuals.get(name).copied())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per (point, residual).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,residual,re,im,abs,star_margin,skipped\n");
        for p in &self.points {
            let margin = p.star_margin.map(|m| format!("{m:e}")).unwrap_or_default();
            if let Some(reason) = &p.skipped {
                out.push_str(&format!(
                    "{},,,,,{margin},\"{}\"\n",
                    p.index,
                    reason.replace('"', "'")
                ));
                continue;
            }
            for (name, c) in &p.residuals {
                out.push_str(&format!(
                    "{},\"{}\",{:e},{:e},{:e},{margin},\n",
                    p.index,
                    name,
                    c.re,
                    c.im,
                    c.norm()
                ));
            }
        }
        out
    }
}

pub fn summarize(points: &[PointRecord], policy: &DecisionPolicy) -> Summary {
    let skipped = points.iter().filter(|p| p.skipped.is_some()).count();
    let mut all: Vec<f64> = points
        .iter()
        .flat_map(|p| p.residuals.values().map(|c| c.norm()))
        .collect();
    let max_abs = all.iter().copied().fold(0.0, f64::max);
    let scale = points.iter().map(|p| p.scale).fold(0.0, f64::max);
    let classification = policy.classify(max_abs, scale, skipped);
    let note = match classification {
        Classification::DecomposableConsistent => {
            "pointwise conditions hold at all sampled points; consistent with decomposability"
        }
        Classification::Rejected => "a necessary pointwise condition fails; not decomposable",
        Classification::Inconclusive => {
            "residuals between thresholds or points skipped; no verdict"
        }
    }
    .to_string();
    Summary {
        max_abs,
        median: median(&mut all),
        scale,
        classification,
        accept_threshold: policy.accept,
        reject_threshold: policy.reject,
        points: points.len(),
        skipped,
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(values: &[f64], scale: f64) -> PointRecord {
        let mut r = PointRecord::new(0, vec![C64::new(1.0, 0.0)]);
        for (i, v) in values.iter().enumerate() {
            r.residuals.insert(format!("r{i}"), C64::new(*v, 0.0));
        }
        r.scale = scale;
        r
    }

    #[test]
    fn verdicts() {
        let policy = DecisionPolicy::default();
        let ok = summarize(&[record(&[1e-12], 1.0)], &policy);
        assert_eq!(ok.classification, Classification::DecomposableConsistent);
        let bad = summarize(&[record(&[1e-3], 1.0)], &policy);
        assert_eq!(bad.classification, Classification::Rejected);
        let mid = summarize(&[record(&[1e-7], 1.0)], &policy);
        assert_eq!(mid.classification, Classification::Inconclusive);
        let skip = PointRecord::skipped(1, vec![], "degenerate".into());
        let s = summarize(&[record(&[0.0], 1.0), skip.clone()], &policy);
        assert_eq!(s.classification, Classification::Inconclusive);
        // A failing residual wins over skipped points.
        let s = summarize(&[record(&[1.0], 1.0), skip], &policy);
        assert_eq!(s.classification, Classification::Rejected);
    }

    #[test]
    fn median_and_json_shape() {
        let policy = DecisionPolicy::default();
        let report = ResidualReport::new(
            "t",
            "sphere:n=2",
            "z1",
            42,
            5,
            vec![record(&[1.0, 3.0, 2.0], 1.0)],
            &policy,
        );
        assert_eq!(report.summary.median, 2.0);
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(v["points"][0]["z"][0][0], 1.0);
        assert_eq!(v["points"][0]["residuals"]["r1"][0], 3.0);
        assert_eq!(v["summary"]["classification"], "rejected");
        assert!(report.to_csv().lines().count() == 4);
    }
}
