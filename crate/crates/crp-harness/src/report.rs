//! Report types and their JSON/CSV writers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crp_core::roughcore::CrpReport;

use crate::convergence::ConvergenceReport;

/// One scalar check against a pinned bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `"<="`, `">="`, or `"=="` for boolean checks (value and bound are 0/1).
    pub relation: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, relation: "<=".into(), pass: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, relation: ">=".into(), pass: value >= bound }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check { name: name.into(), value: ok as u8 as f64, bound: 1.0, relation: "==".into(), pass: ok }
    }

    pub fn equal(name: impl Into<String>, a: bool, b: bool) -> Self {
        Check { name: name.into(), value: a as u8 as f64, bound: b as u8 as f64, relation: "==".into(), pass: a == b }
    }

    /// A failed computation, reported instead of aborting the suite.
    pub fn error(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Check { name: format!("{}: {err}", name.into()), value: f64::NAN, bound: f64::NAN, relation: "error".into(), pass: false }
    }
}

/// Two computations of the same quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub fixture: String,
    pub lhs: String,
    pub rhs: String,
    pub diff_sup: f64,
    pub slope: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub delta: f64,
    pub pairs_probed: usize,
    pub pass: bool,
}

impl From<&CrpReport> for Verification {
    fn from(r: &CrpReport) -> Self {
        Verification { c2: r.c_remainder, c1: r.c_derivative, delta: r.delta, pairs_probed: r.pairs_probed, pass: r.pass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub fixture: String,
    pub verifier: String,
    #[serde(flatten)]
    pub report: Verification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: String,
    pub name: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub comparisons: Vec<ComparisonRecord>,
    pub verifications: Vec<VerificationRecord>,
    pub convergence: Vec<ConvergenceReport>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<f64>,
}

impl CriterionReport {
    pub fn new(id: &str, name: &str, seed: u64) -> Self {
        CriterionReport {
            id: id.into(),
            name: name.into(),
            seed,
            checks: Vec::new(),
            comparisons: Vec::new(),
            verifications: Vec::new(),
            convergence: Vec::new(),
            pass: false,
            runtime: None,
        }
    }

    pub fn finish(mut self) -> Self {
        self.pass = self.checks.iter().all(|c| c.pass)
            && self.comparisons.iter().all(|c| c.pass)
            && self.convergence.iter().all(|c| c.pass)
            && !(self.checks.is_empty() && self.comparisons.is_empty() && self.convergence.is_empty());
        self
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        out.extend(self.comparisons.iter().filter(|c| !c.pass).map(|c| format!("{}: {} vs {}", c.fixture, c.lhs, c.rhs)));
        out.extend(self.convergence.iter().filter(|c| !c.pass).map(|c| c.name.clone()));
        out
    }

    /// One line: `PASS c3 example-6.7 (...)`.
    pub fn summary_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let detail = if self.pass { String::new() } else { format!(" [{}]", self.failures().join("; ")) };
        format!("{verdict} {} {}{detail}", self.id, self.name)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteBundle {
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
    pub pass: bool,
}

impl SuiteBundle {
    pub fn new(seed: u64, mut criteria: Vec<CriterionReport>) -> Self {
        criteria.sort_by_key(|a| natural_key(&a.id));
        let pass = criteria.iter().all(|c| c.pass);
        SuiteBundle { seed, criteria, pass }
    }
}

fn natural_key(id: &str) -> (String, u64) {
    let digits: String = id.chars().filter(|c| c.is_ascii_digit()).collect();
    let prefix: String = id.chars().filter(|c| !c.is_ascii_digit()).collect();
    (prefix, digits.parse().unwrap_or(0))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// `(level, N, h, error, slope_partial)`.
pub fn write_convergence_csv(path: &Path, report: &ConvergenceReport) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["level", "N", "h", "error", "slope_partial"]).map_err(csv_err)?;
    for r in &report.levels {
        let slope = if r.slope_partial.is_finite() { format!("{:e}", r.slope_partial) } else { String::new() };
        w.write_record([r.level.to_string(), r.n.to_string(), format!("{:e}", r.h), format!("{:e}", r.error), slope])
            .map_err(csv_err)?;
    }
    w.flush()
}

/// `(fixture, lhs, rhs, diff_sup, slope, pass)`.
pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRecord]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["fixture", "lhs", "rhs", "diff_sup", "slope", "pass"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.fixture.clone(), r.lhs.clone(), r.rhs.clone(), format!("{:e}", r.diff_sup), fmt_opt(r.slope), r.pass.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()
}

/// Writes `<id>.json` per criterion, `suite.json`, and the CSV tables.
pub fn write_bundle(dir: &Path, bundle: &SuiteBundle) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("suite.json"), bundle)?;
    for c in &bundle.criteria {
        write_json(&dir.join(format!("{}.json", c.id)), c)?;
        if !c.comparisons.is_empty() {
            write_comparison_csv(&dir.join(format!("{}-comparisons.csv", c.id)), &c.comparisons)?;
        }
        for conv in &c.convergence {
            write_convergence_csv(&dir.join(format!("{}-{}.csv", c.id, conv.name)), conv)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_pass_needs_all_parts() {
        let mut r = CriterionReport::new("c1", "x", 1);
        r.checks.push(Check::at_most("a", 1.0, 2.0));
        assert!(r.clone().finish().pass);
        r.checks.push(Check::at_least("b", 1.0, 2.0));
        let r = r.finish();
        assert!(!r.pass);
        assert_eq!(r.failures(), vec!["b".to_string()]);
        assert!(!CriterionReport::new("c2", "empty", 1).finish().pass);
    }

    #[test]
    fn bundle_orders_ids_numerically() {
        let ids = ["c10", "c2", "c1"];
        let crit = ids.iter().map(|id| CriterionReport::new(id, "", 0)).collect();
        let b = SuiteBundle::new(0, crit);
        let got: Vec<&str> = b.criteria.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(got, ["c1", "c2", "c10"]);
    }

    #[test]
    fn runtime_is_omitted_when_absent() {
        let r = CriterionReport::new("c1", "x", 7);
        let s = serde_json::to_string(&r).unwrap();
        assert!(!s.contains("runtime") && s.contains("\"seed\":7"));
    }
}
