use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::config::TargetKind;
use crate::error::Result;

/// `lhs / rhs`, with `0` when `lhs = 0` and `inf` when only `rhs` vanishes.
pub fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRow {
    pub weight: String,
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub note: String,
}

impl TrialRow {
    pub fn new(weight: &str, trial: usize, lhs: f64, rhs: f64, note: impl Into<String>) -> Self {
        Self {
            weight: weight.to_string(),
            trial,
            lhs,
            rhs,
            ratio: ratio(lhs, rhs),
            note: note.into(),
        }
    }

    /// A row whose ratio is a measured constant rather than `lhs / rhs`.
    pub fn measured(weight: &str, trial: usize, lhs: f64, rhs: f64, constant: f64, note: impl Into<String>) -> Self {
        Self {
            weight: weight.to_string(),
            trial,
            lhs,
            rhs,
            ratio: constant,
            note: note.into(),
        }
    }

    fn is_sane(&self) -> bool {
        !self.lhs.is_nan() && !self.rhs.is_nan() && self.ratio.is_finite()
    }
}

/// Outcome of one target.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RatioReport {
    pub id: String,
    pub target: TargetKind,
    #[serde(skip)]
    pub rows: Vec<TrialRow>,
    pub trials: usize,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub budget: Option<f64>,
    pub pass: bool,
    /// Weight constants and derived quantities, keyed by name.
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl RatioReport {
    /// Assembles the summary. The target fails on NaN or infinite ratios, on
    /// a breached budget, or when `failure` is set.
    pub fn finish(
        id: &str,
        target: TargetKind,
        rows: Vec<TrialRow>,
        constants: BTreeMap<String, f64>,
        mut notes: Vec<String>,
        budget: Option<f64>,
        failure: Option<String>,
    ) -> Self {
        let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let max_ratio = if ratios.iter().any(|r| r.is_nan()) {
            f64::NAN
        } else {
            ratios.iter().cloned().fold(0.0, f64::max)
        };
        ratios.sort_by(f64::total_cmp);
        let median_ratio = match ratios.len() {
            0 => 0.0,
            n if n % 2 == 1 => ratios[n / 2],
            n => 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]),
        };
        let sane = rows.iter().all(TrialRow::is_sane) && constants.values().all(|c| !c.is_nan());
        if !sane {
            notes.push("non-finite ratio or NaN encountered".into());
        }
        let within = budget.is_none_or(|b| max_ratio <= b);
        if !within {
            notes.push("budget exceeded".into());
        }
        let pass = sane && within && failure.is_none();
        if let Some(f) = failure {
            notes.push(f);
        }
        Self {
            id: id.to_string(),
            target,
            trials: rows.len(),
            rows,
            max_ratio,
            median_ratio,
            budget,
            pass,
            constants,
            notes,
        }
    }

    /// A target refused before any computation.
    pub fn rejected(id: &str, target: TargetKind, reason: String, budget: Option<f64>) -> Self {
        Self {
            id: id.to_string(),
            target,
            rows: Vec::new(),
            trials: 0,
            max_ratio: 0.0,
            median_ratio: 0.0,
            budget,
            pass: false,
            constants: BTreeMap::new(),
            notes: vec![format!("rejected: {reason}")],
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("weight,trial,lhs,rhs,ratio,note\n");
        for r in &self.rows {
            let note = r.note.replace([',', '\n'], ";");
            let _ = writeln!(s, "{},{},{:e},{:e},{:e},{}", r.weight, r.trial, r.lhs, r.rhs, r.ratio, note);
        }
        s
    }
}

/// Writes `<id>.csv` per report and `summary.json` sorted by id.
pub fn write_reports(reports: &[RatioReport], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut sorted: Vec<&RatioReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for r in &sorted {
        std::fs::write(dir.join(format!("{}.csv", r.id)), r.to_csv())?;
    }
    let mut json = serde_json::to_string_pretty(&sorted)?;
    json.push('\n');
    std::fs::write(dir.join("summary.json"), json)?;
    Ok(())
}
