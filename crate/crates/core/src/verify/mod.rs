//! Experiment harness: evaluates both sides of the weighted, commutator and
//! modular inequalities over a seeded corpus and compares the ratios with
//! frozen budgets.
//!
//! A suite is a JSON [`ExperimentConfig`]. Each target yields a
//! [`RatioReport`]; [`run_suite`] writes one CSV per target plus a
//! `summary.json`, all sorted by target id.

mod checks;
mod config;
mod corpus;
mod report;

use std::path::Path;

use rayon::prelude::*;

pub use checks::{check_target, weak_endpoint_sup, Setup};
pub use config::{BSpec, CorpusSpec, ExperimentConfig, GridSpec, TargetConfig, TargetKind, WeightSpec};
pub use corpus::corpus;
pub use report::{ratio, write_reports, RatioReport, TrialRow};

use crate::error::{LabError, Result};

/// Result of a whole suite.
#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub reports: Vec<RatioReport>,
    pub pass: bool,
}

/// Runs every target (concurrently) and returns reports sorted by id.
/// Targets failing their hypothesis checks become rejected reports.
pub fn run_config(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let mut reports: Vec<RatioReport> = cfg
        .targets
        .par_iter()
        .map(|t| match check_target(cfg, t) {
            Ok(r) => Ok(r),
            Err(e @ (LabError::Hypothesis(_) | LabError::ArityMismatch { .. } | LabError::Unsupported(_))) => Ok(
                RatioReport::rejected(&t.id, t.target, e.to_string(), cfg.budgets.get(&t.id).copied()),
            ),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    reports.sort_by(|a, b| a.id.cmp(&b.id));
    let pass = reports.iter().all(|r| r.pass);
    Ok(SuiteOutcome { reports, pass })
}

/// Loads a config file, runs it and writes the reports into `out`.
pub fn run_suite(config_path: &Path, out: &Path) -> Result<SuiteOutcome> {
    let text = std::fs::read_to_string(config_path)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let outcome = run_config(&cfg)?;
    write_reports(&outcome.reports, out)?;
    Ok(outcome)
}
