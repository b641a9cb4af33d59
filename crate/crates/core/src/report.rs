//! Machine-readable solve reports, one JSON document per solve.

use serde::{Deserialize, Serialize};

use crate::bounds::{relative_gap, UpperSource};
use crate::error::Result;
use crate::instance::Assignment;
use crate::solver::{SolveReport, SolverParams, Termination};

/// Column semantics follow the usual benchmark table: `problem`, `p`, `n0`,
/// `lbd`, `ubd`, `rel_gap`, `iter`, `time_sec`. Assignments are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub problem: String,
    pub p: usize,
    pub n0: usize,
    pub lbd: f64,
    pub ubd: f64,
    pub rel_gap: f64,
    pub iter: usize,
    pub time_sec: f64,
    pub assignment: Vec<usize>,
    pub upper_source: UpperSource,
    pub termination: Termination,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub params: SolverParams<f64>,
}

impl ReportDocument {
    /// `assignment` is given in the indexing of the instance the caller wants
    /// reported, which may differ from `report.assignment` after reduction.
    pub fn new(
        problem: &str,
        p: usize,
        n0: usize,
        report: &SolveReport<f64>,
        assignment: &Assignment,
        params: &SolverParams<f64>,
    ) -> Self {
        Self {
            problem: problem.to_string(),
            p,
            n0,
            lbd: report.lbd,
            ubd: report.ubd,
            rel_gap: relative_gap(report.ubd, report.lbd),
            iter: report.iterations,
            time_sec: report.time_sec,
            assignment: assignment.choice().iter().map(|c| c + 1).collect(),
            upper_source: report.upper_source,
            termination: report.termination,
            primal_residual: report.residuals.primal,
            dual_residual: report.residuals.dual,
            params: params.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
