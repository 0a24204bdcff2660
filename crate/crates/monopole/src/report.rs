//! Pass/fail records shared by validation, selftest and the CLI.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `residual < tol`; non-finite residuals fail.
    pub fn below(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check { check: name.into(), residual, tol, pass: residual.is_finite() && residual < tol }
    }

    /// Passes when `residual > tol` (used for "bounded away from zero").
    pub fn above(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check { check: name.into(), residual, tol, pass: residual.is_finite() && residual > tol }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}
