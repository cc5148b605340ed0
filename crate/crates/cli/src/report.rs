use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use surface_forge_core::quatgeo::Lattice;

use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    /// The value must reach `tol` from above instead of staying below it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub lower_bound: bool,
    pub pass: bool,
}

/// Residuals of one computation. Runtimes are logged to stderr and kept
/// out of the report so that reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub kind: String,
    pub grid: Lattice,
    pub residuals: Vec<Residual>,
    pub info: BTreeMap<String, f64>,
    pub passed: bool,
}

impl ResidualReport {
    pub fn new(kind: &str, grid: Lattice) -> Self {
        Self { kind: kind.into(), grid, residuals: Vec::new(), info: BTreeMap::new(), passed: true }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Fills a report, resolving tolerances from the scenario.
pub struct ReportBuilder {
    tol: Option<f64>,
    tolerances: BTreeMap<String, f64>,
    pub report: ResidualReport,
}

impl ReportBuilder {
    pub fn new(kind: &str, grid: Lattice, tol: Option<f64>, tolerances: BTreeMap<String, f64>) -> Self {
        Self { tol, tolerances, report: ResidualReport::new(kind, grid) }
    }

    pub fn for_scenario(s: &Scenario, grid: Lattice) -> Self {
        Self::new(s.kind.name(), grid, s.tol, s.tolerances.clone())
    }

    pub fn max(&mut self, name: &str, value: f64, default_tol: f64) {
        let tol = self.tolerances.get(name).copied().or(self.tol).unwrap_or(default_tol);
        self.push(name, value, tol, false);
    }

    /// A quantity that must stay above `default_tol`; `--tol` does not apply.
    pub fn min(&mut self, name: &str, value: f64, default_tol: f64) {
        let tol = self.tolerances.get(name).copied().unwrap_or(default_tol);
        self.push(name, value, tol, true);
    }

    fn push(&mut self, name: &str, value: f64, tol: f64, lower_bound: bool) {
        let pass = value.is_finite() && value >= 0.0 && if lower_bound { value >= tol } else { value <= tol };
        self.report.passed &= pass;
        self.report.residuals.push(Residual { name: name.into(), value, tol, lower_bound, pass });
    }

    pub fn info(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.report.info.insert(name.into(), value);
        }
    }

    pub fn finish(self) -> ResidualReport {
        self.report
    }
}
