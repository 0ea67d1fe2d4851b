use std::io::Write;

use serde::Serialize;

use crate::align::Model;
use crate::distributions::Dataset;
use crate::error::Result;
use crate::theory::{
    audit_bound, min_admissible_beta, prop1_lower_bound, prop2_build_and_check, AuditParams, BoundAudit, Prop2Report,
};

/// Label proportions `0.1, 0.2, ..., 0.9`.
pub fn rho_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Samples per domain for auditing the zero-error construction.
const PROP2_AUDIT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Row {
    pub rho_s: f64,
    pub rho_t: f64,
    pub lower_bound: f64,
    pub min_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub prop1: Vec<Prop1Row>,
    pub prop2: Vec<Prop2Report>,
    /// audit of the construction at `rho_s = 0.5, rho_t = 0.9`
    pub construction_audit: BoundAudit,
    pub checkpoint_audit: Option<BoundAudit>,
    /// every construction passed its exactness and sampling checks
    pub analytic_passed: bool,
}

fn audit_line(audit: &BoundAudit) -> String {
    let bound = audit.bound_value.map_or_else(|| "n/a".to_string(), |b| format!("{b:.4}"));
    format!(
        "bound {bound} vs measured {:.4} (slack {:.4}, beta {}, L {:.3}, margin {:.4}, delta1 {:.4}, delta2 {:.4}, delta3 {:.4}): {:?}",
        audit.measured_target_error,
        audit.estimation_slack,
        audit.beta,
        audit.lipschitz,
        audit.margin,
        audit.delta1,
        audit.delta2,
        audit.delta3,
        audit.status
    )
}

impl TheoryReport {
    pub fn print(&self, out: &mut dyn Write) -> Result<()> {
        let worst = self.prop1.iter().map(|r| r.lower_bound).fold(0.0, f64::max);
        writeln!(out, "exact alignment: {} grid points, largest target-error lower bound {worst:.1}", self.prop1.len())?;
        if let Some(r) = self.prop1.iter().find(|r| r.rho_s == 0.5 && r.rho_t == 0.9) {
            writeln!(out, "  rho_s 0.5, rho_t 0.9: lower bound {:.2}, min beta {:.2}", r.lower_bound, r.min_beta)?;
        }
        let passed = self.prop2.iter().filter(|r| r.passed).count();
        writeln!(out, "relaxed construction: {passed}/{} grid points passed", self.prop2.len())?;
        for r in self.prop2.iter().filter(|r| !r.passed) {
            writeln!(out, "  FAILED rho_s {} rho_t {}: {r:?}", r.rho_s, r.rho_t)?;
        }
        writeln!(out, "construction audit: {}", audit_line(&self.construction_audit))?;
        if let Some(a) = &self.checkpoint_audit {
            writeln!(out, "checkpoint audit: {}", audit_line(a))?;
        }
        writeln!(out, "analytic checks {}", if self.analytic_passed { "passed" } else { "FAILED" })?;
        Ok(())
    }
}

/// Runs the proportion grids and, given a trained model with data, its audit.
pub fn run_theory(checkpoint: Option<(&Model, &Dataset)>) -> Result<TheoryReport> {
    let grid = rho_grid();
    let mut prop1 = Vec::new();
    let mut prop2 = Vec::new();
    for &rho_s in &grid {
        for &rho_t in &grid {
            prop1.push(Prop1Row {
                rho_s,
                rho_t,
                lower_bound: prop1_lower_bound(rho_s, rho_t)?,
                min_beta: min_admissible_beta(rho_s, rho_t)?,
            });
            prop2.push(prop2_build_and_check(rho_s, rho_t)?.1);
        }
    }
    let (construction, _) = prop2_build_and_check(0.5, 0.9)?;
    let params = AuditParams::default();
    let construction_audit = audit_bound(&construction, &construction.dataset(PROP2_AUDIT_SAMPLES)?, &params)?;
    let checkpoint_audit = checkpoint.map(|(m, d)| audit_bound(m, d, &params)).transpose()?;
    let analytic_passed = prop2.iter().all(|r| r.passed);
    Ok(TheoryReport { prop1, prop2, construction_audit, checkpoint_audit, analytic_passed })
}
