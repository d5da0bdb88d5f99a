//! Verification reports: one inequality or agreement check with all raw numbers.

use std::fmt::Write as _;

use serde::Serialize;

use crate::stats::{Estimate, Z99};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// pass ⟺ lhs ≤ rhs·(1 + slack)
    Inequality,
    /// pass ⟺ 99% intervals overlap or |lhs − rhs| ≤ slack·max(|lhs|, |rhs|)
    Agreement,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub id: String,
    pub comparison: Comparison,
    pub lhs: f64,
    pub lhs_error: f64,
    pub rhs: f64,
    pub rhs_error: f64,
    pub slack: f64,
    pub pass: bool,
    /// map, geometry, exponents and resolution that produced the numbers
    pub digest: String,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn inequality(id: impl Into<String>, lhs: f64, rhs: f64, slack: f64, digest: impl Into<String>) -> Self {
        VerificationReport {
            id: id.into(),
            comparison: Comparison::Inequality,
            lhs,
            lhs_error: 0.0,
            rhs,
            rhs_error: 0.0,
            slack,
            pass: lhs <= rhs * (1.0 + slack),
            digest: digest.into(),
            notes: Vec::new(),
        }
    }

    pub fn agreement(id: impl Into<String>, lhs: Estimate, rhs: Estimate, tol: f64, digest: impl Into<String>) -> Self {
        let scale = lhs.value.abs().max(rhs.value.abs());
        let gap = (lhs.value - rhs.value).abs();
        let pass = lhs.overlaps(&rhs, Z99) || gap <= tol * scale;
        VerificationReport {
            id: id.into(),
            comparison: Comparison::Agreement,
            lhs: lhs.value,
            lhs_error: lhs.std_error,
            rhs: rhs.value,
            rhs_error: rhs.std_error,
            slack: tol,
            pass,
            digest: digest.into(),
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// lhs / rhs, the quantity tracked under refinement.
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }

    /// Slack actually consumed: how far lhs exceeds rhs, relative to rhs.
    pub fn slack_used(&self) -> f64 {
        (self.lhs / self.rhs - 1.0).max(0.0)
    }

    pub const CSV_HEADER: &'static str = "id,comparison,lhs,lhs_error,rhs,rhs_error,slack,pass,digest,notes";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let kind = match self.comparison {
            Comparison::Inequality => "inequality",
            Comparison::Agreement => "agreement",
        };
        write!(
            s,
            "{},{},{:.12e},{:.6e},{:.12e},{:.6e},{},{},{},{}",
            csv_field(&self.id),
            kind,
            self.lhs,
            self.lhs_error,
            self.rhs,
            self.rhs_error,
            self.slack,
            self.pass,
            csv_field(&self.digest),
            csv_field(&self.notes.join("; ")),
        )
        .unwrap();
        s
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
