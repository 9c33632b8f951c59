//! Versioned report documents.
//!
//! The machine format is pretty-printed JSON whose field order follows the
//! struct declarations below, so identical runs give identical bytes. Wall
//! times are `null` unless timings were requested.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::obstruction::ExperimentReport;
use crate::paracontact::{Note, ValidationReport, Verdict, Witness};

pub const SCHEMA: &str = "paracontact-report/v1";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `sha256:<hex>` of the given bytes.
pub fn digest(bytes: &[u8]) -> String {
    let sum = Sha256::digest(bytes);
    let mut out = String::from("sha256:");
    for b in sum.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputRecord {
    /// Catalog name, file path or a description of the command arguments.
    pub source: String,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigRecord {
    pub seed: u64,
    pub tol: f64,
    pub probes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// `symbolic-pass`, `numeric-pass`, `fail` or `skipped`.
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Wall time of the check group that produced this record.
    pub timing_ms: Option<f64>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, verdict: &Verdict, timing_ms: Option<f64>) -> CheckRecord {
        let (label, witness, reason) = match verdict {
            Verdict::SymbolicPass => ("symbolic-pass", None, None),
            Verdict::NumericPass => ("numeric-pass", None, None),
            Verdict::Fail { witness } => ("fail", Some(witness.clone()), None),
            Verdict::Skipped { reason } => ("skipped", None, Some(reason.clone())),
        };
        CheckRecord { name: name.into(), verdict: label, witness, reason, timing_ms }
    }

    pub fn is_fail(&self) -> bool {
        self.verdict == "fail"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section {
    pub name: String,
    pub checks: Vec<CheckRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<Note>,
}

impl Section {
    pub fn from_report(name: impl Into<String>, report: &ValidationReport, timing_ms: Option<f64>) -> Section {
        Section {
            name: name.into(),
            checks: report.checks.iter().map(|c| CheckRecord::new(&c.name, &c.verdict, timing_ms)).collect(),
            notes: report.notes.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ListingEntry {
    pub name: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub checks: usize,
    pub failures: usize,
    pub skipped: usize,
    pub exit_code: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportDocument {
    pub schema: &'static str,
    pub artifact_version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub listing: Vec<ListingEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<Section>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentReport>,
    pub summary: Summary,
}

impl ReportDocument {
    pub fn new(command: impl Into<String>) -> ReportDocument {
        ReportDocument {
            schema: SCHEMA,
            artifact_version: ARTIFACT_VERSION,
            command: command.into(),
            input: None,
            config: None,
            listing: Vec::new(),
            sections: Vec::new(),
            experiment: None,
            summary: Summary { checks: 0, failures: 0, skipped: 0, exit_code: 0 },
        }
    }

    /// Recomputes the summary from the sections.
    pub fn finish(mut self) -> ReportDocument {
        let all = || self.sections.iter().flat_map(|s| s.checks.iter());
        let failures = all().filter(|c| c.is_fail()).count();
        self.summary = Summary {
            checks: all().count(),
            failures,
            skipped: all().filter(|c| c.verdict == "skipped").count(),
            exit_code: u8::from(failures > 0),
        };
        self
    }

    pub fn exit_code(&self) -> u8 {
        self.summary.exit_code
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// First record with this check name, searching sections in order.
    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.sections.iter().flat_map(|s| s.checks.iter()).find(|c| c.name == name)
    }

    pub fn to_machine(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report documents always serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.input {
            Some(i) => {
                let _ = writeln!(out, "{} {}", self.command, i.source);
                let _ = writeln!(out, "input {}", i.digest);
            }
            None => {
                let _ = writeln!(out, "{}", self.command);
            }
        }
        if let Some(c) = &self.config {
            let _ = writeln!(out, "seed {}, tol {:e}, probes {}", c.seed, c.tol, c.probes);
        }
        for e in &self.listing {
            let _ = writeln!(out, "{:<24} {}", e.name, e.description);
        }
        for s in &self.sections {
            let _ = writeln!(out, "\n[{}]", s.name);
            for c in &s.checks {
                let label = if c.is_fail() { "FAIL" } else { c.verdict };
                let _ = write!(out, "  {:<28} {label}", c.name);
                if let Some(w) = &c.witness {
                    let _ = write!(out, "  value {} at {}", w.value, point_text(&w.point));
                    if let Some(comp) = &w.component {
                        let _ = write!(out, " component {comp:?}");
                    }
                    if let Some(n) = &w.note {
                        let _ = write!(out, " ({n})");
                    }
                }
                if let Some(r) = &c.reason {
                    let _ = write!(out, "  ({r})");
                }
                if let Some(t) = c.timing_ms {
                    let _ = write!(out, "  {t:.1} ms");
                }
                out.push('\n');
            }
            for n in &s.notes {
                let _ = writeln!(out, "  note {}: {}", n.name, n.message);
            }
        }
        if let Some(x) = &self.experiment {
            let _ = writeln!(out, "\nbudget {}, sample seed {:#x}", x.budget, x.sample_seed);
            let _ = writeln!(out, "{:>4} {:>6} {:>14} {:>12} {:>10}", "dim", "seed", "best", "evaluations", "wall ms");
            for r in &x.rows {
                let wall = r.wall_ms.map_or("-".to_string(), |w| format!("{w:.0}"));
                let _ = writeln!(out, "{:>4} {:>6} {:>14.6e} {:>12} {:>10}", r.dim, r.seed, r.best_residual, r.evaluations, wall);
            }
            if let Some(c) = &x.calibration {
                let _ = writeln!(
                    out,
                    "calibration ({}): threshold {:.3e}, dim-3 floor {:.3e}, dim-5 floor {:.3e}, dim-5 above threshold: {}",
                    c.kind, c.threshold, c.dim3_floor, c.dim5_floor, c.dim5_above_threshold
                );
            }
            match &x.verdict {
                Some(v) => {
                    let _ = writeln!(out, "verdict: {}", v.label());
                }
                None => {
                    let _ = writeln!(out, "verdict: none (needs dimensions 3 and 5)");
                }
            }
        }
        if !self.sections.is_empty() {
            let status = if self.summary.failures > 0 { "FAIL" } else { "PASS" };
            let _ = writeln!(
                out,
                "\nstatus: {status} ({} checks, {} failures, {} skipped)",
                self.summary.checks, self.summary.failures, self.summary.skipped
            );
        }
        out
    }
}

fn point_text(p: &[(String, f64)]) -> String {
    let inner: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
    format!("({})", inner.join(", "))
}
