use serde::Serialize;

use crate::symexpr::{ZeroVerdict, DEFAULT_PROBES, DEFAULT_TOL};
use crate::tensorcalc::{ComponentVerdict, TensorError, TensorField};

/// Probe settings shared by every numeric check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckConfig {
    pub seed: u64,
    pub tol: f64,
    pub probes: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { seed: 0, tol: DEFAULT_TOL, probes: DEFAULT_PROBES }
    }
}

/// Where and how a check failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<Vec<usize>>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Witness {
    pub fn at(point: Vec<(String, f64)>, value: f64) -> Witness {
        Witness { point, component: None, value, note: None }
    }

    pub fn with_component(mut self, component: Vec<usize>) -> Witness {
        self.component = Some(component);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Witness {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    SymbolicPass,
    NumericPass,
    Fail { witness: Witness },
    Skipped { reason: String },
}

impl Verdict {
    pub fn fail(witness: Witness) -> Verdict {
        Verdict::Fail { witness }
    }

    pub fn skipped(reason: impl Into<String>) -> Verdict {
        Verdict::Skipped { reason: reason.into() }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::SymbolicPass | Verdict::NumericPass)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail { .. })
    }

    fn severity(&self) -> u8 {
        match self {
            Verdict::SymbolicPass => 0,
            Verdict::NumericPass => 1,
            Verdict::Skipped { .. } => 2,
            Verdict::Fail { .. } => 3,
        }
    }

    /// Short label used in text reports.
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::SymbolicPass => "symbolic-pass",
            Verdict::NumericPass => "numeric-pass",
            Verdict::Fail { .. } => "FAIL",
            Verdict::Skipped { .. } => "skipped",
        }
    }

    pub fn from_zero(z: ZeroVerdict, component: Option<Vec<usize>>) -> Verdict {
        match z {
            ZeroVerdict::SymbolicZero => Verdict::SymbolicPass,
            ZeroVerdict::NumericZero { .. } => Verdict::NumericPass,
            ZeroVerdict::NonZero { point, value } => {
                let mut w = Witness::at(point, value);
                w.component = component;
                Verdict::fail(w)
            }
        }
    }

    pub fn from_components(c: ComponentVerdict) -> Verdict {
        Verdict::from_zero(c.verdict, c.component)
    }

    /// The less favourable verdict.
    pub fn worst(self, other: Verdict) -> Verdict {
        if other.severity() > self.severity() {
            other
        } else {
            self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
}

/// An informational observation that carries no verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Note {
    pub name: String,
    pub message: String,
}

/// Ordered sub-check results. Order is the declared check order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<Note>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, verdict: Verdict) {
        self.checks.push(Check { name: name.into(), verdict });
    }

    pub fn note(&mut self, name: impl Into<String>, message: impl Into<String>) {
        self.notes.push(Note { name: name.into(), message: message.into() });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
        self.notes.extend(other.notes);
    }

    pub fn get(&self, name: &str) -> Option<&Verdict> {
        self.checks.iter().find(|c| c.name == name).map(|c| &c.verdict)
    }

    /// Worst sub-verdict; an empty report counts as a symbolic pass.
    pub fn status(&self) -> Verdict {
        self.checks.iter().fold(Verdict::SymbolicPass, |acc, c| acc.worst(c.verdict.clone()))
    }

    pub fn passed(&self) -> bool {
        !self.checks.iter().any(|c| c.verdict.is_fail())
    }

    pub fn names(&self) -> Vec<&str> {
        self.checks.iter().map(|c| c.name.as_str()).collect()
    }
}

/// Zero test of a whole tensor, folded into a verdict. Evaluation errors
/// become failures with the error text as note.
pub(crate) fn zero_verdict(t: &TensorField, cfg: &CheckConfig) -> Verdict {
    match t.zero_test(cfg.probes, cfg.seed, cfg.tol) {
        Ok(c) => Verdict::from_components(c),
        Err(e) => error_verdict(&e),
    }
}

pub(crate) fn error_verdict(e: &dyn std::fmt::Display) -> Verdict {
    Verdict::fail(Witness::at(Vec::new(), f64::NAN).with_note(format!("evaluation error: {e}")))
}

pub(crate) fn tensor_verdict(r: Result<TensorField, TensorError>, cfg: &CheckConfig) -> Verdict {
    match r {
        Ok(t) => zero_verdict(&t, cfg),
        Err(e) => error_verdict(&e),
    }
}
