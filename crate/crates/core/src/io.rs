//! Plain-text structure files.
//!
//! ```text
//! # comment
//! dim 3
//! coords x1 x2 x3
//! eta = 1/2*cosh(x3), 1/2*sinh(x3), 0
//! xi  = 2*cosh(x3), -2*sinh(x3), 0
//! phi = ...            # optional, dim*dim entries, row-major
//! g   = 1/4, 0, 0, -1/4, 0, 1/4   # upper triangle, row order
//! ```
//!
//! Each key appears once, on one line. When `phi` is absent it is derived
//! from `g(X, φY) = dη(X, Y)`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::paracontact::{ParacontactError, ParacontactStructure};
use crate::symexpr::{parse_in_chart, Expr};
use crate::tensorcalc::{Chart, MetricField, TensorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Structure(#[from] ParacontactError),
}

fn syntax(line: usize, message: impl Into<String>) -> StructureFileError {
    StructureFileError::Syntax { line, message: message.into() }
}

/// Parsed contents of a structure file, before the structure is assembled.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureFile {
    pub chart: Chart,
    pub eta: Vec<Expr>,
    pub xi: Vec<Expr>,
    pub phi: Option<Vec<Expr>>,
    pub g: Vec<Expr>,
}

/// Splits on commas that are not inside parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl StructureFile {
    pub fn parse(text: &str) -> Result<StructureFile, StructureFileError> {
        let mut dim: Option<(usize, usize)> = None;
        let mut chart: Option<Chart> = None;
        let mut lists: [Option<(usize, &str)>; 4] = [None; 4];
        const KEYS: [&str; 4] = ["eta", "xi", "phi", "g"];

        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, rest)) = line.split_once('=') {
                let key = key.trim();
                let Some(slot) = KEYS.iter().position(|k| *k == key) else {
                    return Err(syntax(line_no, format!("unknown key `{key}`")));
                };
                if lists[slot].is_some() {
                    return Err(syntax(line_no, format!("duplicate `{key}`")));
                }
                lists[slot] = Some((line_no, rest));
                continue;
            }
            let mut words = line.split_whitespace();
            match words.next() {
                Some("dim") => {
                    if dim.is_some() {
                        return Err(syntax(line_no, "duplicate `dim`"));
                    }
                    let value = words.next().ok_or_else(|| syntax(line_no, "`dim` needs a value"))?;
                    let k: usize = value.parse().map_err(|_| syntax(line_no, format!("bad dimension `{value}`")))?;
                    if k == 0 || words.next().is_some() {
                        return Err(syntax(line_no, "`dim` takes one positive integer"));
                    }
                    dim = Some((line_no, k));
                }
                Some("coords") => {
                    if chart.is_some() {
                        return Err(syntax(line_no, "duplicate `coords`"));
                    }
                    let names: Vec<&str> = words.collect();
                    let c = Chart::new(names).map_err(|e| syntax(line_no, e.to_string()))?;
                    chart = Some(c);
                }
                Some(w) => return Err(syntax(line_no, format!("unrecognized line starting with `{w}`"))),
                None => unreachable!("blank lines are skipped"),
            }
        }

        let (dim_line, k) = dim.ok_or(StructureFileError::Missing("dim"))?;
        let chart = chart.ok_or(StructureFileError::Missing("coords"))?;
        if chart.dim() != k {
            return Err(syntax(dim_line, format!("dim {k} but {} coordinates", chart.dim())));
        }
        let read = |slot: usize, count: usize| -> Result<Option<Vec<Expr>>, StructureFileError> {
            let Some((line_no, rest)) = lists[slot] else { return Ok(None) };
            let parts = split_top(rest);
            if parts.len() != count {
                return Err(syntax(line_no, format!("`{}` needs {count} entries, found {}", KEYS[slot], parts.len())));
            }
            parts
                .iter()
                .map(|p| parse_in_chart(p.trim(), chart.coords()).map_err(|e| syntax(line_no, format!("`{}`: {e}", KEYS[slot]))))
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
        };
        let eta = read(0, k)?.ok_or(StructureFileError::Missing("eta"))?;
        let xi = read(1, k)?.ok_or(StructureFileError::Missing("xi"))?;
        let phi = read(2, k * k)?;
        let g = read(3, k * (k + 1) / 2)?.ok_or(StructureFileError::Missing("g"))?;
        Ok(StructureFile { chart, eta, xi, phi, g })
    }

    /// Assembles the structure, deriving `φ` when the file omits it.
    pub fn structure(&self) -> Result<ParacontactStructure, StructureFileError> {
        let c = &self.chart;
        let eta = TensorField::covector(c, self.eta.clone()).map_err(ParacontactError::from)?;
        let xi = TensorField::vector(c, self.xi.clone()).map_err(ParacontactError::from)?;
        let g = MetricField::from_upper_triangle(c, self.g.clone()).map_err(ParacontactError::from)?;
        let s = match &self.phi {
            Some(phi) => {
                let phi = TensorField::new(c, 1, 1, phi.clone()).map_err(ParacontactError::from)?;
                ParacontactStructure::new(phi, xi, eta, g)?
            }
            None => ParacontactStructure::with_derived_phi(xi, eta, g)?,
        };
        Ok(s)
    }

    /// Full description of `s`, including `φ`.
    pub fn from_structure(s: &ParacontactStructure) -> StructureFile {
        StructureFile {
            chart: s.chart().clone(),
            eta: s.eta().components().to_vec(),
            xi: s.xi().components().to_vec(),
            phi: Some(s.phi().components().to_vec()),
            g: s.metric().upper_triangle().to_vec(),
        }
    }

    /// Canonical text form; `header` lines are written as comments.
    pub fn render(&self, header: &[&str]) -> String {
        let join = |v: &[Expr]| v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        let _ = writeln!(out, "dim {}", self.chart.dim());
        let _ = writeln!(out, "coords {}", self.chart.coords().join(" "));
        let _ = writeln!(out, "eta = {}", join(&self.eta));
        let _ = writeln!(out, "xi = {}", join(&self.xi));
        if let Some(phi) = &self.phi {
            let _ = writeln!(out, "phi = {}", join(phi));
        }
        let _ = writeln!(out, "g = {}", join(&self.g));
        out
    }
}

pub fn load_structure(text: &str) -> Result<ParacontactStructure, StructureFileError> {
    StructureFile::parse(text)?.structure()
}

pub fn export_structure(s: &ParacontactStructure, header: &[&str]) -> String {
    StructureFile::from_structure(s).render(header)
}
