//! Residual minimization over finitely parametrized structure families.
//!
//! A [`CandidateFamily`] maps a parameter vector to a quadruple
//! `(φ, ξ, η, g)` whose components are linear combinations of the basis
//! `{1, x_1, …, x_d, sinh(x_d), cosh(x_d)}`. [`residual`] measures how far
//! the quadruple is from a flat paracontact metric structure and
//! [`minimize`] searches for zeros with a restarted simplex method.

mod search;

use nalgebra::{DMatrix, DVector};
use num::{BigRational, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::paracontact::{ParacontactError, ParacontactStructure};
use crate::symexpr::{evaluate, EvalPoint, Expr};
use crate::tensorcalc::{metric_inverse, Chart, MetricField, TensorError, TensorField};

pub use search::{
    experiment, minimize, sample_points, Calibration, ExperimentReport, ExperimentRow, ExperimentVerdict,
    SearchResult, SAMPLE_SEED,
};

/// Parameters are clamped to `[-PARAM_BOUND, PARAM_BOUND]` before evaluation.
pub const PARAM_BOUND: f64 = 10.0;
/// Step of the central differences of Γ used for curvature.
pub const FD_STEP: f64 = 1e-4;
/// Threshold of the nondegeneracy barrier on `|det g|`.
pub const DET_EPSILON: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObstructionError {
    #[error("unsupported dimension {0} (expected 3 or 5)")]
    Dimension(usize),
    #[error("expected {expected} parameters, found {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("at least 4 sample points are required, found {0}")]
    TooFewPoints(usize),
    #[error("budget {0} is below the minimum of 100 evaluations")]
    Budget(usize),
    #[error("residual overflowed")]
    NumericOverflow,
    #[error("component {0} does not lie in the span of the basis")]
    NotInSpan(String),
    #[error(transparent)]
    Paracontact(#[from] ParacontactError),
}

/// Structure quadruples with coefficients in a fixed basis.
///
/// Parameter layout, each component taking `d + 3` consecutive
/// coefficients: `φ^i_j` row-major, then `ξ^i`, `η_i`, and the upper
/// triangle of `g` in row order.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateFamily {
    chart: Chart,
    shape: Shape,
}

/// Shape of [`CandidateFamily::new`]: flat metrics with constant coefficients.
/// The larger shapes are kept for direct residual evaluation; the simplex
/// search does not converge on them within practical budgets.
pub const SEARCH_SHAPE: Shape = Shape::Derived { constant_metric: true };

/// Which blocks carry parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Every component of `(φ, ξ, η, g)` over the full basis.
    Full,
    /// `η` and `g` only; `φ = g⁻¹dη` and `ξ = g⁻¹η` are derived.
    Derived { constant_metric: bool },
}

/// Components of a candidate and their first derivatives at one point.
struct Sample {
    phi: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<f64>,
    /// `d_eta[k * d + i] = ∂_k η_i`
    d_eta: Vec<f64>,
    g: Vec<f64>,
}

impl CandidateFamily {
    /// The family used by [`minimize`] and [`experiment`].
    pub fn new(dim: usize) -> Result<CandidateFamily, ObstructionError> {
        CandidateFamily::with_shape(dim, SEARCH_SHAPE)
    }

    pub fn with_shape(dim: usize, shape: Shape) -> Result<CandidateFamily, ObstructionError> {
        if dim != 3 && dim != 5 {
            return Err(ObstructionError::Dimension(dim));
        }
        let chart = Chart::new((1..=dim).map(|i| format!("x{i}"))).expect("distinct names");
        Ok(CandidateFamily { chart, shape })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Number of basis functions per component.
    pub fn basis_len(&self) -> usize {
        self.dim() + 3
    }

    fn metric_len(&self) -> usize {
        match self.shape {
            Shape::Derived { constant_metric: true } => 1,
            _ => self.basis_len(),
        }
    }

    pub fn param_count(&self) -> usize {
        let [.., og] = self.offsets();
        let d = self.dim();
        og + d * (d + 1) / 2 * self.metric_len()
    }

    /// The basis as expressions, in coefficient order.
    pub fn basis(&self) -> Vec<Expr> {
        let d = self.dim();
        let last = self.chart.var(d - 1);
        let mut b = vec![Expr::one()];
        b.extend((0..d).map(|i| self.chart.var(i)));
        b.push(Expr::sinh(last.clone()));
        b.push(Expr::cosh(last));
        b
    }

    /// Start of the φ, ξ, η and g blocks; derived blocks are empty.
    fn offsets(&self) -> [usize; 4] {
        let d = self.dim();
        let b = self.basis_len();
        match self.shape {
            Shape::Full => [0, d * d * b, (d * d + d) * b, (d * d + 2 * d) * b],
            Shape::Derived { .. } => [0, 0, 0, d * b],
        }
    }

    pub(crate) fn check_len(&self, params: &[f64]) -> Result<(), ObstructionError> {
        if params.len() != self.param_count() {
            return Err(ObstructionError::ParamCount { expected: self.param_count(), found: params.len() });
        }
        Ok(())
    }

    /// Component values and first derivatives at `x`; `params` already clamped.
    fn sample(&self, params: &[f64], x: &[f64], with_dg: Option<&mut Vec<f64>>) -> Sample {
        let d = self.dim();
        let nb = self.basis_len();
        let (sh, ch) = (x[d - 1].sinh(), x[d - 1].cosh());
        let value = |c: &[f64]| -> f64 {
            let mut v = c[0] + c[d + 1] * sh + c[d + 2] * ch;
            for i in 0..d {
                v += c[1 + i] * x[i];
            }
            v
        };
        let deriv = |c: &[f64], k: usize| -> f64 {
            let mut v = c[1 + k];
            if k == d - 1 {
                v += c[d + 1] * ch + c[d + 2] * sh;
            }
            v
        };
        let coeffs = |block: usize, idx: usize| &params[block + idx * nb..block + (idx + 1) * nb];
        let [op, ox, oe, og] = self.offsets();
        let ng = self.metric_len();
        let metric_coeffs = |idx: usize| &params[og + idx * ng..og + (idx + 1) * ng];
        let eta: Vec<f64> = (0..d).map(|i| value(coeffs(oe, i))).collect();
        let mut d_eta = vec![0.0; d * d];
        for k in 0..d {
            for i in 0..d {
                d_eta[k * d + i] = deriv(coeffs(oe, i), k);
            }
        }
        let mut g = vec![0.0; d * d];
        let mut t = 0;
        for i in 0..d {
            for j in i..d {
                let c = metric_coeffs(t);
                let v = if ng == 1 { c[0] } else { value(c) };
                g[i * d + j] = v;
                g[j * d + i] = v;
                t += 1;
            }
        }
        if let Some(dg) = with_dg {
            dg.resize(d * d * d, 0.0);
            let mut t = 0;
            for i in 0..d {
                for j in i..d {
                    for k in 0..d {
                        let c = metric_coeffs(t);
                        let v = if ng == 1 { 0.0 } else { deriv(c, k) };
                        dg[(k * d + i) * d + j] = v;
                        dg[(k * d + j) * d + i] = v;
                    }
                    t += 1;
                }
            }
        }
        let (phi, xi) = match self.shape {
            Shape::Full => (
                (0..d * d).map(|i| value(coeffs(op, i))).collect(),
                (0..d).map(|i| value(coeffs(ox, i))).collect(),
            ),
            Shape::Derived { .. } => match DMatrix::from_row_slice(d, d, &g).try_inverse() {
                Some(inv) => {
                    let mut phi = vec![0.0; d * d];
                    for k in 0..d {
                        for j in 0..d {
                            phi[k * d + j] =
                                (0..d).map(|i| inv[(k, i)] * 0.5 * (d_eta[i * d + j] - d_eta[j * d + i])).sum();
                        }
                    }
                    let xi = (0..d).map(|k| (0..d).map(|i| inv[(k, i)] * eta[i]).sum()).collect();
                    (phi, xi)
                }
                None => (vec![0.0; d * d], vec![0.0; d]),
            },
        };
        Sample { phi, xi, eta, d_eta, g }
    }

    /// `Γ^l_{ij}` at `x`, stored at `(l * d + i) * d + j`; `None` when g is singular.
    fn christoffel_at(&self, params: &[f64], x: &[f64], dg: &mut Vec<f64>) -> Option<Vec<f64>> {
        let d = self.dim();
        if self.metric_len() == 1 {
            // constant coefficients: Γ vanishes identically
            return Some(vec![0.0; d * d * d]);
        }
        let s = self.sample(params, x, Some(dg));
        let inv = DMatrix::from_row_slice(d, d, &s.g).try_inverse()?;
        let mut gamma = vec![0.0; d * d * d];
        let mut low = vec![0.0; d];
        for i in 0..d {
            for j in i..d {
                for (m, lm) in low.iter_mut().enumerate() {
                    *lm = 0.5 * (dg[(i * d + j) * d + m] + dg[(j * d + i) * d + m] - dg[(m * d + i) * d + j]);
                }
                for l in 0..d {
                    let v: f64 = (0..d).map(|m| inv[(l, m)] * low[m]).sum();
                    gamma[(l * d + i) * d + j] = v;
                    gamma[(l * d + j) * d + i] = v;
                }
            }
        }
        Some(gamma)
    }

    /// `Σ (R^l_{kij})²` at `x` with `∂Γ` by central differences. Zero when
    /// g is exactly singular, where only the barrier applies.
    fn curvature_norm_sq(&self, params: &[f64], x: &[f64]) -> f64 {
        let d = self.dim();
        let mut dg = Vec::new();
        let Some(gamma) = self.christoffel_at(params, x, &mut dg) else {
            return 0.0;
        };
        // dgamma[(i * d + l) * d * d + j * d + k] = ∂_i Γ^l_{jk}
        let mut dgamma = vec![0.0; d * d * d * d];
        let mut y = x.to_vec();
        for i in 0..d {
            y[i] = x[i] + FD_STEP;
            let plus = self.christoffel_at(params, &y, &mut dg);
            y[i] = x[i] - FD_STEP;
            let minus = self.christoffel_at(params, &y, &mut dg);
            y[i] = x[i];
            let (Some(plus), Some(minus)) = (plus, minus) else {
                return f64::INFINITY;
            };
            for (n, (p, m)) in plus.iter().zip(&minus).enumerate() {
                dgamma[i * d * d * d + n] = (p - m) / (2.0 * FD_STEP);
            }
        }
        let gam = |l: usize, i: usize, j: usize| gamma[(l * d + i) * d + j];
        let dgam = |i: usize, l: usize, j: usize, k: usize| dgamma[((i * d + l) * d + j) * d + k];
        let mut total = 0.0;
        for l in 0..d {
            for k in 0..d {
                for i in 0..d {
                    for j in (i + 1)..d {
                        let mut r = dgam(i, l, j, k) - dgam(j, l, i, k);
                        for m in 0..d {
                            r += gam(l, i, m) * gam(m, j, k) - gam(l, j, m) * gam(m, i, k);
                        }
                        // antisymmetric in (i, j)
                        total += 2.0 * r * r;
                    }
                }
            }
        }
        total
    }

    /// Residual contributions of one point, in [`TERMS`] order.
    fn point_terms(&self, params: &[f64], x: &[f64]) -> [f64; 8] {
        let d = self.dim();
        let s = self.sample(params, x, None);
        let at = |m: &[f64], i: usize, j: usize| m[i * d + j];
        let mut t = [0.0; 8];
        let raw: f64 = (0..d).map(|i| s.eta[i] * s.xi[i]).sum();
        t[2] = (raw - 1.0).powi(2);
        let xi: Vec<f64> = if raw.abs() > 1e-12 { s.xi.iter().map(|v| v / raw).collect() } else { s.xi.clone() };
        for i in 0..d {
            let v: f64 = (0..d).map(|j| at(&s.phi, i, j) * xi[j]).sum();
            t[0] += v * v;
        }
        for j in 0..d {
            let v: f64 = (0..d).map(|i| s.eta[i] * at(&s.phi, i, j)).sum();
            t[1] += v * v;
        }
        for i in 0..d {
            for j in 0..d {
                let sq: f64 = (0..d).map(|k| at(&s.phi, i, k) * at(&s.phi, k, j)).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                t[3] += (sq - id + xi[i] * s.eta[j]).powi(2);
            }
        }
        // f[i][j] = g(∂_i, φ∂_j) = F_ij
        let mut f = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                f[i * d + j] = (0..d).map(|k| at(&s.g, i, k) * at(&s.phi, k, j)).sum();
            }
        }
        for i in 0..d {
            for j in 0..d {
                let pgp: f64 = (0..d).map(|k| at(&s.phi, k, i) * f[k * d + j]).sum();
                t[4] += (pgp + at(&s.g, i, j) - s.eta[i] * s.eta[j]).powi(2);
                let deta = 0.5 * (s.d_eta[i * d + j] - s.d_eta[j * d + i]);
                t[5] += (f[i * d + j] - deta).powi(2);
            }
        }
        t[6] = self.curvature_norm_sq(params, x);
        let det = DMatrix::from_row_slice(d, d, &s.g).determinant();
        t[7] = (DET_EPSILON - det.abs()).max(0.0).powi(2);
        t
    }

    /// The quadruple at `params` as exact symbolic fields, with ξ normalized by η(ξ).
    pub fn structure(&self, params: &[f64]) -> Result<ParacontactStructure, ObstructionError> {
        self.check_len(params)?;
        let d = self.dim();
        let nb = self.basis_len();
        let basis = self.basis();
        let exact = |i: usize| {
            let c = params[i].clamp(-PARAM_BOUND, PARAM_BOUND);
            Expr::rational(BigRational::from_f64(c).expect("finite parameter"))
        };
        let comp = |start: usize| -> Expr {
            Expr::sum(basis.iter().enumerate().map(|(b, f)| exact(start + b) * f.clone())).canonical()
        };
        let [op, ox, oe, og] = self.offsets();
        let ng = self.metric_len();
        let c = &self.chart;
        let tensor = |r: Result<TensorField, TensorError>| r.map_err(ParacontactError::from);
        let eta = tensor(TensorField::covector(c, (0..d).map(|i| comp(oe + i * nb)).collect()))?;
        let g_entries = (0..d * (d + 1) / 2).map(|i| if ng == 1 { exact(og + i) } else { comp(og + i * ng) });
        let g = MetricField::from_upper_triangle(c, g_entries.collect()).map_err(ParacontactError::from)?;
        let normalized = |raw: TensorField| -> Result<TensorField, ObstructionError> {
            let norm = eta.pair(&raw).map_err(ParacontactError::from)?;
            Ok(TensorField::from_fn(c, 1, 0, |i| (raw.get(i).clone() / norm.clone()).canonical()))
        };
        match self.shape {
            Shape::Full => {
                let phi = tensor(TensorField::new(c, 1, 1, (0..d * d).map(|i| comp(op + i * nb)).collect()))?;
                let xi = normalized(tensor(TensorField::vector(c, (0..d).map(|i| comp(ox + i * nb)).collect()))?)?;
                Ok(ParacontactStructure::new(phi, xi, eta, g)?)
            }
            Shape::Derived { .. } => {
                let inv = tensor(metric_inverse(&g))?;
                let raw = TensorField::from_fn(c, 1, 0, |k| {
                    Expr::sum((0..d).map(|i| inv.get(&[k[0], i]) * eta.get(&[i]))).canonical()
                });
                let xi = normalized(raw)?;
                Ok(ParacontactStructure::with_derived_phi(xi, eta.clone(), g)?)
            }
        }
    }

    /// Coefficients of a structure whose components lie in the basis span.
    /// Coefficients within rounding error of a multiple of `2^-10` are snapped to it.
    pub fn encode(&self, s: &ParacontactStructure) -> Result<Vec<f64>, ObstructionError> {
        if s.chart() != &self.chart {
            return Err(ObstructionError::Paracontact(ParacontactError::ChartMismatch));
        }
        let d = self.dim();
        let nb = self.basis_len();
        let coords = self.chart.coords();
        let mut rng = ChaCha8Rng::seed_from_u64(0xba515);
        let pts: Vec<Vec<f64>> = (0..2 * nb).map(|_| (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
        let basis_at = |x: &[f64]| -> Vec<f64> {
            let mut v = vec![1.0];
            v.extend_from_slice(x);
            v.push(x[d - 1].sinh());
            v.push(x[d - 1].cosh());
            v
        };
        let a = DMatrix::from_fn(pts.len(), nb, |r, c| basis_at(&pts[r])[c]);
        let svd = a.clone().svd(true, true);
        let mut params = Vec::with_capacity(self.param_count());
        let fit = |e: &Expr, label: String| -> Result<Vec<f64>, ObstructionError> {
            let vals: Vec<f64> = pts
                .iter()
                .map(|x| {
                    evaluate(e, &EvalPoint::on(coords, x)).map_err(|_| ObstructionError::NotInSpan(label.clone()))
                })
                .collect::<Result<_, _>>()?;
            let rhs = DVector::from_vec(vals);
            let sol = svd.solve(&rhs, 1e-12).map_err(|_| ObstructionError::NotInSpan(label.clone()))?;
            let err = (&a * &sol - &rhs).amax();
            if err > 1e-9 * (1.0 + rhs.amax()) {
                return Err(ObstructionError::NotInSpan(label));
            }
            Ok(sol.iter().map(|v| snap(*v)).collect())
        };
        if self.shape == Shape::Full {
            for i in 0..d {
                for j in 0..d {
                    params.extend(fit(s.phi().get(&[i, j]), format!("phi[{i}][{j}]"))?);
                }
            }
            for i in 0..d {
                params.extend(fit(s.xi().get(&[i]), format!("xi[{i}]"))?);
            }
        }
        for i in 0..d {
            params.extend(fit(s.eta().get(&[i]), format!("eta[{i}]"))?);
        }
        let constant = self.metric_len() == 1;
        for i in 0..d {
            for j in i..d {
                let c = fit(s.metric().get(i, j), format!("g[{i}][{j}]"))?;
                if constant {
                    if c[1..].iter().any(|v| *v != 0.0) {
                        return Err(ObstructionError::NotInSpan(format!("g[{i}][{j}]")));
                    }
                    params.push(c[0]);
                } else {
                    params.extend(c);
                }
            }
        }
        Ok(params)
    }
}

/// Names of the residual terms.
pub const TERMS: [&str; 8] =
    ["phi-xi", "eta-phi", "eta-xi-one", "phi-squared", "metric-compat", "F-minus-d-eta", "riemann", "det-barrier"];

/// Each residual term summed over `points`, in [`TERMS`] order.
pub fn residual_terms(fam: &CandidateFamily, params: &[f64], points: &[Vec<f64>]) -> Result<[f64; 8], ObstructionError> {
    fam.check_len(params)?;
    check_points(points)?;
    let clamped: Vec<f64> = params.iter().map(|p| p.clamp(-PARAM_BOUND, PARAM_BOUND)).collect();
    let mut total = [0.0; 8];
    for x in points {
        for (t, v) in total.iter_mut().zip(fam.point_terms(&clamped, x)) {
            *t += v;
        }
    }
    Ok(total)
}

/// Sum over `points` of the squared violations of the almost paracontact
/// axioms, compatibility, `F = dη`, flatness and a nondegeneracy barrier.
pub fn residual(fam: &CandidateFamily, params: &[f64], points: &[Vec<f64>]) -> Result<f64, ObstructionError> {
    let total: f64 = residual_terms(fam, params, points)?.iter().sum();
    if total.is_finite() {
        Ok(total)
    } else {
        Err(ObstructionError::NumericOverflow)
    }
}

fn snap(v: f64) -> f64 {
    let r = (v * 1024.0).round() / 1024.0;
    if (r - v).abs() < 1e-12 {
        r
    } else {
        v
    }
}

pub(crate) fn check_points(points: &[Vec<f64>]) -> Result<(), ObstructionError> {
    if points.len() < 4 {
        return Err(ObstructionError::TooFewPoints(points.len()));
    }
    Ok(())
}
