//! Charts, tensor fields with symbolic components, index algebra, metric
//! inverse and signature.
//!
//! Components are stored densely in row-major order with the upper indices
//! first, so a `(1,2)` field `T^i_{jk}` lives at offset `(i*n + j)*n + k`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::symexpr::{evaluate, zero_test, EvalPoint, Expr, ExprError, ZeroVerdict};


#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("chart coordinates must be distinct and non-empty")]
    InvalidChart,
    #[error("slot {slot} out of range for valence ({upper},{lower})")]
    SlotOutOfRange { slot: usize, upper: usize, lower: usize },
    #[error("slot {0} has the wrong variance for this operation")]
    VarianceMismatch(usize),
    #[error("tensor shapes differ")]
    ShapeMismatch,
    #[error("operands live on different charts")]
    ChartMismatch,
    #[error("metric determinant is identically zero")]
    DegenerateMetric,
    #[error("metric is numerically degenerate at {0:?}")]
    NumericallyDegenerate(Vec<(String, f64)>),
    #[error("metric is not symmetric at component ({0},{1})")]
    AsymmetricMetric(usize, usize),
    #[error("expected {expected} components, found {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A coordinate chart: an ordered list of distinct coordinate names.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chart {
    coords: Arc<[String]>,
}

impl Chart {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Chart, TensorError> {
        let coords: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = std::collections::HashSet::new();
        if coords.is_empty() || !coords.iter().all(|c| !c.is_empty() && seen.insert(c.clone())) {
            return Err(TensorError::InvalidChart);
        }
        Ok(Chart { coords: coords.into() })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &str {
        &self.coords[i]
    }

    pub fn var(&self, i: usize) -> Expr {
        Expr::var(&self.coords[i])
    }

    pub fn point(&self, values: &[f64]) -> EvalPoint {
        EvalPoint::on(&self.coords, values)
    }

    pub fn origin(&self) -> EvalPoint {
        self.point(&vec![0.0; self.dim()])
    }
}

/// Zero verdict together with the component that produced a failure.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentVerdict {
    pub verdict: ZeroVerdict,
    pub component: Option<Vec<usize>>,
}

/// An `(r,s)` tensor field on a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    chart: Chart,
    upper: usize,
    lower: usize,
    comps: Vec<Expr>,
}

fn unflatten(mut flat: usize, n: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in (0..rank).rev() {
        idx[slot] = flat % n;
        flat /= n;
    }
    idx
}

impl TensorField {
    /// Builds a field from raw components; each one is canonicalized.
    pub fn new(chart: &Chart, upper: usize, lower: usize, comps: Vec<Expr>) -> Result<TensorField, TensorError> {
        let expected = chart.dim().pow((upper + lower) as u32);
        if comps.len() != expected {
            return Err(TensorError::ComponentCount { expected, found: comps.len() });
        }
        let comps = comps.par_iter().map(Expr::canonical).collect();
        Ok(TensorField { chart: chart.clone(), upper, lower, comps })
    }

    /// Builds a field whose component at multi-index `idx` is `f(idx)`,
    /// canonicalized. Components are computed in parallel.
    pub fn from_fn<F>(chart: &Chart, upper: usize, lower: usize, f: F) -> TensorField
    where
        F: Fn(&[usize]) -> Expr + Sync,
    {
        let n = chart.dim();
        let rank = upper + lower;
        let count = n.pow(rank as u32);
        let comps = (0..count)
            .into_par_iter()
            .map(|flat| f(&unflatten(flat, n, rank)).canonical())
            .collect();
        TensorField { chart: chart.clone(), upper, lower, comps }
    }

    pub fn scalar(chart: &Chart, value: Expr) -> TensorField {
        TensorField { chart: chart.clone(), upper: 0, lower: 0, comps: vec![value.canonical()] }
    }

    pub fn vector(chart: &Chart, comps: Vec<Expr>) -> Result<TensorField, TensorError> {
        TensorField::new(chart, 1, 0, comps)
    }

    pub fn covector(chart: &Chart, comps: Vec<Expr>) -> Result<TensorField, TensorError> {
        TensorField::new(chart, 0, 1, comps)
    }

    /// The coordinate vector field `∂_i`.
    pub fn coordinate_field(chart: &Chart, i: usize) -> TensorField {
        TensorField::from_fn(chart, 1, 0, |idx| if idx[0] == i { Expr::one() } else { Expr::zero() })
    }

    /// The identity endomorphism `δ^i_j`.
    pub fn identity(chart: &Chart) -> TensorField {
        TensorField::from_fn(chart, 1, 1, |idx| if idx[0] == idx[1] { Expr::one() } else { Expr::zero() })
    }

    pub fn zero(chart: &Chart, upper: usize, lower: usize) -> TensorField {
        TensorField::from_fn(chart, upper, lower, |_| Expr::zero())
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `(upper, lower)`.
    pub fn valence(&self) -> (usize, usize) {
        (self.upper, self.lower)
    }

    pub fn rank(&self) -> usize {
        self.upper + self.lower
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let n = self.dim();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.comps[self.offset(idx)]
    }

    /// Iterates `(multi-index, component)` in storage order.
    pub fn indexed(&self) -> impl Iterator<Item = (Vec<usize>, &Expr)> {
        let (n, rank) = (self.dim(), self.rank());
        self.comps.iter().enumerate().map(move |(k, e)| (unflatten(k, n, rank), e))
    }

    pub fn as_scalar(&self) -> Option<&Expr> {
        (self.rank() == 0).then(|| &self.comps[0])
    }

    fn same_shape(&self, other: &TensorField) -> Result<(), TensorError> {
        if self.chart != other.chart {
            return Err(TensorError::ChartMismatch);
        }
        if self.valence() != other.valence() {
            return Err(TensorError::ShapeMismatch);
        }
        Ok(())
    }

    fn zip_with(&self, other: &TensorField, f: impl Fn(&Expr, &Expr) -> Expr + Sync) -> Result<TensorField, TensorError> {
        self.same_shape(other)?;
        let comps = self
            .comps
            .par_iter()
            .zip(other.comps.par_iter())
            .map(|(a, b)| f(a, b).canonical())
            .collect();
        Ok(TensorField { chart: self.chart.clone(), upper: self.upper, lower: self.lower, comps })
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField, TensorError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField, TensorError> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Multiplies every component by the scalar function `s`.
    pub fn scale(&self, s: &Expr) -> TensorField {
        let comps = self.comps.par_iter().map(|c| (c * s).canonical()).collect();
        TensorField { chart: self.chart.clone(), upper: self.upper, lower: self.lower, comps }
    }

    /// Tensor product: upper indices of `self` then `other`, likewise lower.
    pub fn tensor(&self, other: &TensorField) -> Result<TensorField, TensorError> {
        if self.chart != other.chart {
            return Err(TensorError::ChartMismatch);
        }
        let (ru, rl, su) = (self.upper, self.lower, other.upper);
        Ok(TensorField::from_fn(&self.chart, ru + su, rl + other.lower, |idx| {
            let mut a = idx[..ru].to_vec();
            a.extend_from_slice(&idx[ru + su..ru + su + rl]);
            let mut b = idx[ru..ru + su].to_vec();
            b.extend_from_slice(&idx[ru + su + rl..]);
            self.get(&a) * other.get(&b)
        }))
    }

    /// Applies a `(1,1)` field to a vector field: `(A v)^i = A^i_j v^j`.
    pub fn apply(&self, v: &TensorField) -> Result<TensorField, TensorError> {
        if self.valence() != (1, 1) || v.valence() != (1, 0) {
            return Err(TensorError::ShapeMismatch);
        }
        if self.chart != v.chart {
            return Err(TensorError::ChartMismatch);
        }
        let n = self.dim();
        Ok(TensorField::from_fn(&self.chart, 1, 0, |idx| {
            Expr::sum((0..n).map(|j| self.get(&[idx[0], j]) * v.get(&[j])))
        }))
    }

    /// Composition of `(1,1)` fields: `(A∘B)^i_j = A^i_k B^k_j`.
    pub fn compose(&self, other: &TensorField) -> Result<TensorField, TensorError> {
        if self.valence() != (1, 1) || other.valence() != (1, 1) {
            return Err(TensorError::ShapeMismatch);
        }
        if self.chart != other.chart {
            return Err(TensorError::ChartMismatch);
        }
        let n = self.dim();
        Ok(TensorField::from_fn(&self.chart, 1, 1, |idx| {
            Expr::sum((0..n).map(|k| self.get(&[idx[0], k]) * other.get(&[k, idx[1]])))
        }))
    }

    /// Pairing `ω(v)` of a 1-form with a vector field, canonicalized.
    pub fn pair(&self, v: &TensorField) -> Result<Expr, TensorError> {
        if self.valence() != (0, 1) || v.valence() != (1, 0) {
            return Err(TensorError::ShapeMismatch);
        }
        if self.chart != v.chart {
            return Err(TensorError::ChartMismatch);
        }
        Ok(Expr::sum((0..self.dim()).map(|i| self.get(&[i]) * v.get(&[i]))).canonical())
    }

    /// Inserts vector fields into every lower slot of a `(k,s)` field with
    /// `k <= 1`, giving a scalar (`k = 0`) or a vector field (`k = 1`).
    pub fn feed(&self, vectors: &[&TensorField]) -> Result<TensorField, TensorError> {
        if vectors.len() != self.lower || self.upper > 1 {
            return Err(TensorError::ShapeMismatch);
        }
        for v in vectors {
            if v.valence() != (1, 0) {
                return Err(TensorError::ShapeMismatch);
            }
            if v.chart != self.chart {
                return Err(TensorError::ChartMismatch);
            }
        }
        let n = self.dim();
        let s = self.lower;
        let combos = n.pow(s as u32);
        Ok(TensorField::from_fn(&self.chart, self.upper, 0, |head| {
            Expr::sum((0..combos).map(|flat| {
                let low = unflatten(flat, n, s);
                let mut factors: Vec<Expr> = Vec::with_capacity(s + 1);
                for (slot, &i) in low.iter().enumerate() {
                    let c = vectors[slot].get(&[i]);
                    if c.is_zero() {
                        return Expr::zero();
                    }
                    factors.push(c.clone());
                }
                let mut idx = head.to_vec();
                idx.extend_from_slice(&low);
                factors.push(self.get(&idx).clone());
                Expr::product(factors)
            }))
        }))
    }

    /// Evaluates every component at `p`.
    pub fn evaluate(&self, p: &EvalPoint) -> Result<Vec<f64>, TensorError> {
        self.comps.iter().map(|c| evaluate(c, p).map_err(TensorError::from)).collect()
    }

    /// Worst zero verdict over all components, with the failing component.
    pub fn zero_test(&self, probes: usize, seed: u64, tol: f64) -> Result<ComponentVerdict, TensorError> {
        let verdicts: Vec<Result<ZeroVerdict, ExprError>> =
            self.comps.par_iter().map(|c| zero_test(c, probes, seed, tol)).collect();
        let mut worst = ComponentVerdict { verdict: ZeroVerdict::SymbolicZero, component: None };
        for (k, v) in verdicts.into_iter().enumerate() {
            let v = v?;
            if matches!(v, ZeroVerdict::NonZero { .. }) {
                if worst.component.is_none() {
                    worst = ComponentVerdict {
                        verdict: v,
                        component: Some(unflatten(k, self.dim(), self.rank())),
                    };
                }
            } else if worst.component.is_none() {
                worst.verdict = worst.verdict.worst(v);
            }
        }
        Ok(worst)
    }

    pub fn is_symbolically_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }
}

/// Compares two fields componentwise; verdict ordering is
/// NonZero > NumericZero > SymbolicZero.
pub fn tensor_equal(a: &TensorField, b: &TensorField, probes: usize, seed: u64, tol: f64) -> Result<ZeroVerdict, TensorError> {
    Ok(tensor_difference(a, b, probes, seed, tol)?.verdict)
}

/// Like [`tensor_equal`] but also reports the offending component.
pub fn tensor_difference(a: &TensorField, b: &TensorField, probes: usize, seed: u64, tol: f64) -> Result<ComponentVerdict, TensorError> {
    a.sub(b)?.zero_test(probes, seed, tol)
}

fn check_slot(t: &TensorField, slot: usize) -> Result<(), TensorError> {
    if slot >= t.rank() {
        return Err(TensorError::SlotOutOfRange { slot, upper: t.upper, lower: t.lower });
    }
    Ok(())
}

/// Traces an upper slot against a lower slot (global slot numbers, upper
/// slots first).
pub fn contract(t: &TensorField, upper_slot: usize, lower_slot: usize) -> Result<TensorField, TensorError> {
    check_slot(t, upper_slot)?;
    check_slot(t, lower_slot)?;
    if upper_slot >= t.upper {
        return Err(TensorError::VarianceMismatch(upper_slot));
    }
    if lower_slot < t.upper {
        return Err(TensorError::VarianceMismatch(lower_slot));
    }
    let n = t.dim();
    Ok(TensorField::from_fn(&t.chart, t.upper - 1, t.lower - 1, |idx| {
        Expr::sum((0..n).map(|k| {
            let mut full = idx.to_vec();
            // upper_slot < lower_slot, so inserting in this order lands both.
            full.insert(upper_slot, k);
            full.insert(lower_slot, k);
            t.get(&full).clone()
        }))
    }))
}

/// Lowers the upper slot `slot` with `g`; the new index becomes the first
/// lower index.
pub fn lower_index(t: &TensorField, slot: usize, g: &MetricField) -> Result<TensorField, TensorError> {
    check_slot(t, slot)?;
    if slot >= t.upper {
        return Err(TensorError::VarianceMismatch(slot));
    }
    if t.chart != g.chart {
        return Err(TensorError::ChartMismatch);
    }
    let n = t.dim();
    let new_upper = t.upper - 1;
    Ok(TensorField::from_fn(&t.chart, new_upper, t.lower + 1, |idx| {
        let a = idx[new_upper];
        Expr::sum((0..n).map(|k| {
            let mut full: Vec<usize> = idx[..new_upper].to_vec();
            full.insert(slot, k);
            full.extend_from_slice(&idx[new_upper + 1..]);
            g.get(a, k) * t.get(&full)
        }))
    }))
}

/// Raises the lower slot `slot` with the inverse metric; the new index
/// becomes the last upper index.
pub fn raise_index(t: &TensorField, slot: usize, g_inv: &TensorField) -> Result<TensorField, TensorError> {
    check_slot(t, slot)?;
    if slot < t.upper {
        return Err(TensorError::VarianceMismatch(slot));
    }
    if g_inv.valence() != (2, 0) {
        return Err(TensorError::ShapeMismatch);
    }
    if t.chart != g_inv.chart {
        return Err(TensorError::ChartMismatch);
    }
    let n = t.dim();
    let new_upper = t.upper + 1;
    Ok(TensorField::from_fn(&t.chart, new_upper, t.lower - 1, |idx| {
        let a = idx[new_upper - 1];
        Expr::sum((0..n).map(|k| {
            let mut full: Vec<usize> = idx[..new_upper - 1].to_vec();
            full.extend_from_slice(&idx[new_upper..]);
            full.insert(slot, k);
            g_inv.get(&[a, k]) * t.get(&full)
        }))
    }))
}

/// Symmetric `(0,2)` field stored as its upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    chart: Chart,
    upper_tri: Vec<Expr>,
}

fn tri_offset(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl MetricField {
    /// Builds from the upper triangle in row order (`g11, g12, ..., g1n, g22, ...`).
    pub fn from_upper_triangle(chart: &Chart, entries: Vec<Expr>) -> Result<MetricField, TensorError> {
        let n = chart.dim();
        let expected = n * (n + 1) / 2;
        if entries.len() != expected {
            return Err(TensorError::ComponentCount { expected, found: entries.len() });
        }
        let upper_tri = entries.par_iter().map(Expr::canonical).collect();
        Ok(MetricField { chart: chart.clone(), upper_tri })
    }

    pub fn from_fn<F>(chart: &Chart, f: F) -> MetricField
    where
        F: Fn(usize, usize) -> Expr + Sync,
    {
        let n = chart.dim();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let upper_tri = pairs.par_iter().map(|&(i, j)| f(i, j).canonical()).collect();
        MetricField { chart: chart.clone(), upper_tri }
    }

    pub fn diagonal(chart: &Chart, diag: Vec<Expr>) -> Result<MetricField, TensorError> {
        if diag.len() != chart.dim() {
            return Err(TensorError::ComponentCount { expected: chart.dim(), found: diag.len() });
        }
        Ok(MetricField::from_fn(chart, |i, j| if i == j { diag[i].clone() } else { Expr::zero() }))
    }

    /// Converts a `(0,2)` field, requiring canonical symmetry.
    pub fn from_tensor(t: &TensorField) -> Result<MetricField, TensorError> {
        if t.valence() != (0, 2) {
            return Err(TensorError::ShapeMismatch);
        }
        let n = t.dim();
        for i in 0..n {
            for j in i + 1..n {
                if t.get(&[i, j]) != t.get(&[j, i]) {
                    return Err(TensorError::AsymmetricMetric(i, j));
                }
            }
        }
        Ok(MetricField::from_fn(t.chart(), |i, j| t.get(&[i, j]).clone()))
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.upper_tri[tri_offset(self.dim(), i, j)]
    }

    pub fn upper_triangle(&self) -> &[Expr] {
        &self.upper_tri
    }

    pub fn as_tensor(&self) -> TensorField {
        let n = self.dim();
        let comps = (0..n * n).map(|k| self.get(k / n, k % n).clone()).collect();
        TensorField { chart: self.chart.clone(), upper: 0, lower: 2, comps }
    }

    /// `g(u, v)` for vector fields, canonicalized.
    pub fn inner(&self, u: &TensorField, v: &TensorField) -> Expr {
        let n = self.dim();
        let mut terms = Vec::new();
        for i in 0..n {
            if u.get(&[i]).is_zero() {
                continue;
            }
            for j in 0..n {
                terms.push(Expr::product([u.get(&[i]).clone(), self.get(i, j).clone(), v.get(&[j]).clone()]));
            }
        }
        Expr::sum(terms).canonical()
    }

    pub fn matrix_at(&self, p: &EvalPoint) -> Result<DMatrix<f64>, TensorError> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = evaluate(self.get(i, j), p)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    pub fn determinant(&self) -> Expr {
        let n = self.dim();
        let rows: Vec<Vec<Expr>> = (0..n).map(|i| (0..n).map(|j| self.get(i, j).clone()).collect()).collect();
        determinant(&rows)
    }
}

/// Symbolic determinant by Laplace expansion with memoized column subsets.
pub fn determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 0 {
        return Expr::one();
    }
    let mut memo: HashMap<u32, Expr> = HashMap::new();
    det_rec(m, 0, (1u32 << n) - 1, &mut memo)
}

fn det_rec(m: &[Vec<Expr>], row: usize, cols: u32, memo: &mut HashMap<u32, Expr>) -> Expr {
    if row == m.len() {
        return Expr::one();
    }
    if let Some(e) = memo.get(&cols) {
        return e.clone();
    }
    let mut terms = Vec::new();
    let mut sign_positive = true;
    for c in 0..m.len() {
        if cols & (1 << c) == 0 {
            continue;
        }
        let a = &m[row][c];
        if !a.is_zero() {
            let minor = det_rec(m, row + 1, cols & !(1 << c), memo);
            let term = a * &minor;
            terms.push(if sign_positive { term } else { -term });
        }
        sign_positive = !sign_positive;
    }
    let out = Expr::sum(terms).canonical();
    memo.insert(cols, out.clone());
    out
}

/// Inverse metric `g^{ij}` via the adjugate, canonicalized.
pub fn metric_inverse(g: &MetricField) -> Result<TensorField, TensorError> {
    let n = g.dim();
    let det = g.determinant();
    if det.is_zero() {
        return Err(TensorError::DegenerateMetric);
    }
    let cofactor = |i: usize, j: usize| -> Expr {
        let rows: Vec<Vec<Expr>> = (0..n)
            .filter(|&r| r != i)
            .map(|r| (0..n).filter(|&c| c != j).map(|c| g.get(r, c).clone()).collect())
            .collect();
        let minor = determinant(&rows);
        if (i + j).is_multiple_of(2) {
            minor
        } else {
            -minor
        }
    };
    // g^{ij} = C_{ji} / det, and C is symmetric for symmetric g.
    Ok(TensorField::from_fn(g.chart(), 2, 0, |idx| cofactor(idx[1], idx[0]) / det.clone()))
}

/// Counts of positive and negative eigenvalues of `g` evaluated at `p`.
pub fn signature_at(g: &MetricField, p: &EvalPoint) -> Result<(usize, usize), TensorError> {
    let m = g.matrix_at(p)?;
    if m.determinant().abs() <= 1e-12 {
        return Err(TensorError::NumericallyDegenerate(p.to_pairs()));
    }
    let eig = nalgebra::SymmetricEigen::new(m);
    let pos = eig.eigenvalues.iter().filter(|&&v| v > 0.0).count();
    let neg = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
    Ok((pos, neg))
}
