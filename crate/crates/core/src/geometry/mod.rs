//! Levi-Civita connection, curvature, Lie and exterior calculus, and
//! pullbacks along smooth maps.
//!
//! Conventions fixed for the whole crate:
//!
//! - `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, stored as `R^l_{kij}` with
//!   `R(∂_i,∂_j)∂_k = R^l_{kij} ∂_l`; the lowered tensor is
//!   `R_{lkij} = g(R(∂_i,∂_j)∂_k, ∂_l)`.
//! - The exterior derivative of a 1-form carries a factor ½:
//!   `dω(X,Y) = ½(X ω(Y) − Y ω(X) − ω([X,Y]))`. No other `d` is exposed.
//! - Derivative slots (from `∇` or `∂`) are inserted as the first lower index.

use thiserror::Error;

use crate::symexpr::{differentiate, evaluate, EvalPoint, Expr, ExprError};
use crate::tensorcalc::{lower_index, metric_inverse, Chart, MetricField, TensorError, TensorField};

#[cfg(test)]
mod tests;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("operands live on different charts")]
    ChartMismatch,
    #[error("plane is degenerate (null) at {0:?}")]
    DegeneratePlane(Vec<(String, f64)>),
    #[error("map component references `{0}`, which is not a source coordinate")]
    ForeignCoordinate(String),
    #[error("map has {found} components but the target chart has dimension {expected}")]
    MapArity { expected: usize, found: usize },
}

fn same_chart(a: &Chart, b: &Chart) -> Result<(), GeometryError> {
    if a != b {
        return Err(GeometryError::ChartMismatch);
    }
    Ok(())
}

/// Levi-Civita connection coefficients `Γ^k_{ij}`, stored as a `(1,2)` field.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    symbols: TensorField,
}

impl Christoffel {
    pub fn chart(&self) -> &Chart {
        self.symbols.chart()
    }

    /// `Γ^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Expr {
        self.symbols.get(&[k, i, j])
    }

    pub fn as_tensor(&self) -> &TensorField {
        &self.symbols
    }

    pub fn is_zero(&self) -> bool {
        self.symbols.is_symbolically_zero()
    }
}

/// Coordinate partial derivatives `∂_c t`, with `c` as the first lower slot.
pub fn partial_derivative(t: &TensorField) -> TensorField {
    let (up, low) = t.valence();
    let chart = t.chart().clone();
    TensorField::from_fn(&chart, up, low + 1, |idx| {
        let c = idx[up];
        let mut rest = idx[..up].to_vec();
        rest.extend_from_slice(&idx[up + 1..]);
        differentiate(t.get(&rest), chart.coord(c))
    })
}

/// `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`.
pub fn christoffel(g: &MetricField) -> Result<Christoffel, GeometryError> {
    let inv = metric_inverse(g)?;
    let dg = partial_derivative(&g.as_tensor());
    let n = g.dim();
    let half = Expr::ratio(1, 2);
    let symbols = TensorField::from_fn(g.chart(), 1, 2, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        Expr::sum((0..n).map(|l| {
            let ginv = inv.get(&[k, l]);
            if ginv.is_zero() {
                return Expr::zero();
            }
            let bracket = Expr::sum([
                dg.get(&[i, j, l]).clone(),
                dg.get(&[j, i, l]).clone(),
                -dg.get(&[l, i, j]).clone(),
            ]);
            Expr::product([half.clone(), ginv.clone(), bracket])
        }))
    });
    Ok(Christoffel { symbols })
}

/// `∇t` with the derivative direction as the first lower slot.
pub fn covariant_derivative(t: &TensorField, gamma: &Christoffel) -> Result<TensorField, GeometryError> {
    same_chart(t.chart(), gamma.chart())?;
    let (up, low) = t.valence();
    let n = t.dim();
    let dt = partial_derivative(t);
    Ok(TensorField::from_fn(t.chart(), up, low + 1, |idx| {
        let c = idx[up];
        let mut base: Vec<usize> = idx[..up].to_vec();
        base.extend_from_slice(&idx[up + 1..]);
        let mut terms = vec![dt.get(idx).clone()];
        for p in 0..up {
            for m in 0..n {
                let gm = gamma.get(base[p], c, m);
                if gm.is_zero() {
                    continue;
                }
                let mut shifted = base.clone();
                shifted[p] = m;
                terms.push(gm * t.get(&shifted));
            }
        }
        for q in 0..low {
            for m in 0..n {
                let gm = gamma.get(m, c, base[up + q]);
                if gm.is_zero() {
                    continue;
                }
                let mut shifted = base.clone();
                shifted[up + q] = m;
                terms.push(-(gm * t.get(&shifted)));
            }
        }
        Expr::sum(terms)
    }))
}

/// `∇_X Y` for vector fields.
pub fn covariant_along(x: &TensorField, y: &TensorField, gamma: &Christoffel) -> Result<TensorField, GeometryError> {
    same_chart(x.chart(), y.chart())?;
    let dy = covariant_derivative(y, gamma)?;
    Ok(dy.feed(&[x])?)
}

/// Riemann tensor `R^l_{kij}` (valence (1,3), storage order `[l, k, i, j]`).
pub fn riemann(g: &MetricField) -> Result<TensorField, GeometryError> {
    let gamma = christoffel(g)?;
    Ok(riemann_from(&gamma))
}

/// Riemann tensor from given connection coefficients.
pub fn riemann_from(gamma: &Christoffel) -> TensorField {
    let n = gamma.chart().dim();
    let dgamma = partial_derivative(gamma.as_tensor());
    // dgamma[l, c, i, j] = ∂_c Γ^l_{ij}
    TensorField::from_fn(gamma.chart(), 1, 3, |idx| {
        let (l, k, i, j) = (idx[0], idx[1], idx[2], idx[3]);
        let mut terms = vec![dgamma.get(&[l, i, j, k]).clone(), -dgamma.get(&[l, j, i, k]).clone()];
        for m in 0..n {
            terms.push(gamma.get(l, i, m) * gamma.get(m, j, k));
            terms.push(-(gamma.get(l, j, m) * gamma.get(m, i, k)));
        }
        Expr::sum(terms)
    })
}

/// Lowered curvature `R_{lkij} = g_{lm} R^m_{kij}`.
pub fn riemann_lowered(g: &MetricField) -> Result<TensorField, GeometryError> {
    Ok(lower_index(&riemann(g)?, 0, g)?)
}

/// `R(X,Y)Z` as a vector field from the `(1,3)` tensor.
pub fn curvature_apply(r: &TensorField, x: &TensorField, y: &TensorField, z: &TensorField) -> Result<TensorField, GeometryError> {
    // R^l_{kij} Z^k X^i Y^j: feed slots in storage order (k, i, j).
    Ok(r.feed(&[z, x, y])?)
}

/// `[X,Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
pub fn lie_bracket(x: &TensorField, y: &TensorField) -> Result<TensorField, GeometryError> {
    same_chart(x.chart(), y.chart())?;
    if x.valence() != (1, 0) || y.valence() != (1, 0) {
        return Err(TensorError::ShapeMismatch.into());
    }
    let chart = x.chart();
    let n = chart.dim();
    Ok(TensorField::from_fn(chart, 1, 0, |idx| {
        let i = idx[0];
        Expr::sum((0..n).flat_map(|j| {
            let a = x.get(&[j]) * &differentiate(y.get(&[i]), chart.coord(j));
            let b = y.get(&[j]) * &differentiate(x.get(&[i]), chart.coord(j));
            [a, -b]
        }))
    }))
}

/// Lie derivative `L_X t` for a field of any valence.
pub fn lie_derivative(x: &TensorField, t: &TensorField) -> Result<TensorField, GeometryError> {
    same_chart(x.chart(), t.chart())?;
    if x.valence() != (1, 0) {
        return Err(TensorError::ShapeMismatch.into());
    }
    let chart = t.chart();
    let n = chart.dim();
    let (up, low) = t.valence();
    let dt = partial_derivative(t);
    let dx = partial_derivative(x); // dx[a, c] = ∂_c X^a
    Ok(TensorField::from_fn(chart, up, low, |idx| {
        let mut terms = Vec::new();
        for c in 0..n {
            let xc = x.get(&[c]);
            if xc.is_zero() {
                continue;
            }
            let mut d_idx = idx[..up].to_vec();
            d_idx.push(c);
            d_idx.extend_from_slice(&idx[up..]);
            terms.push(xc * dt.get(&d_idx));
        }
        for p in 0..up {
            for c in 0..n {
                let mut shifted = idx.to_vec();
                shifted[p] = c;
                terms.push(-(t.get(&shifted) * dx.get(&[idx[p], c])));
            }
        }
        for q in 0..low {
            for c in 0..n {
                let mut shifted = idx.to_vec();
                shifted[up + q] = c;
                terms.push(t.get(&shifted) * dx.get(&[c, idx[up + q]]));
            }
        }
        Expr::sum(terms)
    }))
}

/// Exterior derivative of a 1-form with the ½ normalization:
/// `(dω)_{ij} = ½(∂_i ω_j − ∂_j ω_i)`.
pub fn d_half(omega: &TensorField) -> Result<TensorField, GeometryError> {
    if omega.valence() != (0, 1) {
        return Err(TensorError::ShapeMismatch.into());
    }
    let chart = omega.chart();
    let half = Expr::ratio(1, 2);
    Ok(TensorField::from_fn(chart, 0, 2, |idx| {
        let (i, j) = (idx[0], idx[1]);
        if i == j {
            return Expr::zero();
        }
        let a = differentiate(omega.get(&[j]), chart.coord(i));
        let b = differentiate(omega.get(&[i]), chart.coord(j));
        half.clone() * (a - b)
    }))
}

/// A smooth map between charts, given by one expression per target
/// coordinate in terms of the source coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothMap {
    source: Chart,
    target: Chart,
    comps: Vec<Expr>,
}

impl SmoothMap {
    pub fn new(source: &Chart, target: &Chart, comps: Vec<Expr>) -> Result<SmoothMap, GeometryError> {
        if comps.len() != target.dim() {
            return Err(GeometryError::MapArity { expected: target.dim(), found: comps.len() });
        }
        let comps: Vec<Expr> = comps.iter().map(Expr::canonical).collect();
        for c in &comps {
            for v in c.variables() {
                if !source.coords().contains(&v) {
                    return Err(GeometryError::ForeignCoordinate(v));
                }
            }
        }
        Ok(SmoothMap { source: source.clone(), target: target.clone(), comps })
    }

    pub fn identity(chart: &Chart) -> SmoothMap {
        SmoothMap { source: chart.clone(), target: chart.clone(), comps: (0..chart.dim()).map(|i| chart.var(i)).collect() }
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    /// Replaces one component (used to build deliberately corrupted maps).
    pub fn with_component(&self, index: usize, e: Expr) -> Result<SmoothMap, GeometryError> {
        let mut comps = self.comps.clone();
        comps[index] = e;
        SmoothMap::new(&self.source, &self.target, comps)
    }

    /// `e ∘ f` for an expression in target coordinates.
    pub fn compose(&self, e: &Expr) -> Expr {
        let target = self.target.coords();
        e.substitute(&|name: &str| target.iter().position(|c| c == name).map(|k| self.comps[k].clone()))
            .canonical()
    }

    /// `J^a_i = ∂f^a/∂x^i`, as a `(1,1)` field on the source chart.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.comps
            .iter()
            .map(|fa| self.source.coords().iter().map(|x| differentiate(fa, x)).collect())
            .collect()
    }

    pub fn evaluate(&self, p: &EvalPoint) -> Result<Vec<f64>, GeometryError> {
        Ok(self.comps.iter().map(|c| evaluate(c, p)).collect::<Result<_, _>>()?)
    }
}

/// Pullback `f*ω` of a covariant `(0,s)` field on the target chart.
pub fn pullback_form(f: &SmoothMap, omega: &TensorField) -> Result<TensorField, GeometryError> {
    same_chart(omega.chart(), f.target())?;
    let (up, s) = omega.valence();
    if up != 0 {
        return Err(TensorError::ShapeMismatch.into());
    }
    let composed: Vec<Expr> = omega.components().iter().map(|c| f.compose(c)).collect();
    let jac = f.jacobian();
    let m = f.target().dim();
    let combos = m.pow(s as u32);
    Ok(TensorField::from_fn(f.source(), 0, s, |idx| {
        Expr::sum((0..combos).map(|flat| {
            let mut rem = flat;
            let mut a = vec![0; s];
            for slot in (0..s).rev() {
                a[slot] = rem % m;
                rem /= m;
            }
            let mut factors = Vec::with_capacity(s + 1);
            for slot in 0..s {
                let j = &jac[a[slot]][idx[slot]];
                if j.is_zero() {
                    return Expr::zero();
                }
                factors.push(j.clone());
            }
            factors.push(composed[flat].clone());
            Expr::product(factors)
        }))
    }))
}

/// Pullback metric `f*g`.
pub fn pullback_metric(f: &SmoothMap, g: &MetricField) -> Result<MetricField, GeometryError> {
    let t = pullback_form(f, &g.as_tensor())?;
    Ok(MetricField::from_tensor(&t)?)
}

/// Sectional curvature `R(X,Y,Y,X) / (g(X,X)g(Y,Y) − g(X,Y)²)` at `p`.
pub fn sectional_curvature(
    g: &MetricField,
    r_lowered: &TensorField,
    x: &TensorField,
    y: &TensorField,
    p: &EvalPoint,
) -> Result<f64, GeometryError> {
    same_chart(g.chart(), r_lowered.chart())?;
    let n = g.dim();
    let gm = g.matrix_at(p)?;
    let xv = x.evaluate(p)?;
    let yv = y.evaluate(p)?;
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[i] * gm[(i, j)] * b[j];
            }
        }
        s
    };
    let denom = inner(&xv, &xv) * inner(&yv, &yv) - inner(&xv, &yv).powi(2);
    if denom.abs() <= 1e-12 {
        return Err(GeometryError::DegeneratePlane(p.to_pairs()));
    }
    let r = r_lowered.evaluate(p)?;
    // R(X,Y,Y,X) = R_{lkij} X^l Y^k X^i Y^j
    let mut num = 0.0;
    for (flat, val) in r.iter().enumerate() {
        if *val == 0.0 {
            continue;
        }
        let (l, k, i, j) = (flat / (n * n * n), (flat / (n * n)) % n, (flat / n) % n, flat % n);
        num += val * xv[l] * yv[k] * xv[i] * yv[j];
    }
    Ok(num / denom)
}
