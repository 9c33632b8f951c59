//! Built-in example structures.
//!
//! - `r31_flat`: a flat paracontact metric structure on ℝ³ with hyperbolic
//!   coefficients in `x3`.
//! - `standard_pullback_pair`: the same structure pulled back along a
//!   diffeomorphism to the standard form `η₀ = ½(dz − y dx)`.
//! - `dim5_heisenberg`: a 5-dimensional structure of hyperbolic Heisenberg
//!   type, defined on a left-invariant frame.

use crate::geometry::{pullback_form, pullback_metric, SmoothMap};
use crate::paracontact::{ParacontactError, ParacontactStructure};
use crate::symexpr::{parse, Expr};
use crate::tensorcalc::{determinant, metric_inverse, Chart, MetricField, TensorField};

/// What a named check is expected to report for a catalog entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expect {
    /// Symbolic pass required.
    SymbolicPass,
    /// Symbolic or numeric pass.
    Pass,
    /// A nonzero witness is expected (for zero tests such as `riemann`).
    NonZero,
}

/// The pullback data attached to an entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Pullback {
    pub map: SmoothMap,
    /// Structure on the target chart of `map`.
    pub target: ParacontactStructure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub structure: ParacontactStructure,
    pub pullback: Option<Pullback>,
    /// `(plus, minus)` eigenfields of `h`, when known in closed form.
    pub eigenfields: Option<(Vec<TensorField>, Vec<TensorField>)>,
    /// Expected verdicts by check name. Checks not listed are expected to pass.
    pub expected: Vec<(&'static str, Expect)>,
}

pub const NAMES: [&str; 3] = ["r31_flat", "standard_pullback_pair", "dim5_heisenberg"];

pub fn by_name(name: &str) -> Option<CatalogEntry> {
    match name {
        "r31_flat" => Some(r31_flat()),
        "standard_pullback_pair" => Some(standard_pullback_pair()),
        "dim5_heisenberg" => Some(dim5_heisenberg()),
        _ => None,
    }
}

pub fn all() -> Vec<CatalogEntry> {
    NAMES.iter().filter_map(|n| by_name(n)).collect()
}

fn p(s: &str) -> Expr {
    parse(s).expect("catalog expressions are well formed")
}

fn vector(c: &Chart, comps: &[&str]) -> TensorField {
    TensorField::vector(c, comps.iter().map(|s| p(s)).collect()).expect("dimension matches")
}

fn covector(c: &Chart, comps: &[&str]) -> TensorField {
    TensorField::covector(c, comps.iter().map(|s| p(s)).collect()).expect("dimension matches")
}

fn build(xi: TensorField, eta: TensorField, g: MetricField) -> ParacontactStructure {
    ParacontactStructure::with_derived_phi(xi, eta, g).expect("catalog metrics are nondegenerate")
}

fn r31_structure() -> ParacontactStructure {
    let c = Chart::new(["x1", "x2", "x3"]).expect("distinct names");
    let eta = covector(&c, &["1/2*cosh(x3)", "1/2*sinh(x3)", "0"]);
    let xi = vector(&c, &["2*cosh(x3)", "-2*sinh(x3)", "0"]);
    let g = MetricField::diagonal(&c, vec![p("1/4"), p("-1/4"), p("1/4")]).expect("dimension matches");
    build(xi, eta, g)
}

pub fn r31_flat() -> CatalogEntry {
    let s = r31_structure();
    let c = s.chart().clone();
    CatalogEntry {
        name: "r31_flat",
        description: "flat paracontact metric structure on R^3 with eta = 1/2(cosh(x3)dx1 + sinh(x3)dx2)",
        pullback: None,
        eigenfields: Some((vec![vector(&c, &["-sinh(x3)", "cosh(x3)", "0"])], vec![vector(&c, &["0", "0", "1"])])),
        expected: vec![("riemann", Expect::SymbolicPass), ("F-nondegenerate-on-D", Expect::SymbolicPass)],
        structure: s,
    }
}

/// The diffeomorphism `(x, y, z) ↦ (z cosh x − y sinh x, z sinh x − y cosh x, −x)`.
pub fn standard_map() -> SmoothMap {
    let src = Chart::new(["x", "y", "z"]).expect("distinct names");
    let tgt = Chart::new(["x1", "x2", "x3"]).expect("distinct names");
    SmoothMap::new(&src, &tgt, vec![p("z*cosh(x) - y*sinh(x)"), p("z*sinh(x) - y*cosh(x)"), p("-x")])
        .expect("components use source coordinates")
}

/// `η₀ = ½(dz − y dx)` on the source chart.
pub fn standard_eta(chart: &Chart) -> TensorField {
    covector(chart, &["-1/2*y", "0", "1/2"])
}

/// Builds the pulled-back structure on the source chart of `map`.
///
/// `η₀` is given; `g₀ = f*g`; `ξ₀` is the `g₀`-dual of `η₀` normalized to
/// `η₀(ξ₀) = 1`; `φ₀` is derived from the paracontact condition.
pub fn pulled_back_structure(
    map: &SmoothMap,
    target: &ParacontactStructure,
    eta0: TensorField,
) -> Result<ParacontactStructure, ParacontactError> {
    let g0 = pullback_metric(map, target.metric())?;
    let inv = metric_inverse(&g0)?;
    let chart = map.source();
    let n = chart.dim();
    let dual = TensorField::from_fn(chart, 1, 0, |idx| {
        Expr::sum((0..n).map(|j| inv.get(&[idx[0], j]) * eta0.get(&[j])))
    });
    let norm = eta0.pair(&dual)?;
    let xi0 = TensorField::from_fn(chart, 1, 0, |idx| dual.get(idx).clone() / norm.clone());
    ParacontactStructure::with_derived_phi(xi0, eta0, g0)
}

pub fn standard_pullback_pair() -> CatalogEntry {
    let map = standard_map();
    let target = r31_structure();
    let eta0 = standard_eta(map.source());
    let s = pulled_back_structure(&map, &target, eta0).expect("pullback metric is nondegenerate");
    CatalogEntry {
        name: "standard_pullback_pair",
        description: "pullback of r31_flat to the standard form eta0 = 1/2(dz - y dx)",
        structure: s,
        pullback: Some(Pullback { map, target }),
        eigenfields: None,
        expected: vec![("riemann", Expect::SymbolicPass), ("pullback-eta", Expect::SymbolicPass)],
    }
}

/// Inverse of a square matrix of expressions via cofactors.
fn inverse(m: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = m.len();
    let det = determinant(m);
    let minor = |r: usize, c: usize| -> Vec<Vec<Expr>> {
        (0..n)
            .filter(|&i| i != r)
            .map(|i| (0..n).filter(|&j| j != c).map(|j| m[i][j].clone()).collect())
            .collect()
    };
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sign = if (i + j) % 2 == 0 { Expr::one() } else { -Expr::one() };
                    (sign * determinant(&minor(j, i)) / det.clone()).canonical()
                })
                .collect()
        })
        .collect()
}

/// Heisenberg-type structure from the frame `X_i = ∂x_i + y_i ∂z`,
/// `Y_i = ∂y_i`, `ξ = 2∂z`, with `φX_i = Y_i`, `φY_i = X_i`, `φξ = 0` and
/// `g(X_i,X_j) = ¼δ_ij`, `g(Y_i,Y_j) = −¼δ_ij`, `g(ξ,ξ) = 1`, other pairings 0.
fn heisenberg_structure() -> ParacontactStructure {
    let c = Chart::new(["x1", "x2", "y1", "y2", "z"]).expect("distinct names");
    let n = 5;
    let zero = || Expr::zero();
    // frame vectors as columns of E, in order X1, X2, Y1, Y2, ξ
    let mut e = vec![vec![zero(); n]; n];
    for i in 0..2 {
        e[i][i] = Expr::one();
        e[4][i] = c.var(2 + i);
        e[2 + i][2 + i] = Expr::one();
    }
    e[4][4] = Expr::int(2);
    let e_inv = inverse(&e);
    // frame components
    let mut phi_f = vec![vec![zero(); n]; n];
    let mut g_f = vec![vec![zero(); n]; n];
    for i in 0..2 {
        phi_f[2 + i][i] = Expr::one();
        phi_f[i][2 + i] = Expr::one();
        g_f[i][i] = Expr::ratio(1, 4);
        g_f[2 + i][2 + i] = Expr::ratio(-1, 4);
    }
    g_f[4][4] = Expr::one();
    let eta_f: Vec<Expr> = (0..n).map(|k| if k == 4 { Expr::one() } else { zero() }).collect();
    // coordinate components: φ = E Φ E⁻¹, g = E⁻ᵀ G E⁻¹, η = η_f E⁻¹, ξ = E e_5
    let phi = TensorField::from_fn(&c, 1, 1, |idx| {
        let (i, j) = (idx[0], idx[1]);
        Expr::sum((0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| {
            Expr::product([e[i][a].clone(), phi_f[a][b].clone(), e_inv[b][j].clone()])
        }))
    });
    let g = MetricField::from_fn(&c, |i, j| {
        Expr::sum((0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| {
            Expr::product([e_inv[a][i].clone(), g_f[a][b].clone(), e_inv[b][j].clone()])
        }))
    });
    let eta = TensorField::from_fn(&c, 0, 1, |idx| Expr::sum((0..n).map(|a| &eta_f[a] * &e_inv[a][idx[0]])));
    let xi = TensorField::from_fn(&c, 1, 0, |idx| e[idx[0]][4].clone());
    ParacontactStructure::new(phi, xi, eta, g).expect("well-formed frame data")
}

pub fn dim5_heisenberg() -> CatalogEntry {
    CatalogEntry {
        name: "dim5_heisenberg",
        description: "5-dimensional hyperbolic Heisenberg-type structure, eta = 1/2(dz - y1 dx1 - y2 dx2)",
        structure: heisenberg_structure(),
        pullback: None,
        eigenfields: None,
        expected: vec![("riemann", Expect::NonZero)],
    }
}

/// `f*η` for an entry with pullback data.
pub fn pulled_back_eta(pb: &Pullback) -> TensorField {
    pullback_form(&pb.map, pb.target.eta()).expect("map targets the structure chart")
}
