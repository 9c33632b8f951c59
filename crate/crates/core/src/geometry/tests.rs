use proptest::prelude::*;

use super::*;
use crate::symexpr::{parse, zero_test, ProbeSampler, ZeroVerdict, DEFAULT_PROBES, DEFAULT_TOL};
use crate::tensorcalc::tensor_equal;

fn chart(names: &[&str]) -> Chart {
    Chart::new(names.iter().copied()).unwrap()
}

fn p(s: &str) -> Expr {
    parse(s).unwrap()
}

fn field(c: &Chart, comps: &[&str]) -> TensorField {
    TensorField::vector(c, comps.iter().map(|s| p(s)).collect()).unwrap()
}

fn form(c: &Chart, comps: &[&str]) -> TensorField {
    TensorField::covector(c, comps.iter().map(|s| p(s)).collect()).unwrap()
}

fn metric(c: &Chart, upper: &[&str]) -> MetricField {
    MetricField::from_upper_triangle(c, upper.iter().map(|s| p(s)).collect()).unwrap()
}

fn polar() -> MetricField {
    MetricField::diagonal(&chart(&["x1", "x2"]), vec![p("1"), p("x1^2")]).unwrap()
}

fn sphere() -> MetricField {
    MetricField::diagonal(&chart(&["x1", "x2"]), vec![p("1"), p("sin(x1)^2")]).unwrap()
}

/// The flat 3-dimensional example: `η = ½(cosh x3 dx1 + sinh x3 dx2)`,
/// `g = diag(¼, −¼, ¼)`.
fn r31() -> (Chart, MetricField, TensorField) {
    let c = chart(&["x1", "x2", "x3"]);
    let g = metric(&c, &["1/4", "0", "0", "-1/4", "0", "1/4"]);
    let eta = form(&c, &["cosh(x3)/2", "sinh(x3)/2", "0"]);
    (c, g, eta)
}

fn heis_chart() -> Chart {
    chart(&["x1", "x2", "y1", "y2", "z"])
}

/// Independent metric for curvature checks: a warped product in 3D.
fn warped() -> MetricField {
    let c = chart(&["x1", "x2", "x3"]);
    metric(&c, &["1", "0", "0", "exp(2*x1)", "x1", "cosh(x1)^2 + 1"])
}

fn assert_zero(t: &TensorField) {
    let v = t.zero_test(DEFAULT_PROBES, 7, 1e-8).unwrap();
    assert!(v.verdict.is_zero(), "expected zero, got {:?} at component {:?}", v.verdict, v.component);
}

// Numeric oracles: finite differences of evaluated metric components.

const H: f64 = 1e-5;

fn g_at(g: &MetricField, x: &[f64]) -> Vec<Vec<f64>> {
    let m = g.matrix_at(&g.chart().point(x)).unwrap();
    (0..g.dim()).map(|i| (0..g.dim()).map(|j| m[(i, j)]).collect()).collect()
}

fn gamma_fd(g: &MetricField, x: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    let n = g.dim();
    let mut dg = vec![vec![vec![0.0; n]; n]; n];
    for c in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[c] += h;
        xm[c] -= h;
        let (gp, gm) = (g_at(g, &xp), g_at(g, &xm));
        for i in 0..n {
            for j in 0..n {
                dg[c][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
            }
        }
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| g_at(g, x)[i][j]);
    let inv = m.try_inverse().unwrap();
    let mut gam = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                gam[k][i][j] =
                    (0..n).map(|l| 0.5 * inv[(k, l)] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j])).sum();
            }
        }
    }
    gam
}

/// `R^l_{kij}` from symbolic Γ evaluated at nearby points, with finite
/// differences for `∂Γ`.
fn riemann_fd(gamma: &Christoffel, x: &[f64]) -> Vec<f64> {
    let n = gamma.chart().dim();
    let c = gamma.chart();
    let eval = |y: &[f64]| gamma.as_tensor().evaluate(&c.point(y)).unwrap();
    let g0 = eval(x);
    let gi = |v: &[f64], l: usize, i: usize, j: usize| v[(l * n + i) * n + j];
    let h = 1e-4;
    let mut dg = Vec::new();
    for d in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[d] += h;
        xm[d] -= h;
        let (a, b) = (eval(&xp), eval(&xm));
        dg.push(a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect::<Vec<_>>());
    }
    let mut out = vec![0.0; n.pow(4)];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut r = gi(&dg[i], l, j, k) - gi(&dg[j], l, i, k);
                    for m in 0..n {
                        r += gi(&g0, l, i, m) * gi(&g0, m, j, k) - gi(&g0, l, j, m) * gi(&g0, m, i, k);
                    }
                    out[((l * n + k) * n + i) * n + j] = r;
                }
            }
        }
    }
    out
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + b.abs())
}

#[test]
fn polar_christoffel_symbols() {
    let gamma = christoffel(&polar()).unwrap();
    assert_eq!(gamma.get(0, 1, 1), &p("-x1"));
    assert_eq!(gamma.get(1, 0, 1), &p("1/x1"));
    assert_eq!(gamma.get(1, 1, 0), &p("1/x1"));
    assert_eq!(gamma.get(0, 0, 0), &Expr::zero());
    assert_eq!(gamma.get(1, 1, 1), &Expr::zero());
}

#[test]
fn christoffel_matches_finite_differences() {
    for g in [polar(), sphere(), warped()] {
        let gamma = christoffel(&g).unwrap();
        let n = g.dim();
        let mut s = ProbeSampler::with_radius(11, 1.0);
        for _ in 0..5 {
            let pt = s.point(g.chart().coords());
            let x: Vec<f64> = g.chart().coords().iter().map(|c| pt.get(c).unwrap() + 1.5).collect();
            let fd = gamma_fd(&g, &x, H);
            let sym = gamma.as_tensor().evaluate(&g.chart().point(&x)).unwrap();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let a = sym[(k * n + i) * n + j];
                        assert!(close(a, fd[k][i][j], 1e-6), "Γ^{k}_{i}{j}: {a} vs {}", fd[k][i][j]);
                    }
                }
            }
        }
    }
}

#[test]
fn flat_metric_has_zero_connection_and_curvature() {
    let (_, g, _) = r31();
    assert!(christoffel(&g).unwrap().is_zero());
    assert!(riemann(&g).unwrap().is_symbolically_zero());
}

#[test]
fn sphere_curvature() {
    let g = sphere();
    let r = riemann(&g).unwrap();
    assert_eq!(r.get(&[0, 1, 0, 1]), &p("sin(x1)^2"));
    assert_eq!(r.get(&[0, 1, 1, 0]), &p("-1*sin(x1)^2"));
    assert_eq!(r.get(&[1, 0, 1, 0]), &Expr::one());
    let rl = riemann_lowered(&g).unwrap();
    let c = g.chart();
    let x = TensorField::coordinate_field(c, 0);
    let y = TensorField::coordinate_field(c, 1);
    let pt = c.point(&[std::f64::consts::FRAC_PI_4, 0.3]);
    let k = sectional_curvature(&g, &rl, &x, &y, &pt).unwrap();
    assert!((k - 1.0).abs() < 1e-12, "K = {k}");
}

#[test]
fn riemann_matches_finite_differences_of_christoffel() {
    for g in [sphere(), warped()] {
        let gamma = christoffel(&g).unwrap();
        let r = riemann_from(&gamma);
        let mut s = ProbeSampler::with_radius(5, 1.0);
        for _ in 0..5 {
            let pt = s.point(g.chart().coords());
            let x: Vec<f64> = g.chart().coords().iter().map(|c| pt.get(c).unwrap() + 1.5).collect();
            let sym = r.evaluate(&g.chart().point(&x)).unwrap();
            let fd = riemann_fd(&gamma, &x);
            for (a, b) in sym.iter().zip(&fd) {
                assert!(close(*a, *b, 1e-4), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn curvature_symmetries_and_bianchi() {
    for g in [sphere(), warped()] {
        let r = riemann_lowered(&g).unwrap();
        let n = g.dim();
        let mut sum_pairs = Vec::new();
        let mut bianchi = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let v = r.get(&[a, b, c, d]);
                        sum_pairs.push(v + r.get(&[a, b, d, c]));
                        sum_pairs.push(v + r.get(&[b, a, c, d]));
                        sum_pairs.push(v - r.get(&[c, d, a, b]));
                        // first Bianchi on the (k,i,j) slots
                        bianchi.push(Expr::sum([v.clone(), r.get(&[a, c, d, b]).clone(), r.get(&[a, d, b, c]).clone()]));
                    }
                }
            }
        }
        for e in sum_pairs.iter().chain(&bianchi) {
            assert!(zero_test(e, DEFAULT_PROBES, 3, 1e-8).unwrap().is_zero(), "{e}");
        }
    }
}

#[test]
fn metric_is_parallel() {
    for g in [polar(), warped()] {
        let gamma = christoffel(&g).unwrap();
        assert_zero(&covariant_derivative(&g.as_tensor(), &gamma).unwrap());
    }
}

#[test]
fn covariant_derivative_slot_order() {
    let g = polar();
    let c = g.chart();
    let gamma = christoffel(&g).unwrap();
    // ∇_{∂2} ∂2 = −x1 ∂1, ∇_{∂1} ∂2 = ∂2 / x1
    let e2 = TensorField::coordinate_field(c, 1);
    let e1 = TensorField::coordinate_field(c, 0);
    assert_eq!(covariant_along(&e2, &e2, &gamma).unwrap(), field(c, &["-x1", "0"]));
    assert_eq!(covariant_along(&e1, &e2, &gamma).unwrap(), field(c, &["0", "1/x1"]));
    // the derivative slot is the first lower index of ∇A for a (1,1) field
    let a = TensorField::new(c, 1, 1, vec![p("x1"), p("0"), p("0"), p("1")]).unwrap();
    let da = covariant_derivative(&a, &gamma).unwrap();
    // (∇_{∂2} A)^1_2 = Γ^1_{2m} A^m_2 − A^1_m Γ^m_{22}
    let expected = Expr::sum([
        gamma.get(0, 1, 1) * a.get(&[1, 1]),
        -(a.get(&[0, 0]) * gamma.get(0, 1, 1)),
    ]);
    assert!(zero_test(&(da.get(&[0, 1, 1]) - &expected), 8, 1, 1e-10).unwrap().is_zero());
}

#[test]
fn connection_is_torsion_free() {
    let g = warped();
    let c = g.chart();
    let gamma = christoffel(&g).unwrap();
    let x = field(c, &["x2", "x1*x3", "1"]);
    let y = field(c, &["sinh(x1)", "0", "x2^2"]);
    let lhs = covariant_along(&x, &y, &gamma).unwrap().sub(&covariant_along(&y, &x, &gamma).unwrap()).unwrap();
    let rhs = lie_bracket(&x, &y).unwrap();
    assert!(tensor_equal(&lhs, &rhs, 8, 2, 1e-8).unwrap().is_zero());
}

#[test]
fn bracket_of_flat_example_fields() {
    let (c, _, _) = r31();
    let e3 = TensorField::coordinate_field(&c, 2);
    let v = field(&c, &["sinh(x3)", "cosh(x3)", "0"]);
    assert_eq!(lie_bracket(&e3, &v).unwrap(), field(&c, &["cosh(x3)", "sinh(x3)", "0"]));
    assert!(lie_bracket(&v, &v).unwrap().is_symbolically_zero());
    let x = TensorField::coordinate_field(&c, 0);
    let y = field(&c, &["0", "x1", "0"]);
    assert_eq!(lie_bracket(&x, &y).unwrap(), TensorField::coordinate_field(&c, 1));
}

#[test]
fn lie_derivative_agrees_with_bracket_and_cartan() {
    let (c, _, eta) = r31();
    let x = field(&c, &["x3", "sinh(x1)", "x2"]);
    let y = field(&c, &["1", "x1^2", "cosh(x3)"]);
    assert_eq!(lie_derivative(&x, &y).unwrap(), lie_bracket(&x, &y).unwrap());
    // (L_X ω)(Y) = X(ω(Y)) − ω([X,Y])
    let lhs = lie_derivative(&x, &eta).unwrap().pair(&y).unwrap();
    let wy = eta.pair(&y).unwrap();
    let xwy = Expr::sum((0..3).map(|i| x.get(&[i]) * &differentiate(&wy, c.coord(i))));
    let rhs = xwy - eta.pair(&lie_bracket(&x, &y).unwrap()).unwrap();
    assert!(zero_test(&(lhs - rhs), 8, 0, 1e-9).unwrap().is_zero());
}

#[test]
fn lie_derivative_of_endomorphism() {
    // (L_X A)(Y) = [X, AY] − A[X,Y]
    let (c, _, _) = r31();
    let a = TensorField::new(
        &c,
        1,
        1,
        ["0", "0", "-sinh(x3)", "0", "0", "cosh(x3)", "sinh(x3)", "cosh(x3)", "0"].iter().map(|s| p(s)).collect(),
    )
    .unwrap();
    let x = field(&c, &["x2", "1", "x1"]);
    let y = field(&c, &["x3", "0", "exp(x1)"]);
    let lhs = lie_derivative(&x, &a).unwrap().apply(&y).unwrap();
    let rhs = lie_bracket(&x, &a.apply(&y).unwrap()).unwrap().sub(&a.apply(&lie_bracket(&x, &y).unwrap()).unwrap()).unwrap();
    assert!(tensor_equal(&lhs, &rhs, 8, 0, 1e-9).unwrap().is_zero());
}

#[test]
fn half_exterior_derivative() {
    let c = chart(&["x", "y", "z"]);
    let eta0 = form(&c, &["-y/2", "0", "1/2"]);
    let d = d_half(&eta0).unwrap();
    assert_eq!(d.get(&[0, 1]), &p("1/4"));
    assert_eq!(d.get(&[1, 0]), &p("-1/4"));
    assert!(d_half(&form(&c, &["1", "0", "0"])).unwrap().is_symbolically_zero());
    // dω(X,Y) = ½(X ω(Y) − Y ω(X) − ω([X,Y]))
    let w = form(&c, &["x*z", "sinh(y)", "x^2"]);
    let x = field(&c, &["y", "1", "0"]);
    let y = field(&c, &["0", "z", "x"]);
    let lhs = d_half(&w).unwrap().feed(&[&x, &y]).unwrap();
    let deriv = |v: &TensorField, f: &Expr| Expr::sum((0..3).map(|i| v.get(&[i]) * &differentiate(f, c.coord(i))));
    let rhs = Expr::ratio(1, 2)
        * (deriv(&x, &w.pair(&y).unwrap()) - deriv(&y, &w.pair(&x).unwrap()) - w.pair(&lie_bracket(&x, &y).unwrap()).unwrap());
    assert!(zero_test(&(lhs.as_scalar().unwrap() - &rhs), 8, 0, 1e-9).unwrap().is_zero());
}

fn pullback_map() -> SmoothMap {
    let src = chart(&["x", "y", "z"]);
    let tgt = chart(&["x1", "x2", "x3"]);
    SmoothMap::new(
        &src,
        &tgt,
        vec![p("z*cosh(x) - y*sinh(x)"), p("z*sinh(x) - y*cosh(x)"), p("-x")],
    )
    .unwrap()
}

#[test]
fn pullback_of_contact_form() {
    let (_, _, eta) = r31();
    let f = pullback_map();
    let pulled = pullback_form(&f, &eta).unwrap();
    assert_eq!(pulled, form(f.source(), &["-y/2", "0", "1/2"]));
}

#[test]
fn pullback_metric_determinant() {
    let (_, g, _) = r31();
    let f = pullback_map();
    let g0 = pullback_metric(&f, &g).unwrap();
    assert_eq!(g0.determinant(), p("-1/64"));
    let jac = f.jacobian();
    assert_eq!(crate::tensorcalc::determinant(&jac), p("-1"));
    // pulled-back metric of a flat metric is flat
    assert!(riemann(&g0).unwrap().is_symbolically_zero());
}

#[test]
fn pullback_along_identity_is_identity() {
    let (c, g, eta) = r31();
    let id = SmoothMap::identity(&c);
    assert_eq!(pullback_form(&id, &eta).unwrap(), eta);
    assert_eq!(pullback_metric(&id, &g).unwrap(), g);
}

#[test]
fn map_errors() {
    let src = chart(&["x", "y"]);
    let tgt = chart(&["u"]);
    assert!(matches!(SmoothMap::new(&src, &tgt, vec![p("w")]), Err(GeometryError::ForeignCoordinate(_))));
    assert!(matches!(SmoothMap::new(&src, &tgt, vec![]), Err(GeometryError::MapArity { .. })));
    let f = SmoothMap::new(&src, &tgt, vec![p("x")]).unwrap();
    let wrong = form(&src, &["1", "0"]);
    assert_eq!(pullback_form(&f, &wrong), Err(GeometryError::ChartMismatch));
}

#[test]
fn degenerate_plane_is_reported() {
    let g = sphere();
    let rl = riemann_lowered(&g).unwrap();
    let x = TensorField::coordinate_field(g.chart(), 0);
    let pt = g.chart().point(&[0.5, 0.5]);
    assert!(matches!(sectional_curvature(&g, &rl, &x, &x, &pt), Err(GeometryError::DegeneratePlane(_))));
    // null plane in a Lorentzian metric
    let c = chart(&["t", "s"]);
    let h = MetricField::diagonal(&c, vec![p("1"), p("-1")]).unwrap();
    let rh = riemann_lowered(&h).unwrap();
    let u = field(&c, &["1", "1"]);
    let v = field(&c, &["1", "0"]);
    let res = sectional_curvature(&h, &rh, &u, &v, &c.point(&[0.0, 0.0]));
    assert!(matches!(res, Ok(k) if k == 0.0) || matches!(res, Err(GeometryError::DegeneratePlane(_))));
}

#[test]
fn heisenberg_chart_riemann_is_nonzero() {
    let c = heis_chart();
    let q = Expr::ratio(1, 4);
    // g = ¼(dx1² + dx2²) − ¼(dy1² + dy2²) + η² with η = ½(dz − y1 dx1 − y2 dx2)
    let eta = [p("-y1/2"), p("-y2/2"), p("0"), p("0"), p("1/2")];
    let base = |i: usize, j: usize| -> Expr {
        match (i, j) {
            (0, 0) | (1, 1) => q.clone(),
            (2, 2) | (3, 3) => -q.clone(),
            _ => Expr::zero(),
        }
    };
    let g = MetricField::from_fn(&c, |i, j| base(i, j) + &eta[i] * &eta[j]);
    let r = riemann(&g).unwrap();
    assert!(!r.is_symbolically_zero());
}

fn coeff() -> impl Strategy<Value = i64> {
    -3i64..=3
}

fn poly_field() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((coeff(), coeff(), coeff(), 0u32..3), 3).prop_map(|cs| {
        cs.into_iter()
            .map(|(a, b, c, k)| format!("{a}*x1 + {b}*x2^2 + {c}*sinh(x3) + x1^{k}"))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn torsion_free_for_random_fields(xs in poly_field(), ys in poly_field()) {
        let g = warped();
        let c = g.chart();
        let gamma = christoffel(&g).unwrap();
        let xr: Vec<&str> = xs.iter().map(String::as_str).collect();
        let yr: Vec<&str> = ys.iter().map(String::as_str).collect();
        let x = field(c, &xr);
        let y = field(c, &yr);
        let lhs = covariant_along(&x, &y, &gamma).unwrap().sub(&covariant_along(&y, &x, &gamma).unwrap()).unwrap();
        let rhs = lie_bracket(&x, &y).unwrap();
        prop_assert!(tensor_equal(&lhs, &rhs, 6, 1, 1e-7).unwrap().is_zero());
    }

    #[test]
    fn d_half_commutes_with_pullback(ws in poly_field()) {
        let f = pullback_map();
        let wr: Vec<&str> = ws.iter().map(String::as_str).collect();
        let w = form(f.target(), &wr);
        let lhs = pullback_form(&f, &d_half(&w).unwrap()).unwrap();
        let rhs = d_half(&pullback_form(&f, &w).unwrap()).unwrap();
        let v = tensor_equal(&lhs, &rhs, DEFAULT_PROBES, 0, DEFAULT_TOL).unwrap();
        prop_assert!(matches!(v, ZeroVerdict::SymbolicZero | ZeroVerdict::NumericZero { .. }), "{v:?}");
    }
}
