use proptest::prelude::*;

use super::*;
use crate::catalog;
use crate::geometry::{covariant_along, lie_bracket, SmoothMap};
use crate::symexpr::{parse, zero_test};
use crate::tensorcalc::tensor_equal;

fn p(s: &str) -> Expr {
    parse(s).unwrap()
}

fn cfg() -> CheckConfig {
    CheckConfig::default()
}

fn field(c: &Chart, comps: &[&str]) -> TensorField {
    TensorField::vector(c, comps.iter().map(|s| p(s)).collect()).unwrap()
}

fn r31() -> ParacontactStructure {
    catalog::r31_flat().structure
}

fn heis() -> ParacontactStructure {
    catalog::dim5_heisenberg().structure
}

fn is_zero(t: &TensorField) -> bool {
    t.zero_test(8, 1, 1e-9).unwrap().verdict.is_zero()
}

fn equal(a: &TensorField, b: &TensorField) -> bool {
    tensor_equal(a, b, 8, 1, 1e-9).unwrap().is_zero()
}

fn labels(r: &ValidationReport) -> Vec<(String, &'static str)> {
    r.checks.iter().map(|c| (c.name.clone(), c.verdict.label())).collect()
}

/// `(φ, ξ/c, cη, c²g)` keeps every almost paracontact metric axiom but
/// breaks `F = dη` when `c` is not constant.
fn rescaled(s: &ParacontactStructure, c: &str) -> ParacontactStructure {
    let c = p(c);
    let g = MetricField::from_fn(s.chart(), |i, j| &c * &c * s.metric().get(i, j));
    ParacontactStructure::new(s.phi().clone(), s.xi().scale(&(Expr::one() / c.clone())), s.eta().scale(&c), g).unwrap()
}

#[test]
fn derived_phi_solves_the_defining_equation() {
    let s = r31();
    let n = s.dim();
    // g(∂_i, φ∂_j) − dη_ij, summed by hand
    let d = s.d_eta();
    for i in 0..n {
        for j in 0..n {
            let lhs = Expr::sum((0..n).map(|k| s.metric().get(i, k) * s.phi().get(&[k, j])));
            assert!(zero_test(&(lhs - d.get(&[i, j])), 8, 0, 1e-12).unwrap().is_zero());
        }
    }
    let c = s.chart();
    assert_eq!(s.phi().apply(&TensorField::coordinate_field(c, 0)).unwrap(), field(c, &["0", "0", "sinh(x3)"]));
    assert_eq!(s.phi().apply(&TensorField::coordinate_field(c, 1)).unwrap(), field(c, &["0", "0", "cosh(x3)"]));
    assert_eq!(
        s.phi().apply(&TensorField::coordinate_field(c, 2)).unwrap(),
        field(c, &["-sinh(x3)", "cosh(x3)", "0"])
    );
}

#[test]
fn derive_phi_rejects_degenerate_metric() {
    let s = r31();
    let g = MetricField::diagonal(s.chart(), vec![p("1"), p("0"), p("1")]).unwrap();
    assert!(matches!(
        derive_phi(s.eta(), s.xi(), &g),
        Err(ParacontactError::Tensor(TensorError::DegenerateMetric))
    ));
}

#[test]
fn validate_r31_verdicts() {
    let r = validate(&r31(), &cfg());
    assert_eq!(r.names(), VALIDATE_CHECKS.to_vec());
    for c in &r.checks {
        let expected = if matches!(c.name.as_str(), "paracomplex-eigendims" | "signature") {
            Verdict::NumericPass
        } else {
            Verdict::SymbolicPass
        };
        assert_eq!(c.verdict, expected, "{}", c.name);
    }
    assert_eq!(r.status(), Verdict::NumericPass);
}

#[test]
fn scaled_eta_breaks_normalization() {
    let s = r31();
    let broken = s.with_eta(s.eta().scale(&Expr::int(2))).unwrap();
    let r = validate(&broken, &cfg());
    match r.get("eta-xi-one").unwrap() {
        Verdict::Fail { witness } => assert_eq!(witness.value, 2.0),
        other => panic!("expected failure, got {other:?}"),
    }
    assert!(!r.passed());
}

#[test]
fn closed_eta_gives_zero_phi_and_fails_eigendims() {
    let s = r31();
    let eta = TensorField::covector(s.chart(), vec![p("0"), p("0"), p("1/2")]).unwrap();
    let xi = field(s.chart(), &["0", "0", "2"]);
    let t = ParacontactStructure::with_derived_phi(xi, eta, s.metric().clone()).unwrap();
    assert!(t.phi().is_symbolically_zero());
    assert!(validate(&t, &cfg()).get("paracomplex-eigendims").unwrap().is_fail());
}

#[test]
fn heisenberg_validates() {
    let r = validate(&heis(), &cfg());
    assert!(r.passed(), "{:?}", labels(&r));
    assert_eq!(r.get("F-nondegenerate-on-D"), Some(&Verdict::SymbolicPass));
}

#[test]
fn wrong_signature_is_reported() {
    let s = r31();
    let g = MetricField::diagonal(s.chart(), vec![p("1/4"), p("1/4"), p("1/4")]).unwrap();
    let t = ParacontactStructure::new(s.phi().clone(), s.xi().clone(), s.eta().clone(), g).unwrap();
    assert!(validate(&t, &cfg()).get("signature").unwrap().is_fail());
}

#[test]
fn pfaffian_top_coefficient() {
    // η ∧ F for the flat example: ½ cosh·F_23 − ½ sinh·F_13 = ¼·(cosh² − sinh²)·… constant
    let top = eta_wedge_f_top(&r31());
    assert!(top.as_rational().is_some(), "{top}");
    assert!(!top.is_zero());
}

#[test]
fn nijenhuis_of_constant_paracomplex_structure_vanishes() {
    let c = Chart::new(["x", "y"]).unwrap();
    let j = TensorField::new(&c, 1, 1, vec![p("0"), p("1"), p("1"), p("0")]).unwrap();
    assert!(nijenhuis(&j).is_symbolically_zero());
}

/// `N_J(∂_a, ∂_b)` from brackets of vector fields.
fn nijenhuis_by_brackets(j: &TensorField, a: usize, b: usize) -> TensorField {
    let c = j.chart();
    let x = TensorField::coordinate_field(c, a);
    let y = TensorField::coordinate_field(c, b);
    let jx = j.apply(&x).unwrap();
    let jy = j.apply(&y).unwrap();
    let t1 = lie_bracket(&jx, &jy).unwrap();
    let t2 = j.apply(&lie_bracket(&jx, &y).unwrap()).unwrap();
    let t3 = j.apply(&lie_bracket(&x, &jy).unwrap()).unwrap();
    let t4 = lie_bracket(&x, &y).unwrap();
    t1.sub(&t2).unwrap().sub(&t3).unwrap().add(&t4).unwrap()
}

#[test]
fn nijenhuis_matches_bracket_definition() {
    for s in [r31(), heis()] {
        let n = nijenhuis(s.phi());
        let d = s.dim();
        for a in 0..d {
            for b in 0..d {
                let direct = TensorField::from_fn(s.chart(), 1, 0, |idx| n.get(&[idx[0], a, b]).clone());
                assert!(equal(&direct, &nijenhuis_by_brackets(s.phi(), a, b)), "({a},{b})");
            }
        }
    }
    assert!(!nijenhuis(r31().phi()).is_symbolically_zero());
}

#[test]
fn n2_matches_lie_derivative_definition() {
    let s = rescaled(&r31(), "exp(x1)");
    let nt = n_tensors(&s);
    let c = s.chart();
    for j in 0..3 {
        for k in 0..3 {
            let pj = s.phi().apply(&TensorField::coordinate_field(c, j)).unwrap();
            let pk = s.phi().apply(&TensorField::coordinate_field(c, k)).unwrap();
            let a = lie_derivative(&pj, s.eta()).unwrap().get(&[k]).clone();
            let b = lie_derivative(&pk, s.eta()).unwrap().get(&[j]).clone();
            assert!(zero_test(&(nt.n2.get(&[j, k]) - &(a - b)), 8, 0, 1e-9).unwrap().is_zero());
        }
    }
}

#[test]
fn structure_tensors_of_catalog_entries() {
    for e in catalog::all() {
        let s = &e.structure;
        let nt = n_tensors(s);
        assert!(is_zero(&nt.n2), "{}: N2", e.name);
        assert!(is_zero(&nt.n4), "{}: N4", e.name);
        assert_eq!(nt.n3, s.h().scale(&Expr::int(2)), "{}: N3 = 2h", e.name);
    }
}

#[test]
fn reeb_field_of_flat_example_is_not_killing() {
    let s = r31();
    let nt = n_tensors(&s);
    assert!(!nt.n3.is_symbolically_zero());
    let lg = lie_derivative(s.xi(), &s.metric().as_tensor()).unwrap();
    assert!(!lg.is_symbolically_zero());
    // Heisenberg: h = 0 and ξ is Killing
    let t = heis();
    assert!(n_tensors(&t).n3.is_symbolically_zero());
    assert!(lie_derivative(t.xi(), &t.metric().as_tensor()).unwrap().is_symbolically_zero());
}

#[test]
fn vanishing_n1_forces_the_others() {
    // φ swaps ∂x and ∂y, ξ = ∂z, η = dz: an almost paracontact structure with N^(1) = 0
    let c = Chart::new(["x", "y", "z"]).unwrap();
    let phi = TensorField::new(&c, 1, 1, ["0", "1", "0", "1", "0", "0", "0", "0", "0"].iter().map(|s| p(s)).collect()).unwrap();
    let xi = field(&c, &["0", "0", "1"]);
    let eta = TensorField::covector(&c, vec![p("0"), p("0"), p("1")]).unwrap();
    let g = MetricField::diagonal(&c, vec![p("1"), p("-1"), p("1")]).unwrap();
    let s = ParacontactStructure::new(phi, xi, eta, g).unwrap();
    let nt = n_tensors(&s);
    assert!(nt.n1.is_symbolically_zero());
    assert!(nt.n2.is_symbolically_zero() && nt.n3.is_symbolically_zero() && nt.n4.is_symbolically_zero());
}

#[test]
fn h_on_the_flat_example() {
    let s = r31();
    let c = s.chart();
    let (h, report) = h_operator(&s, &cfg());
    assert_eq!(report.names(), H_CHECKS.to_vec());
    assert!(report.checks.iter().all(|c| c.verdict == Verdict::SymbolicPass), "{:?}", labels(&report));
    let e3 = TensorField::coordinate_field(c, 2);
    assert_eq!(h.apply(&e3).unwrap(), e3.scale(&Expr::int(-1)));
    let plus = field(c, &["-sinh(x3)", "cosh(x3)", "0"]);
    assert_eq!(h.apply(&plus).unwrap(), plus);
    // the +1 field is φ∂3 and lies in Ker η
    assert_eq!(s.phi().apply(&e3).unwrap(), plus);
    assert_eq!(s.eta().pair(&plus).unwrap(), Expr::zero());
}

#[test]
fn h_against_componentwise_lie_formula() {
    // (L_ξ φ)^i_j = ξ^c ∂_c φ^i_j − φ^c_j ∂_c ξ^i + φ^i_c ∂_j ξ^c, evaluated numerically
    let s = r31();
    let c = s.chart();
    let pt = c.point(&[0.2, -0.4, 0.9]);
    let h = s.h().evaluate(&pt).unwrap();
    let x3: f64 = 0.9;
    let (sh, ch) = (x3.sinh(), x3.cosh());
    let xi = [2.0 * ch, -2.0 * sh, 0.0];
    let dxi3 = [2.0 * sh, -2.0 * ch, 0.0];
    let phi = [[0.0, 0.0, -sh], [0.0, 0.0, ch], [sh, ch, 0.0]];
    let dphi3 = [[0.0, 0.0, -ch], [0.0, 0.0, sh], [ch, sh, 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            let mut l = xi[2] * dphi3[i][j] - phi[2][j] * dxi3[i];
            if j == 2 {
                l += (0..3).map(|k| phi[i][k] * dxi3[k]).sum::<f64>();
            }
            assert!((h[i * 3 + j] - 0.5 * l).abs() < 1e-12, "h[{i}][{j}]");
        }
    }
}

#[test]
fn h_identities_for_heisenberg() {
    let (h, report) = h_operator(&heis(), &cfg());
    assert!(h.is_symbolically_zero());
    assert!(report.passed(), "{:?}", labels(&report));
}

#[test]
fn nabla_phi_formula_on_catalog() {
    for e in catalog::all() {
        let r = check_nabla_phi(&e.structure, &cfg()).unwrap();
        assert_eq!(r.names(), NABLA_PHI_CHECKS.to_vec());
        assert!(r.checks.iter().all(|c| c.verdict.is_pass()), "{}: {:?}", e.name, labels(&r));
    }
    let r = check_nabla_phi(&r31(), &cfg()).unwrap();
    assert_eq!(r.get("nabla-phi-paracontact"), Some(&Verdict::SymbolicPass));
}

/// Evaluates `2g((∇_Xφ)Y,Z)` and the reduced right side for constant
/// vector fields through brackets and covariant derivatives of fields.
fn nabla_phi_by_fields(s: &ParacontactStructure, x: &TensorField, y: &TensorField, z: &TensorField) -> (Expr, Expr) {
    let gamma = s.christoffel().unwrap();
    let g = s.metric();
    let phi = s.phi();
    let dphi_xy = covariant_along(x, &phi.apply(y).unwrap(), gamma)
        .unwrap()
        .sub(&phi.apply(&covariant_along(x, y, gamma).unwrap()).unwrap())
        .unwrap();
    let lhs = Expr::int(2) * g.inner(&dphi_xy, z);
    let py = phi.apply(y).unwrap();
    let pz = phi.apply(z).unwrap();
    let px = phi.apply(x).unwrap();
    let n_phi = lie_bracket(&py, &pz)
        .unwrap()
        .sub(&phi.apply(&lie_bracket(&py, z).unwrap()).unwrap())
        .unwrap()
        .sub(&phi.apply(&lie_bracket(y, &pz).unwrap()).unwrap())
        .unwrap()
        .add(&lie_bracket(y, z).unwrap())
        .unwrap();
    let d_eta = s.d_eta();
    let dyz = d_eta.feed(&[y, z]).unwrap().as_scalar().unwrap().clone();
    let n1 = n_phi.sub(&s.xi().scale(&(Expr::int(2) * dyz))).unwrap();
    let d_pz_x = d_eta.feed(&[&pz, x]).unwrap().as_scalar().unwrap().clone();
    let d_py_x = d_eta.feed(&[&py, x]).unwrap().as_scalar().unwrap().clone();
    let eta_y = s.eta().pair(y).unwrap();
    let eta_z = s.eta().pair(z).unwrap();
    let rhs = Expr::sum([
        -g.inner(&n1, &px),
        Expr::int(-2) * d_pz_x * eta_y,
        Expr::int(2) * d_py_x * eta_z,
    ]);
    (lhs, rhs)
}

#[test]
fn nabla_phi_formula_against_field_evaluation() {
    let s = r31();
    let c = s.chart();
    let (lhs_t, rhs_t, _) = nabla_phi_sides(&s).unwrap();
    let x = field(c, &["1", "-2", "1/3"]);
    let y = field(c, &["0", "3", "-1"]);
    let z = field(c, &["2", "1", "1"]);
    let (lhs, rhs) = nabla_phi_by_fields(&s, &x, &y, &z);
    assert!(zero_test(&(&lhs - &rhs), 8, 0, 1e-9).unwrap().is_zero());
    let lt = lhs_t.feed(&[&x, &y, &z]).unwrap();
    let rt = rhs_t.feed(&[&x, &y, &z]).unwrap();
    assert!(zero_test(&(lt.as_scalar().unwrap() - &lhs), 8, 0, 1e-9).unwrap().is_zero());
    assert!(zero_test(&(rt.as_scalar().unwrap() - &rhs), 8, 0, 1e-9).unwrap().is_zero());
    // X = ξ
    let (lhs, rhs) = nabla_phi_by_fields(&s, s.xi(), &y, &z);
    assert!(zero_test(&(lhs - rhs), 8, 0, 1e-9).unwrap().is_zero());
}

#[test]
fn nabla_phi_on_minus_distribution() {
    // (∇_X φ)Y = −2g(X,Y)ξ for X = Y = ∂3: −cosh ∂1 + sinh ∂2 = −½ξ
    let s = r31();
    let c = s.chart();
    let e3 = TensorField::coordinate_field(c, 2);
    let gamma = s.christoffel().unwrap();
    let d = covariant_derivative(s.phi(), gamma).unwrap().feed(&[&e3, &e3]).unwrap();
    assert_eq!(d, field(c, &["-cosh(x3)", "sinh(x3)", "0"]));
    assert_eq!(d, s.xi().scale(&Expr::ratio(-1, 2)));
}

#[test]
fn general_formula_holds_for_rescaled_structures() {
    for c in ["exp(x1)", "2 + sinh(x2)", "exp(x1 - x3)"] {
        let s = rescaled(&r31(), c);
        let v = validate(&s, &cfg());
        assert!(v.get("paracontact-condition").unwrap().is_fail());
        let r = check_nabla_phi(&s, &cfg()).unwrap();
        assert!(matches!(r.get("nabla-phi-paracontact"), Some(Verdict::Skipped { .. })));
        assert!(r.get("nabla-phi-general").unwrap().is_pass(), "{c}: {:?}", labels(&r));
    }
}

#[test]
fn one_third_normalization_is_off_by_three() {
    let s = rescaled(&r31(), "exp(x1)");
    let (lhs, _, full) = nabla_phi_sides(&s).unwrap();
    let df_terms = {
        // with dF = cyclic sum, lhs − full = 0; shrinking dF by ⅓ leaves ⅔ of the dF terms behind
        let (_, reduced, _) = nabla_phi_sides(&s).unwrap();
        let nt = n_tensors(&s);
        let base = TensorField::from_fn(s.chart(), 0, 3, |idx| reduced.get(idx) + nt.n2.get(&[idx[1], idx[2]]) * s.eta().get(&[idx[0]]));
        full.sub(&base).unwrap()
    };
    assert!(!is_zero(&df_terms));
    assert!(is_zero(&lhs.sub(&full).unwrap()));
    let third = full.sub(&df_terms.scale(&Expr::ratio(2, 3))).unwrap();
    assert!(!is_zero(&lhs.sub(&third).unwrap()));
}

#[test]
fn nabla_phi_requires_almost_paracontact_axioms() {
    let s = r31();
    let broken = s.with_eta(s.eta().scale(&Expr::int(2))).unwrap();
    assert!(matches!(check_nabla_phi(&broken, &cfg()), Err(ParacontactError::PrerequisiteFailed(_))));
}

#[test]
fn curvature_identity_on_catalog() {
    let r = check_curvature_identity(&r31(), &cfg());
    assert_eq!(r.get("curvature-identity"), Some(&Verdict::SymbolicPass));
    for e in catalog::all() {
        assert!(check_curvature_identity(&e.structure, &cfg()).passed(), "{}", e.name);
    }
    // both sides annihilate ξ
    for s in [r31(), heis()] {
        let (lhs, rhs) = curvature_identity_sides(&s).unwrap();
        assert!(is_zero(&lhs.apply(s.xi()).unwrap()));
        assert!(is_zero(&rhs.apply(s.xi()).unwrap()));
    }
}

#[test]
fn curvature_identity_heisenberg_numeric_oracle() {
    // R(ξ,X)ξ = −X on Ker η and h = 0, so both sides equal φ² on D
    let s = heis();
    let (lhs, rhs) = curvature_identity_sides(&s).unwrap();
    assert!(!xi_jacobi_operator(&s).unwrap().is_symbolically_zero());
    let mut sampler = ProbeSampler::new(4);
    for _ in 0..5 {
        let pt = sampler.point(s.chart().coords());
        let a = lhs.evaluate(&pt).unwrap();
        let b = rhs.evaluate(&pt).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }
}

#[test]
fn flat_diagnostics_on_the_flat_example() {
    let (split, r) = flat_diagnostics(&r31(), &cfg());
    assert_eq!(r.checks.len(), 15);
    for c in &r.checks {
        let expected = if c.name == "rank-h" { Verdict::NumericPass } else { Verdict::SymbolicPass };
        assert_eq!(c.verdict, expected, "{}", c.name);
    }
    let split = split.unwrap();
    let c = r31().chart().clone();
    let plus = &split.plus[0].field;
    let minus = &split.minus[0].field;
    // bases are determined up to scale
    let target_plus = field(&c, &["-sinh(x3)", "cosh(x3)", "0"]);
    let cross = |a: &TensorField, b: &TensorField| -> bool {
        (0..3).all(|i| (0..3).all(|j| zero_test(&(a.get(&[i]) * b.get(&[j]) - a.get(&[j]) * b.get(&[i])), 8, 0, 1e-9).unwrap().is_zero()))
    };
    assert!(cross(plus, &target_plus));
    assert!(cross(minus, &TensorField::coordinate_field(&c, 2)));
}

#[test]
fn flat_diagnostics_pullback_pair() {
    let (split, r) = flat_diagnostics(&catalog::standard_pullback_pair().structure, &cfg());
    assert!(split.is_some());
    assert!(r.checks.iter().all(|c| c.verdict.is_pass()), "{:?}", labels(&r));
}

#[test]
fn flat_diagnostics_skip_for_heisenberg() {
    let (split, r) = flat_diagnostics(&heis(), &cfg());
    assert!(split.is_none());
    assert!(r.passed());
    assert!(r.checks.iter().all(|c| matches!(c.verdict, Verdict::Skipped { .. })));
    let reason = match &r.checks[1].verdict {
        Verdict::Skipped { reason } => reason.clone(),
        _ => unreachable!(),
    };
    assert!(reason.contains("rank(h) = 0"), "{reason}");
}

#[test]
fn flat_diagnostics_is_seed_independent() {
    let base = labels(&flat_diagnostics(&r31(), &cfg()).1);
    for seed in 1..5 {
        let c = CheckConfig { seed, ..cfg() };
        assert_eq!(labels(&flat_diagnostics(&r31(), &c).1), base);
    }
}

#[test]
fn quoted_plus_field_is_not_an_eigenfield() {
    // sinh∂1 + cosh∂2 is not in Ker η, so it cannot lie in [+1]
    let s = r31();
    let c = s.chart();
    let v = field(c, &["sinh(x3)", "cosh(x3)", "0"]);
    assert_eq!(s.eta().pair(&v).unwrap(), p("sinh(x3)*cosh(x3)"));
    assert!(!equal(&s.h().apply(&v).unwrap(), &v));
}

fn shear_map(a: i64, b: i64, k: u32) -> SmoothMap {
    let src = Chart::new(["x", "y", "z"]).unwrap();
    let tgt = Chart::new(["x1", "x2", "x3"]).unwrap();
    SmoothMap::new(
        &src,
        &tgt,
        vec![p(&format!("x + {a}*y^{k} + sinh(z)")), p(&format!("y + {b}*z^2")), p("z")],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pulled_back_structures_satisfy_the_identities(a in -2i64..=2, b in -2i64..=2, k in 1u32..3) {
        let f = shear_map(a, b, k);
        let target = r31();
        let eta0 = crate::geometry::pullback_form(&f, target.eta()).unwrap();
        let s = catalog::pulled_back_structure(&f, &target, eta0).unwrap();
        let c = cfg();
        prop_assert!(validate(&s, &c).passed());
        let nt = n_tensors(&s);
        prop_assert!(is_zero(&nt.n2) && is_zero(&nt.n4));
        prop_assert!(equal(&nt.n3, &s.h().scale(&Expr::int(2))));
        prop_assert!(h_operator(&s, &c).1.passed());
        prop_assert!(check_nabla_phi(&s, &c).unwrap().passed());
        prop_assert!(check_curvature_identity(&s, &c).passed());
    }

    #[test]
    fn nijenhuis_is_antisymmetric(cs in prop::collection::vec(-2i64..=2, 9)) {
        let c = Chart::new(["x", "y", "z"]).unwrap();
        let basis = ["x", "y*z", "sinh(x)", "1", "z^2", "cosh(y)", "x*y", "exp(z)", "y"];
        let comps: Vec<Expr> = cs.iter().zip(basis).map(|(k, b)| Expr::int(*k) * p(b)).collect();
        let j = TensorField::new(&c, 1, 1, comps).unwrap();
        let n = nijenhuis(&j);
        for i in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    prop_assert!((n.get(&[i, a, b]) + n.get(&[i, b, a])).canonical().is_zero());
                }
            }
        }
    }
}
