use std::collections::BTreeMap;

use duality_core::conedual::{
    builtin_model, check_lagrangian, check_nondegenerate, check_osculating_condition, cubic_a,
    noncubic_bc, osculating, prolong_cone, solve_u, standard_contact_form, x_chart, ConeError,
    ConeFamily, DirectionField, Model, THETA,
};
use duality_core::distduality::{symbol_algebra_at, verify_pseudo_product};
use duality_core::scalar::{
    frac, int, is_zero, parse_expr, Chart, OpaqueRegistry, RatFunc, ScalarExpr, Symbol, Value,
    ZeroTest,
};
use duality_core::vecfield::{box_points, lie_bracket, rank_at, OneForm, VectorField};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reg() -> OpaqueRegistry {
    OpaqueRegistry::new()
}

fn z_chart() -> Chart {
    x_chart().extended(THETA).unwrap()
}

fn zexpr(s: &str) -> ScalarExpr {
    parse_expr(s, &z_chart(), &reg()).unwrap()
}

fn flat() -> ConeFamily {
    cubic_a(&ScalarExpr::zero()).unwrap()
}

fn bc(b: &str, c: &str) -> ConeFamily {
    noncubic_bc(&zexpr(b), &zexpr(c)).unwrap()
}

fn origin(n: usize) -> Vec<Value> {
    vec![Value::Rational(int(0)); n]
}

#[test]
fn flat_generator_and_derivatives() {
    let f = flat();
    let z = z_chart();
    let expect2 = VectorField::parse(
        &z,
        &reg(),
        &[
            "1",
            "th",
            "th^2",
            "th^3",
            "x3*th - 2*x2*th^2 + x1*th^3",
            "0",
        ],
    )
    .unwrap();
    assert_eq!(f.zeta2(), expect2);
    let [z1, _, z3, _, _] = f.frame().unwrap();
    assert_eq!(z1, VectorField::coordinate(&z, 5));
    let expect3 = VectorField::parse(
        &z,
        &reg(),
        &["0", "1", "2*th", "3*th^2", "x3 - 4*x2*th + 3*x1*th^2", "0"],
    )
    .unwrap();
    assert_eq!(z3, expect3);
    assert_eq!(lie_bracket(&z1, &f.zeta2()).unwrap(), z3);
}

#[test]
fn nondegeneracy() {
    assert!(check_nondegenerate(&flat(), &origin(5)).unwrap());
    assert!(check_nondegenerate(&bc("th^3", "3/2*th^4"), &origin(5)).unwrap());
    let degenerate = ConeFamily::new(
        &x_chart(),
        THETA,
        [zexpr("th"), zexpr("th^2"), zexpr("0"), zexpr("0")],
        standard_contact_form(),
        origin(5),
        Value::Rational(int(0)),
    )
    .unwrap();
    assert!(!check_nondegenerate(&degenerate, &origin(5)).unwrap());
    assert_eq!(
        osculating(&degenerate, &DirectionField::constant(int(0))).unwrap_err(),
        ConeError::OsculatingRank {
            expected: 4,
            rank: 3
        }
    );
}

#[test]
fn flat_is_lagrangian() {
    let r = check_lagrangian(&flat(), &DirectionField::constant(int(0))).unwrap();
    assert!(r.pass && r.contact && r.all_sections);
    assert_eq!(r.dalpha, ZeroTest::ProvablyZero);
    assert_eq!(r.alpha_zeta2, ZeroTest::ProvablyZero);
    assert_eq!(r.certified_box.dim(), 6);
}

#[test]
fn wrong_form_is_not_lagrangian() {
    let c = x_chart();
    let dx5 = OneForm::new(
        &c,
        ["0", "0", "0", "0", "1"]
            .iter()
            .map(|s| parse_expr(s, &c, &reg()).unwrap())
            .collect(),
    )
    .unwrap();
    let f = flat();
    let g = ConeFamily::new(
        &c,
        THETA,
        f.components().try_into().unwrap(),
        dx5,
        origin(5),
        Value::Rational(int(0)),
    )
    .unwrap();
    let r = check_lagrangian(&g, &DirectionField::constant(int(0))).unwrap();
    assert!(!r.pass);
    assert!(!r.contact);
}

#[test]
fn compliant_family_lagrangian_for_constant_sections() {
    let f = bc("th^3", "3/2*th^4");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let s = DirectionField::constant(frac(rng.random_range(-30..=30), 64));
        let r = check_lagrangian(&f, &s).unwrap();
        assert!(r.pass);
        assert_eq!(r.dalpha, ZeroTest::ProvablyZero);
    }
}

#[test]
fn flat_osculating_flag() {
    let f = flat();
    let d = osculating(&f, &DirectionField::constant(int(0))).unwrap();
    assert!(d.s_independent);
    let base = origin(6);
    let alpha = f.alpha().lift(f.z_chart()).unwrap();
    for v in &d.o3 {
        let a = alpha.pair_rf(v).unwrap();
        let a0 = a
            .eval(&duality_core::vecfield::assignment(f.z_chart(), &base))
            .unwrap();
        assert_eq!(a0.to_f64(), 0.0);
    }
    // O⁽³⁾ does not depend on the section.
    let mut union = d.o3.clone();
    for s in ["1/8", "x2"] {
        let s = DirectionField::new(parse_expr(s, &x_chart(), &reg()).unwrap());
        union.extend(osculating(&f, &s).unwrap().o3);
    }
    assert_eq!(rank_at(&union, &base).unwrap(), 4);
}

#[test]
fn osculating_condition_outcomes() {
    let f = flat();
    let bx = f.default_box().unwrap();
    let r = check_osculating_condition(&f, &bx).unwrap();
    assert!(r.pass);
    assert!(r.bracket.is_zero());

    let g = bc("th^3", "3/2*th^4");
    assert!(
        check_osculating_condition(&g, &g.default_box().unwrap())
            .unwrap()
            .pass
    );

    let h = bc("th^3", "th^4");
    let r = check_osculating_condition(&h, &h.default_box().unwrap()).unwrap();
    assert!(!r.pass);
    assert!(r.witness.is_some());
    // Every residual component is a multiple of c′ − 3θb′ + 3b = −2θ³ by a unit near the base.
    let w = RatFunc::from_expr(&zexpr("-2*th^3")).unwrap();
    for (_, e) in &r.residual {
        let q = RatFunc::from_expr(e).unwrap().div(&w).unwrap();
        let v = q
            .eval(&duality_core::vecfield::assignment(h.z_chart(), h.base()))
            .unwrap();
        assert_ne!(v.to_f64(), 0.0, "{e}");
    }
}

#[test]
fn cubic_a_bracket_matches_hand_computation() {
    let f = cubic_a(&zexpr("x1")).unwrap();
    let [_, z2, z3, _, _] = f.frame().unwrap();
    let b = lie_bracket(&z2, &z3).unwrap();
    let expect =
        VectorField::parse(&z_chart(), &reg(), &["0", "0", "0", "-3", "-3*x1", "0"]).unwrap();
    assert_eq!(b, expect);
    let r = check_osculating_condition(&f, &f.default_box().unwrap()).unwrap();
    assert!(!r.pass);
    assert!(f.is_cubic().unwrap());
    assert!(!bc("th^4", "0").is_cubic().unwrap());
}

/// c with c′ = 3θb′ − 3b and c(0) = 0, for polynomial b = Σ b_k θ^k.
fn compliant_c(b: &[(u32, BigRational)]) -> String {
    let terms: Vec<String> = b
        .iter()
        .map(|(k, bk)| {
            let coef = bk * BigRational::new((3 * (*k as i64 - 1)).into(), (*k as i64 + 1).into());
            format!("({coef})*th^{}", k + 1)
        })
        .collect();
    terms.join(" + ")
}

fn poly_text(terms: &[(u32, BigRational)]) -> String {
    terms
        .iter()
        .map(|(k, c)| format!("({c})*th^{k}"))
        .collect::<Vec<_>>()
        .join(" + ")
}

#[test]
fn bc_decision_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let th = Symbol::new(THETA);
    let mut passes = 0;
    for _ in 0..50 {
        let b: Vec<(u32, BigRational)> = (3..=5)
            .map(|k| (k, frac(rng.random_range(-4..=4), rng.random_range(1..=3))))
            .collect();
        let c = if rng.random_bool(0.5) {
            compliant_c(&b)
        } else {
            let c: Vec<(u32, BigRational)> = (4..=6)
                .map(|k| (k, frac(rng.random_range(-4..=4), rng.random_range(1..=3))))
                .collect();
            poly_text(&c)
        };
        let (bt, ct) = (poly_text(&b), c);
        let (be, ce) = (zexpr(&bt), zexpr(&ct));
        // Oracle: c′ − 3θb′ + 3b.
        let oracle = RatFunc::from_expr(&ce)
            .unwrap()
            .differentiate(&th)
            .unwrap()
            .sub(
                &RatFunc::var(&th)
                    .mul(&RatFunc::from_expr(&be).unwrap().differentiate(&th).unwrap())
                    .scale(&int(3)),
            )
            .add(&RatFunc::from_expr(&be).unwrap().scale(&int(3)));
        let f = noncubic_bc(&be, &ce).unwrap();
        let bx = f.default_box().unwrap();
        let expected = is_zero(&oracle.to_expr(f.z_chart()), &bx)
            .unwrap()
            .is_zero();
        let got = check_osculating_condition(&f, &bx).unwrap().pass;
        assert_eq!(got, expected, "b = {bt}, c = {ct}");
        passes += usize::from(got);
    }
    assert!(passes > 5 && passes < 45);
}

#[test]
fn u_solutions() {
    let f = flat();
    let bx = f.default_box().unwrap();
    let u = solve_u(&f, &bx).unwrap();
    assert!(u.expr.is_zero_literal());
    assert_eq!(u.self_check, ZeroTest::ProvablyZero);

    let g = bc("th^3", "3/2*th^4");
    let u = solve_u(&g, &g.default_box().unwrap()).unwrap();
    assert!(u.self_check.is_zero());
    assert!(u.max_residual <= 1e-9);

    let h = bc("th^3", "th^4");
    assert!(matches!(
        solve_u(&h, &h.default_box().unwrap()),
        Err(ConeError::Precondition(_))
    ));
}

#[test]
fn cone_prolongations_are_pseudo_products() {
    for f in [flat(), bc("th^3", "3/2*th^4")] {
        let bx = f.default_box().unwrap();
        let p = prolong_cone(&f, &bx).unwrap();
        let r = verify_pseudo_product(&p, &bx).unwrap();
        assert!(r.valid(), "{:?}", r.failed());
        assert!(symbol_algebra_at(&p, f.base()).unwrap().matches_model());
        for pt in box_points(f.z_chart(), &bx, f.base(), 20) {
            let s = symbol_algebra_at(&p, &pt).unwrap();
            assert!(s.matches_model(), "{:?}", s.first_failure());
        }
    }
    let h = cubic_a(&zexpr("x1")).unwrap();
    assert!(matches!(
        prolong_cone(&h, &h.default_box().unwrap()),
        Err(ConeError::Precondition(_))
    ));
}

#[test]
fn osculating_condition_invariant_under_affine_theta() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for f in [flat(), bc("th^3", "3/2*th^4"), bc("th^3", "th^4")] {
        let bx = f.default_box().unwrap();
        let expected = check_osculating_condition(&f, &bx).unwrap().pass;
        for _ in 0..5 {
            let mut lambda = frac(rng.random_range(-6..=6), 4);
            if lambda == int(0) {
                lambda = int(1);
            }
            let mu = frac(rng.random_range(-4..=4), 32);
            let g = f.reparametrize(&lambda, &mu).unwrap();
            let got = check_osculating_condition(&g, &g.default_box().unwrap())
                .unwrap()
                .pass;
            assert_eq!(got, expected);
        }
    }
}

#[test]
fn builtin_models() {
    let none = BTreeMap::new();
    let Model::Cone(f) = builtin_model("flat-cone", &none, &reg()).unwrap() else {
        panic!("cone expected");
    };
    let a0: BTreeMap<String, String> = [("a".to_string(), "0".to_string())].into();
    let Model::Cone(g) = builtin_model("cubic-a", &a0, &reg()).unwrap() else {
        panic!("cone expected");
    };
    assert_eq!(f.zeta2(), g.zeta2());
    let ok: BTreeMap<String, String> =
        [("b".into(), "th^3".into()), ("c".into(), "3/2*th^4".into())].into();
    assert!(builtin_model("noncubic-bc", &ok, &reg()).is_ok());
    let bad: BTreeMap<String, String> =
        [("b".into(), "th^2".into()), ("c".into(), "th^4".into())].into();
    assert!(matches!(
        builtin_model("noncubic-bc", &bad, &reg()),
        Err(ConeError::Order { found: 2, .. })
    ));
    assert!(matches!(
        builtin_model("hilbert-cartan", &none, &reg()).unwrap(),
        Model::Distribution(_)
    ));
    assert!(matches!(
        builtin_model("nope", &none, &reg()),
        Err(ConeError::UnknownModel(_))
    ));
}
