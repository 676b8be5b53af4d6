use duality_core::scalar::{
    frac, int, normalize, Chart, OpaqueRegistry, RatFunc, ScalarExpr, Symbol, Value,
};
use duality_core::vecfield::{
    cauchy_characteristic_at, check_contact, contact_coefficient, derived_flag,
    exterior_derivative, exterior_derivative2, lie_bracket, rank_at, reduce_mod, Frame, OneForm,
    Reduction, VectorField,
};
use proptest::prelude::*;

fn reg() -> OpaqueRegistry {
    OpaqueRegistry::new()
}

fn q(n: i64) -> Value {
    Value::Rational(int(n))
}

fn origin(n: usize) -> Vec<Value> {
    vec![q(0); n]
}

fn hc_chart() -> Chart {
    Chart::new(&["x", "y", "y1", "y2", "z"]).unwrap()
}

fn hc() -> (VectorField, VectorField) {
    let c = hc_chart();
    (
        VectorField::parse(&c, &reg(), &["1", "y1", "y2", "0", "y2^2"]).unwrap(),
        VectorField::parse(&c, &reg(), &["0", "0", "0", "1", "0"]).unwrap(),
    )
}

#[test]
fn constant_fields_commute() {
    let c = Chart::new(&["x", "y"]).unwrap();
    let b = lie_bracket(
        &VectorField::coordinate(&c, 0),
        &VectorField::coordinate(&c, 1),
    )
    .unwrap();
    assert!(b.is_zero());
}

#[test]
fn hilbert_cartan_brackets() {
    let c = hc_chart();
    let (e1, e2) = hc();
    let e3 = lie_bracket(&e1, &e2).unwrap();
    assert_eq!(
        e3,
        VectorField::parse(&c, &reg(), &["0", "0", "-1", "0", "-2*y2"]).unwrap()
    );
    let e4 = lie_bracket(&e1, &e3).unwrap();
    assert_eq!(e4, VectorField::coordinate(&c, 1));
    let e5 = lie_bracket(&e2, &e3).unwrap();
    assert_eq!(
        e5,
        VectorField::coordinate(&c, 4).scale(&RatFunc::constant(int(-2)))
    );
    assert_eq!(rank_at(&[e1, e2, e3, e4, e5], &origin(5)).unwrap(), 5);
}

#[test]
fn prolongation_bracket_is_minus_eta2() {
    let c = hc_chart().extended("t").unwrap();
    let (e1, e2) = hc();
    let (e1, e2) = (e1.lift(&c).unwrap(), e2.lift(&c).unwrap());
    let t = RatFunc::var(&Symbol::new("t"));
    let z1 = e1.add(&e2.scale(&t)).unwrap();
    let z2 = VectorField::coordinate(&c, 5);
    assert_eq!(lie_bracket(&z1, &z2).unwrap(), e2.neg());
}

#[test]
fn rank_examples() {
    let c = Chart::new(&["x", "y"]).unwrap();
    let dx = VectorField::coordinate(&c, 0);
    let dy = VectorField::coordinate(&c, 1);
    let s = dx.add(&dy).unwrap();
    assert_eq!(rank_at(&[dx, dy, s], &origin(2)).unwrap(), 2);
    assert_eq!(rank_at(&[], &origin(2)).unwrap(), 0);
}

#[test]
fn derived_flags() {
    let c = hc_chart();
    let (e1, e2) = hc();
    let f = derived_flag(&Frame::new(&c, vec![e1, e2], origin(5)).unwrap(), 5).unwrap();
    assert_eq!(f.growth(), vec![2, 3, 5]);
    assert!(f.stabilized());

    let c2 = Chart::new(&["x", "y", "z"]).unwrap();
    let inv = Frame::new(
        &c2,
        vec![
            VectorField::coordinate(&c2, 0),
            VectorField::coordinate(&c2, 1),
        ],
        origin(3),
    )
    .unwrap();
    let f = derived_flag(&inv, 4).unwrap();
    assert_eq!(f.growth(), vec![2]);
    assert!(f.stabilized());
}

#[test]
fn dependent_frame_rejected() {
    let c = Chart::new(&["x", "y"]).unwrap();
    let dx = VectorField::coordinate(&c, 0);
    assert!(Frame::new(&c, vec![dx.clone(), dx], origin(2)).is_err());
}

#[test]
fn reduce_mod_examples() {
    let c = Chart::new(&["x", "y"]).unwrap();
    let dx = VectorField::coordinate(&c, 0);
    let dy = VectorField::coordinate(&c, 1);
    let frame = Frame::new(&c, vec![dx.clone(), dy.clone()], origin(2)).unwrap();
    assert_eq!(
        reduce_mod(&dx.add(&dy).unwrap(), &frame, &origin(2)).unwrap(),
        Reduction::Member(vec![q(1), q(1)])
    );

    // ∂z against ⟨η1, η2, η3, η4 + tη5, ∂t⟩ on Z.
    let z = hc_chart().extended("t").unwrap();
    let (e1, e2) = hc();
    let e3 = lie_bracket(&e1, &e2).unwrap();
    let e4 = lie_bracket(&e1, &e3).unwrap();
    let e5 = lie_bracket(&e2, &e3).unwrap();
    let t = RatFunc::var(&Symbol::new("t"));
    let lift = |v: &VectorField| v.lift(&z).unwrap();
    let w = lift(&e4).add(&lift(&e5).scale(&t)).unwrap();
    let frame3 = Frame::new(
        &z,
        vec![
            lift(&e1),
            lift(&e2),
            lift(&e3),
            w,
            VectorField::coordinate(&z, 5),
        ],
        origin(6),
    )
    .unwrap();
    assert!(
        !reduce_mod(&VectorField::coordinate(&z, 4), &frame3, &origin(6))
            .unwrap()
            .is_member()
    );

    let z1 = lift(&e1).add(&lift(&e2).scale(&t)).unwrap();
    let z2 = VectorField::coordinate(&z, 5);
    let frame1 = Frame::new(&z, vec![z1, z2, lift(&e2)], origin(6)).unwrap();
    assert_eq!(
        reduce_mod(&lift(&e2).neg(), &frame1, &origin(6)).unwrap(),
        Reduction::Member(vec![q(0), q(0), q(-1)])
    );
}

fn contact_chart() -> Chart {
    Chart::new(&["x1", "x2", "x3", "x4", "x5"]).unwrap()
}

fn contact_form() -> OneForm {
    let c = contact_chart();
    OneForm::new(
        &c,
        ["0", "-x3", "2*x2", "-x1", "1"]
            .iter()
            .map(|s| duality_core::scalar::parse_expr(s, &c, &reg()).unwrap())
            .collect(),
    )
    .unwrap()
}

#[test]
fn exterior_derivative_of_contact_form() {
    let w = exterior_derivative(&contact_form()).unwrap();
    let comps: Vec<(usize, usize, String)> = w
        .components()
        .into_iter()
        .map(|(i, j, e)| (i, j, e.to_string()))
        .collect();
    assert_eq!(
        comps,
        vec![(0, 3, "-1".to_string()), (1, 2, "3".to_string())]
    );
    let c = contact_chart();
    let dx1 = OneForm::new(&c, vec![1.into(), 0.into(), 0.into(), 0.into(), 0.into()]).unwrap();
    assert!(exterior_derivative(&dx1).unwrap().is_zero());
}

#[test]
fn flat_cone_generator_is_horizontal() {
    let c = Chart::new(&["x1", "x2", "x3", "x4", "x5", "th"]).unwrap();
    let z2 = VectorField::parse(
        &c,
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
    let alpha = contact_form().lift(&c).unwrap();
    assert!(alpha.pair(&z2).unwrap().is_zero_literal());
}

#[test]
fn contact_checks() {
    let c = contact_chart();
    assert_eq!(
        contact_coefficient(&contact_form()).unwrap(),
        ScalarExpr::integer(-6)
    );
    assert!(check_contact(&contact_form(), &origin(5)).unwrap());
    let p = |s: [&str; 5]| {
        OneForm::new(
            &c,
            s.iter()
                .map(|x| duality_core::scalar::parse_expr(x, &c, &reg()).unwrap())
                .collect(),
        )
        .unwrap()
    };
    assert!(!check_contact(&p(["0", "0", "0", "0", "1"]), &origin(5)).unwrap());
    assert!(!check_contact(&p(["0", "0", "-x4", "0", "1"]), &origin(5)).unwrap());
}

#[test]
fn cauchy_characteristics() {
    let z = hc_chart().extended("t").unwrap();
    let (e1, e2) = hc();
    let t = RatFunc::var(&Symbol::new("t"));
    let e1 = e1.lift(&z).unwrap();
    let e2 = e2.lift(&z).unwrap();
    let z1 = e1.add(&e2.scale(&t)).unwrap();
    let z2 = VectorField::coordinate(&z, 5);
    let sub = Frame::new(&z, vec![z1.clone(), z2.clone()], origin(6)).unwrap();
    let amb = Frame::new(&z, vec![z1, z2, e2], origin(6)).unwrap();
    let sol = cauchy_characteristic_at(&sub, &amb, &origin(6)).unwrap();
    assert_eq!(sol, vec![vec![q(0), q(1)]]);

    let c = Chart::new(&["x", "y", "z"]).unwrap();
    let s = Frame::new(
        &c,
        vec![
            VectorField::coordinate(&c, 0),
            VectorField::coordinate(&c, 1),
        ],
        origin(3),
    )
    .unwrap();
    assert_eq!(
        cauchy_characteristic_at(&s, &s, &origin(3)).unwrap().len(),
        2
    );
}

fn poly_coeff() -> impl Strategy<Value = ScalarExpr> {
    // Random polynomial of degree ≤ 3 in up to four variables.
    prop::collection::vec((-3i64..=3, 0usize..4, 0u32..=2, 0usize..4, 0u32..=1), 1..4).prop_map(
        |terms| {
            let vars = ["a", "b", "c", "d"];
            ScalarExpr::sum(
                terms
                    .into_iter()
                    .map(|(k, i, e, j, f)| {
                        ScalarExpr::product(vec![
                            ScalarExpr::integer(k),
                            ScalarExpr::var(&Symbol::new(vars[i])).pow(e as i64),
                            ScalarExpr::var(&Symbol::new(vars[j])).pow(f as i64),
                        ])
                    })
                    .collect(),
            )
        },
    )
}

fn pchart() -> Chart {
    Chart::new(&["a", "b", "c", "d"]).unwrap()
}

fn pfield() -> impl Strategy<Value = VectorField> {
    prop::collection::vec(poly_coeff(), 4).prop_map(|cs| VectorField::new(&pchart(), cs).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn jacobi_identity(u in pfield(), v in pfield(), w in pfield()) {
        let a = lie_bracket(&lie_bracket(&u, &v).unwrap(), &w).unwrap();
        let b = lie_bracket(&lie_bracket(&v, &w).unwrap(), &u).unwrap();
        let c = lie_bracket(&lie_bracket(&w, &u).unwrap(), &v).unwrap();
        prop_assert!(a.add(&b).unwrap().add(&c).unwrap().is_zero());
    }

    #[test]
    fn antisymmetry_and_leibniz(u in pfield(), v in pfield(), f in poly_coeff()) {
        prop_assert_eq!(lie_bracket(&u, &v).unwrap(), lie_bracket(&v, &u).unwrap().neg());
        let f = RatFunc::from_expr(&f).unwrap();
        let lhs = lie_bracket(&u.scale(&f), &v).unwrap();
        let rhs = lie_bracket(&u, &v).unwrap().scale(&f).sub(&u.scale(&v.apply(&f).unwrap())).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn d_squared_vanishes(cs in prop::collection::vec(poly_coeff(), 4)) {
        let alpha = OneForm::new(&pchart(), cs).unwrap();
        let dd = exterior_derivative2(&exterior_derivative(&alpha).unwrap()).unwrap();
        prop_assert!(dd.iter().all(RatFunc::is_zero));
    }

    #[test]
    fn growth_invariant_under_constant_reframing(
        m in prop::collection::vec((-4i64..=4, 1i64..=3), 4)
    ) {
        let det = frac(m[0].0, m[0].1) * frac(m[3].0, m[3].1) - frac(m[1].0, m[1].1) * frac(m[2].0, m[2].1);
        prop_assume!(det != int(0));
        let (e1, e2) = hc();
        let k = |i: usize| RatFunc::constant(frac(m[i].0, m[i].1));
        let f1 = e1.scale(&k(0)).add(&e2.scale(&k(1))).unwrap();
        let f2 = e1.scale(&k(2)).add(&e2.scale(&k(3))).unwrap();
        let fr = Frame::new(&hc_chart(), vec![f1, f2], origin(5)).unwrap();
        prop_assert_eq!(derived_flag(&fr, 5).unwrap().growth(), vec![2, 3, 5]);
    }
}

#[test]
fn normalized_coefficients_print_in_chart_order() {
    let (e1, _) = hc();
    let printed: Vec<String> = e1.coeffs().iter().map(|c| c.to_string()).collect();
    assert_eq!(printed, vec!["1", "y1", "y2", "0", "y2^2"]);
    assert_eq!(normalize(&e1.coeffs()[4]).unwrap().to_string(), "y2^2");
}
