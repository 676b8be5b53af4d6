use duality_core::distduality::{
    check_235, prolong_235, solve_e, symbol_algebra_at, verify_pseudo_product, DistError,
    Distribution235, Failure, FiberChart, Prolongation, PseudoProductStructure,
};
use duality_core::scalar::{
    frac, int, Chart, OpaqueRegistry, RatFunc, SampleBox, ScalarExpr, Symbol, Value, ZeroTest,
};
use duality_core::vecfield::{box_around, box_points, lie_bracket, rank_at, VectorField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reg() -> OpaqueRegistry {
    OpaqueRegistry::new()
}

fn y_chart() -> Chart {
    Chart::new(&["x", "y", "y1", "y2", "z"]).unwrap()
}

fn origin(n: usize) -> Vec<Value> {
    vec![Value::Rational(int(0)); n]
}

fn model(z_coeff: &str) -> Distribution235 {
    let c = y_chart();
    let e1 = VectorField::parse(&c, &reg(), &["1", "y1", "y2", "0", z_coeff]).unwrap();
    let e2 = VectorField::parse(&c, &reg(), &["0", "0", "0", "1", "0"]).unwrap();
    Distribution235::new(&c, e1, e2, origin(5)).unwrap()
}

fn hc() -> Distribution235 {
    model("y2^2")
}

fn quarter() -> num_rational::BigRational {
    frac(1, 4)
}

fn z_box(p: &Prolongation) -> SampleBox {
    box_around(&p.chart, &p.base, &quarter()).unwrap()
}

fn hc_structure() -> (Prolongation, PseudoProductStructure) {
    let p = prolong_235(&hc(), &int(0), FiberChart::Affine).unwrap();
    let e = solve_e(&p, &z_box(&p)).unwrap();
    let s = PseudoProductStructure::from_prolongation(&p, &e).unwrap();
    (p, s)
}

#[test]
fn hilbert_cartan_is_235() {
    let d = hc();
    let bx = box_around(d.chart(), d.base(), &quarter()).unwrap();
    let r = check_235(&d, &bx).unwrap();
    assert!(r.pass);
    assert_eq!(r.growth, vec![2, 3, 5]);
    assert_eq!(r.samples, 32);
    let f = d.bracket_frame().unwrap();
    let c = y_chart();
    assert_eq!(
        f[2],
        VectorField::parse(&c, &reg(), &["0", "0", "-1", "0", "-2*y2"]).unwrap()
    );
    assert_eq!(f[3], VectorField::coordinate(&c, 1));
    assert_eq!(
        f[4],
        VectorField::parse(&c, &reg(), &["0", "0", "0", "0", "-2"]).unwrap()
    );
}

#[test]
fn involutive_pair_fails_235() {
    let c = y_chart();
    let d = Distribution235::new(
        &c,
        VectorField::coordinate(&c, 0),
        VectorField::coordinate(&c, 1),
        origin(5),
    )
    .unwrap();
    let bx = box_around(&c, d.base(), &quarter()).unwrap();
    let r = check_235(&d, &bx).unwrap();
    assert!(!r.pass);
    assert_eq!(r.growth, vec![2]);
    let (_, ranks) = r.witness.unwrap();
    assert_eq!(ranks, vec![2, 2, 2]);
}

#[test]
fn dependent_generators_rejected() {
    let c = y_chart();
    let e1 = VectorField::parse(&c, &reg(), &["1", "y1", "y2", "0", "y2^2"]).unwrap();
    let e2 = e1.scale(&RatFunc::from_expr(&ScalarExpr::integer(3)).unwrap());
    assert!(matches!(
        Distribution235::new(&c, e1, e2, origin(5)),
        Err(DistError::DependentGenerators)
    ));
}

#[test]
fn prolongation_of_hilbert_cartan() {
    let p = prolong_235(&hc(), &int(0), FiberChart::Affine).unwrap();
    assert_eq!(p.flag.growth(), vec![2, 3, 4, 5, 6]);
    assert_eq!(p.chart.vars()[5], Symbol::new("t"));
    let b = lie_bracket(&p.zeta1, &p.zeta2).unwrap();
    assert_eq!(b, p.eta[1].neg());
    let bx = z_box(&p);
    let d3 = p.d3_frame().unwrap();
    for pt in box_points(&p.chart, &bx, &p.base, 20) {
        assert_eq!(rank_at(&d3, &pt).unwrap(), 5);
        let mut union = d3.clone();
        union.extend(p.flag.level_fields(3).iter().cloned());
        assert_eq!(rank_at(&union, &pt).unwrap(), 5);
        let mut union2 = p.d2_frame();
        union2.extend(p.flag.level_fields(2).iter().cloned());
        assert_eq!(rank_at(&union2, &pt).unwrap(), 4);
        let mut union1 = p.d1_frame();
        union1.extend(p.flag.level_fields(1).iter().cloned());
        assert_eq!(rank_at(&union1, &pt).unwrap(), 3);
    }
    assert!(p
        .flag
        .check_constant_rank(&box_points(&p.chart, &bx, &p.base, 32))
        .unwrap()
        .is_none());
}

#[test]
fn antipodal_chart_prolongs() {
    let p = prolong_235(&hc(), &int(0), FiberChart::Antipodal).unwrap();
    assert_eq!(p.flag.growth(), vec![2, 3, 4, 5, 6]);
    assert_eq!(p.chart.vars()[5], Symbol::new("s"));
    let e = solve_e(&p, &z_box(&p)).unwrap();
    assert!(e.self_check.is_zero());
}

#[test]
fn hilbert_cartan_e_vanishes() {
    let p = prolong_235(&hc(), &int(0), FiberChart::Affine).unwrap();
    let bx = z_box(&p);
    let e = solve_e(&p, &bx).unwrap();
    let expr = e.expr.clone().unwrap();
    assert!(expr.is_zero_literal());
    assert_eq!(
        duality_core::scalar::is_zero(&expr, &bx).unwrap(),
        ZeroTest::ProvablyZero
    );
    assert_eq!(e.self_check, ZeroTest::ProvablyZero);
    assert!(e.warning.is_none());
}

/// Solves [ζ₁,w](p) + e[ζ₂,w](p) ∈ span(frame(p)) for e by least squares.
fn pointwise_e(p: &Prolongation, pt: &[Value]) -> f64 {
    let frame = p.d3_frame().unwrap();
    let w = p.fourth().unwrap();
    let a = lie_bracket(&p.zeta1, &w).unwrap().eval_f64(pt).unwrap();
    let b = lie_bracket(&p.zeta2, &w).unwrap().eval_f64(pt).unwrap();
    // Unknowns (e, c₁..c₅): e·b − Σ cᵢ fᵢ = −a.
    let mut m = DMatrix::<f64>::zeros(6, 6);
    for r in 0..6 {
        m[(r, 0)] = b[r];
    }
    for (j, f) in frame.iter().enumerate() {
        let v = f.eval_f64(pt).unwrap();
        for r in 0..6 {
            m[(r, j + 1)] = -v[r];
        }
    }
    let rhs = DVector::from_iterator(6, a.iter().map(|x| -x));
    m.lu().solve(&rhs).unwrap()[0]
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Value> {
    (0..n)
        .map(|_| Value::Rational(frac(rng.random_range(-250..=250), 1000)))
        .collect()
}

#[test]
fn perturbed_model_e_matches_pointwise_solve() {
    let p = prolong_235(&model("y2^2 + y1^3"), &int(0), FiberChart::Affine).unwrap();
    let bx = z_box(&p);
    let e = solve_e(&p, &bx).unwrap();
    assert!(e.self_check.is_zero());
    let expr = e.expr.clone().unwrap();
    let rf = RatFunc::from_expr(&expr).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let pt = random_point(&mut rng, 6);
        let a = duality_core::vecfield::assignment(&p.chart, &pt);
        let sym = rf.eval(&a).unwrap().to_f64();
        let num = pointwise_e(&p, &pt);
        assert!((sym - num).abs() <= 1e-9, "{sym} vs {num}");
    }
    let expected =
        RatFunc::from_expr(&duality_core::scalar::parse_expr("3*y1*y2", &p.chart, &reg()).unwrap())
            .unwrap();
    assert_eq!(rf, expected);
}

#[test]
fn hilbert_cartan_is_pseudo_product() {
    let (p, s) = hc_structure();
    let r = verify_pseudo_product(&s, &z_box(&p)).unwrap();
    assert!(r.valid(), "{:?}", r.failed());
    assert_eq!(r.conditions.len(), 7);
    let sym = symbol_algebra_at(&s, &p.base).unwrap();
    assert!(sym.matches_model(), "{:?}", sym.first_failure());
}

#[test]
fn swapped_roles_fail() {
    let (p, s) = hc_structure();
    let w = s.swapped().unwrap();
    let r = verify_pseudo_product(&w, &z_box(&p)).unwrap();
    // Only [K,L] = ∂E survives the exchange.
    assert_eq!(r.failed(), vec![2, 3, 4, 5, 6, 7]);
    let c2 = &r.conditions[1];
    assert!(matches!(
        c2.witness.as_ref().unwrap().failure,
        Failure::RankDeficit {
            rank: 3,
            expected: 4
        }
    ));
    for c in r.conditions.iter().filter(|c| !c.pass) {
        assert!(c.witness.is_some());
    }
    let sym = symbol_algebra_at(&w, &p.base).unwrap();
    assert!(!sym.matches_model());
    let rel = sym
        .relations
        .iter()
        .find(|r| r.label == "[e2,e3] = 0")
        .unwrap();
    assert!(!rel.holds);
}

#[test]
fn short_growth_rejected() {
    let d = hc();
    let c = d.chart().extended("w").unwrap();
    let s = PseudoProductStructure::new(
        &c,
        d.eta1().lift(&c).unwrap(),
        d.eta2().lift(&c).unwrap(),
        origin(6),
    )
    .unwrap();
    let bx = box_around(&c, &origin(6), &quarter()).unwrap();
    assert!(matches!(
        verify_pseudo_product(&s, &bx),
        Err(DistError::Growth { .. })
    ));
}

#[test]
fn k_lines_project_onto_d() {
    let (p, s) = hc_structure();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let y = random_point(&mut rng, 5);
        let mut images = Vec::new();
        for t in [frac(-1, 5), frac(0, 1), frac(1, 3)] {
            let mut pt = y.clone();
            pt.push(Value::Rational(t));
            images.push(s.k().eval_f64(&pt).unwrap()[..5].to_vec());
        }
        let d = p.distribution.clone();
        let mut rows: Vec<Vec<f64>> = images.clone();
        rows.push(d.eta1().eval_f64(&y).unwrap());
        rows.push(d.eta2().eval_f64(&y).unwrap());
        let m = DMatrix::from_row_slice(5, 5, &rows.concat());
        let rank_all = m.rank(1e-9);
        let hull = DMatrix::from_row_slice(3, 5, &images.concat()).rank(1e-9);
        assert_eq!((hull, rank_all), (2, 2));
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

#[test]
fn k_line_invariant_under_reframing() {
    let lambda = frac(1, 3);
    let d = hc();
    let c = d.chart().clone();
    let e2 = d
        .eta2()
        .add(&d.eta1().scale(&RatFunc::constant(lambda.clone())))
        .unwrap();
    let d2 = Distribution235::new(&c, d.eta1().clone(), e2, origin(5)).unwrap();
    for (dist, label) in [(&d, "orig"), (&d2, "reframed")] {
        let bx = box_around(&c, &origin(5), &quarter()).unwrap();
        assert!(check_235(dist, &bx).unwrap().pass, "{label}");
    }
    let p = prolong_235(&d, &int(0), FiberChart::Affine).unwrap();
    let p2 = prolong_235(&d2, &int(0), FiberChart::Affine).unwrap();
    let k = solve_e(&p, &z_box(&p)).unwrap().k_generator(&p).unwrap();
    let k2 = solve_e(&p2, &z_box(&p2)).unwrap().k_generator(&p2).unwrap();
    let l = duality_core::scalar::rational_to_f64(&lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let y = random_point(&mut rng, 5);
        let tp = frac(rng.random_range(-250..=250), 1000);
        let tpf = duality_core::scalar::rational_to_f64(&tp);
        let t = &tp / (int(1) + &lambda * &tp);
        let mut pt2 = y.clone();
        pt2.push(Value::Rational(tp));
        let mut pt = y.clone();
        pt.push(Value::Rational(t));
        let mut v2 = k2.eval_f64(&pt2).unwrap();
        v2[5] /= (1.0 + l * tpf).powi(2);
        let v = k.eval_f64(&pt).unwrap();
        let (u, u2) = (unit(&v), unit(&v2));
        let sign = if u.iter().zip(&u2).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        let err = u
            .iter()
            .zip(&u2)
            .map(|(a, b)| (a - sign * b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-9, "{err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn swap_always_fails(a in -3i64..=3, b in -3i64..=3, c in -3i64..=3) {
        let zc = format!("y2^2 + {a}*y1^3 + {b}*x*y1*y2 + {c}*y^2");
        let p = prolong_235(&model(&zc), &int(0), FiberChart::Affine).unwrap();
        let bx = z_box(&p);
        let e = solve_e(&p, &bx).unwrap();
        prop_assert!(e.self_check.is_zero());
        let s = PseudoProductStructure::from_prolongation(&p, &e).unwrap();
        prop_assert!(verify_pseudo_product(&s, &bx).unwrap().valid());
        let w = s.swapped().unwrap();
        prop_assert!(!verify_pseudo_product(&w, &bx).unwrap().valid());
        prop_assert!(p.flag.check_constant_rank(&box_points(&p.chart, &bx, &p.base, 32)).unwrap().is_none());
    }
}
