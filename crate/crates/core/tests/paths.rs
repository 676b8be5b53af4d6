use duality_core::conedual::{
    cubic_a, hilbert_cartan, noncubic_bc, prolong_cone, x_chart, y_chart, ConeFamily, THETA,
};
use duality_core::distduality::{
    prolong_235, solve_e, Distribution235, FiberChart, PseudoProductStructure,
};
use duality_core::paths::{
    annihilating_costate, classify_biextremal, hamiltonian, initial_costate, integrate_biextremal,
    integrate_flow, leaf_project, lift_leaf, singular_path_field, verify_duality,
    verify_duality_batch, BiExtremalOptions, Classification, ControlSystem, DualityOptions,
    PathError, Side, SliceSpec, StepControl,
};
use duality_core::scalar::{
    frac, int, parse_expr, Chart, OpaqueRegistry, RatFunc, ScalarExpr, Symbol, Value,
};
use duality_core::vecfield::{box_around, lie_bracket, VectorField};
use proptest::prelude::*;
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

fn q(n: i64, d: i64) -> Value {
    Value::Rational(frac(n, d))
}

fn origin(n: usize) -> Vec<Value> {
    vec![Value::Rational(int(0)); n]
}

fn flat() -> ConeFamily {
    cubic_a(&ScalarExpr::zero()).unwrap()
}

fn compliant_bc() -> ConeFamily {
    noncubic_bc(&zexpr("th^3"), &zexpr("3/2*th^4")).unwrap()
}

fn cone_structure(f: &ConeFamily) -> PseudoProductStructure {
    prolong_cone(f, &f.default_box().unwrap()).unwrap()
}

fn distribution(z_coeff: &str) -> Distribution235 {
    let c = y_chart();
    let e1 = VectorField::parse(&c, &reg(), &["1", "y1", "y2", "0", z_coeff]).unwrap();
    let e2 = VectorField::parse(&c, &reg(), &["0", "0", "0", "1", "0"]).unwrap();
    Distribution235::new(&c, e1, e2, origin(5)).unwrap()
}

fn dist_structure(d: &Distribution235) -> PseudoProductStructure {
    let p = prolong_235(d, &int(0), FiberChart::Affine).unwrap();
    let bx = box_around(&p.chart, &p.base, &frac(1, 4)).unwrap();
    let e = solve_e(&p, &bx).unwrap();
    PseudoProductStructure::from_prolongation(&p, &e).unwrap()
}

/// A rational point with |xᵢ| ≤ 1/4 and |fiber| ≤ 1/2.
fn random_start(rng: &mut ChaCha8Rng) -> Vec<Value> {
    let mut z: Vec<Value> = (0..5).map(|_| q(rng.random_range(-16..=16), 64)).collect();
    z.push(q(rng.random_range(-16..=16), 32));
    z
}

fn f64s(v: &[Value]) -> Vec<f64> {
    v.iter().map(Value::to_f64).collect()
}

fn same_function(a: &ScalarExpr, b: &ScalarExpr) -> bool {
    RatFunc::from_expr(a).unwrap() == RatFunc::from_expr(b).unwrap()
}

#[test]
fn hamiltonian_of_cone_system() {
    let f = flat();
    let cs = ControlSystem::from_cone(&f).unwrap();
    let h = hamiltonian(&cs).unwrap();
    let names: Vec<&str> = h.chart.vars().iter().map(Symbol::as_str).collect();
    assert_eq!(
        names,
        ["x1", "x2", "x3", "x4", "x5", "p1", "p2", "p3", "p4", "p5", "r", "th"]
    );
    let expect = parse_expr(
        "r*(p1 + th*p2 + th^2*p3 + th^3*p4 + (x3*th - 2*x2*th^2 + x1*th^3)*p5)",
        &h.chart,
        &reg(),
    )
    .unwrap();
    assert!(same_function(&h.h, &expect));
    // ∂H/∂pᵢ reproduces the dynamics.
    for (a, b) in h.dh_dp.iter().zip(cs.dynamics()) {
        assert!(same_function(a, &b));
    }
    let dr = parse_expr(
        "p1 + th*p2 + th^2*p3 + th^3*p4 + (x3*th - 2*x2*th^2 + x1*th^3)*p5",
        &h.chart,
        &reg(),
    )
    .unwrap();
    assert!(same_function(&h.dh_du[0], &dr));
}

#[test]
fn hamiltonian_of_single_field_and_distribution() {
    let c = x_chart();
    let cs = ControlSystem::from_frame(&c, &[VectorField::coordinate(&c, 0)])
        .unwrap()
        .with_gauge("u1", 1.0)
        .unwrap();
    let h = hamiltonian(&cs).unwrap();
    let expect = parse_expr("u1*p1", &h.chart, &reg()).unwrap();
    assert!(same_function(&h.h, &expect));

    let d = hilbert_cartan();
    let cs = ControlSystem::from_distribution(&d).unwrap();
    let h = hamiltonian(&cs).unwrap();
    let expect = parse_expr(
        "u1*(p1 + y1*p2 + y2*p3 + y2^2*p5) + u2*p4",
        &h.chart,
        &reg(),
    )
    .unwrap();
    assert!(same_function(&h.h, &expect));
    assert!(cs.linear_fields().is_some());
}

#[test]
fn costate_name_clash_is_avoided() {
    let c = Chart::new(&["p1", "a", "b"]).unwrap();
    let cs = ControlSystem::from_frame(&c, &[VectorField::coordinate(&c, 1)]).unwrap();
    let h = hamiltonian(&cs).unwrap();
    assert_eq!(h.chart.dim(), 7);
    assert!(!h.costates.contains(&Symbol::new("p1")));
}

#[test]
fn flat_cone_biextremal_exists() {
    let f = flat();
    let cs = ControlSystem::from_cone(&f).unwrap();
    let u0 = [q(1, 1), q(0, 1)];
    let p0 = initial_costate(&cs, &origin(5), &u0).unwrap();
    let tr = integrate_biextremal(
        &cs,
        &[0.0; 5],
        &p0,
        &[1.0, 0.0],
        0.5,
        &BiExtremalOptions::default(),
    )
    .unwrap();
    assert_eq!(tr.times.len(), 65);
    assert!((tr.times[64] - 0.5).abs() < 1e-15);
    assert!(tr.max_residual() <= 1e-9);
    for p in &tr.costates {
        assert!((p.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
    }
    // The cone line through θ = 0 is the x₁-axis.
    let last = tr.states.last().unwrap();
    assert!((last[0] - 0.5).abs() < 1e-12);
    assert!(last[1..].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn hilbert_cartan_biextremal_follows_eta1() {
    let d = hilbert_cartan();
    let cs = ControlSystem::from_distribution(&d).unwrap();
    let u0 = [q(1, 1), q(0, 1)];
    let p0 = initial_costate(&cs, &origin(5), &u0).unwrap();
    let tr = integrate_biextremal(
        &cs,
        &[0.0; 5],
        &p0,
        &[1.0, 0.0],
        0.5,
        &BiExtremalOptions::default(),
    )
    .unwrap();
    assert!(tr.max_residual() <= 1e-9);
    for (t, (x, u)) in tr.times.iter().zip(tr.states.iter().zip(&tr.controls)) {
        assert!((x[0] - t).abs() < 1e-12);
        assert!(x[1..].iter().all(|v| v.abs() < 1e-12));
        assert!((u[0] - 1.0).abs() < 1e-12 && u[1].abs() < 1e-12);
    }
}

#[test]
fn zero_costate_is_rejected() {
    let cs = ControlSystem::from_cone(&flat()).unwrap();
    let err = integrate_biextremal(
        &cs,
        &[0.0; 5],
        &[0.0; 5],
        &[1.0, 0.0],
        0.5,
        &BiExtremalOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, PathError::Precondition(_)));
}

#[test]
fn off_constraint_start_is_rejected() {
    let cs = ControlSystem::from_cone(&flat()).unwrap();
    // p = dx₂ annihilates ζ₂ at θ = 0 but not ∂_θζ₂.
    let err = integrate_biextremal(
        &cs,
        &[0.0; 5],
        &[0.0, 1.0, 0.0, 0.0, 0.0],
        &[1.0, 0.0],
        0.5,
        &BiExtremalOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, PathError::Precondition(_)), "{err:?}");
}

#[test]
fn path_fields() {
    let p = cone_structure(&flat());
    let z = z_chart();
    let [_, z2, ..] = flat().frame().unwrap();
    assert_eq!(singular_path_field(&p, Side::L), z2);
    assert_eq!(
        singular_path_field(&p, Side::K),
        VectorField::coordinate(&z, 5)
    );

    let s = dist_structure(&hilbert_cartan());
    let k = singular_path_field(&s, Side::K);
    let expect =
        VectorField::parse(s.chart(), &reg(), &["1", "y1", "y2", "t", "y2^2", "0"]).unwrap();
    assert_eq!(k, expect);

    assert_eq!("K".parse::<Side>().unwrap(), Side::K);
    assert_eq!("L".parse::<Side>().unwrap(), Side::L);
    assert_eq!(
        "M".parse::<Side>().unwrap_err(),
        PathError::InvalidSide("M".into())
    );
}

#[test]
fn leaf_projection_examples() {
    let s = dist_structure(&hilbert_cartan());
    let dt = singular_path_field(&s, Side::L);
    let slice = SliceSpec {
        coordinate: Symbol::new("t"),
        level: 0.0,
    };
    let z0 = [0.1, -0.2, 0.05, 0.0, 0.2, 0.25];
    let z = leaf_project(&dt, &slice, &z0, 1.0).unwrap();
    for i in 0..5 {
        assert!((z[i] - z0[i]).abs() < 1e-12);
    }
    assert!(z[5].abs() <= 1e-10);
    // The flow runs backward when the slice lies behind.
    let z = leaf_project(&dt, &slice, &[0.0, 0.0, 0.0, 0.0, 0.0, -0.3], 1.0).unwrap();
    assert!(z[5].abs() <= 1e-10);

    let p = cone_structure(&flat());
    let k = singular_path_field(&p, Side::K);
    let th = SliceSpec {
        coordinate: Symbol::new(THETA),
        level: 0.0,
    };
    let z0 = [0.2, 0.1, -0.1, 0.05, 0.0, 0.4];
    let z = leaf_project(&k, &th, &z0, 1.0).unwrap();
    assert!(z[..5].iter().zip(&z0).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(z[5].abs() <= 1e-10);

    let parallel = SliceSpec {
        coordinate: Symbol::new("x"),
        level: 0.0,
    };
    assert_eq!(
        leaf_project(&dt, &parallel, &[0.25, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0).unwrap_err(),
        PathError::Tangential
    );
    assert_eq!(
        leaf_project(&dt, &slice, &[0.0, 0.0, 0.0, 0.0, 0.0, 2.0], 1.0).unwrap_err(),
        PathError::NoCrossing
    );
}

/// The cone line through (a, θ) at fixed θ, parametrized by x₁.
fn flat_line(a: &[f64], c: f64, x1: f64) -> Vec<f64> {
    let s = x1 - a[0];
    vec![
        a[0] + s,
        a[1] + c * s,
        a[2] + c * c * s,
        a[3] + c.powi(3) * s,
        a[4] + (a[2] * c - 2.0 * a[1] * c * c + a[0] * c.powi(3)) * s,
    ]
}

#[test]
fn flat_cone_duality() {
    let f = flat();
    let p = cone_structure(&f);
    let cs = ControlSystem::from_cone(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut starts = vec![origin(6)];
    starts.extend((0..5).map(|_| random_start(&mut rng)));
    let opts = DualityOptions::default();
    for (z0, r) in starts
        .iter()
        .zip(verify_duality_batch(&p, Side::L, &cs, &starts, 0.5, &opts))
    {
        let r = r.unwrap();
        assert!(r.pass, "{z0:?}: {}", r.sup_distance);
        assert!(r.sup_distance <= 1e-6);
        assert!(r.extremal.max_residual() <= 1e-9);
        let a = f64s(&z0[..5]);
        let c = z0[5].to_f64();
        for (x1, x) in r.grid.iter().zip(&r.extremal.states) {
            let exact = flat_line(&a, c, *x1);
            assert!(x.iter().zip(&exact).all(|(u, v)| (u - v).abs() < 1e-9));
        }
    }
}

#[test]
fn hilbert_cartan_duality() {
    let d = hilbert_cartan();
    let s = dist_structure(&d);
    let cs = ControlSystem::from_distribution(&d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut starts = vec![origin(6)];
    starts.extend((0..5).map(|_| random_start(&mut rng)));
    for z0 in &starts {
        let r = verify_duality(&s, Side::K, &cs, z0, 0.5, &DualityOptions::default()).unwrap();
        assert!(r.pass, "{z0:?}: {}", r.sup_distance);
        assert!(r.extremal.max_residual() <= 1e-9);
        // K-leaves keep t fixed, so y₂ grows linearly at rate t.
        let (y2, t) = (z0[3].to_f64(), z0[5].to_f64());
        let last = r.extremal.states.last().unwrap();
        assert!((last[3] - (y2 + 0.5 * t)).abs() < 1e-9);
    }
}

#[test]
fn compliant_bc_duality() {
    let f = compliant_bc();
    let p = cone_structure(&f);
    let cs = ControlSystem::from_cone(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let z0 = random_start(&mut rng);
        let r = verify_duality(&p, Side::L, &cs, &z0, 0.5, &DualityOptions::default()).unwrap();
        assert!(r.pass, "{z0:?}: {}", r.sup_distance);
    }
}

#[test]
fn perturbed_distribution_duality_and_order() {
    let d = distribution("y2^2 + y1^3");
    let s = dist_structure(&d);
    let cs = ControlSystem::from_distribution(&d).unwrap();
    let z0 = [q(0, 1), q(0, 1), q(1, 5), q(1, 5), q(0, 1), q(1, 2)];
    let r = verify_duality(&s, Side::K, &cs, &z0, 0.5, &DualityOptions::default()).unwrap();
    assert!(r.pass, "{}", r.sup_distance);
    // The direction t changes along this leaf, so both legs carry truncation error.
    let t_end = r.leaf.len();
    assert!(t_end == 65);

    let dist = |n| {
        let o = DualityOptions {
            tol: 1e-6,
            step: StepControl::fixed(n),
            grid: 4,
        };
        verify_duality(&s, Side::K, &cs, &z0, 0.5, &o)
            .unwrap()
            .sup_distance
    };
    let errs: Vec<f64> = [1, 2, 4].iter().map(|&n| dist(n)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.0, "{errs:?}");
    }
}

#[test]
fn wrong_chart_is_rejected() {
    let p = cone_structure(&flat());
    let cs = ControlSystem::from_distribution(&hilbert_cartan()).unwrap();
    let err = verify_duality(
        &p,
        Side::L,
        &cs,
        &origin(6),
        0.5,
        &DualityOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, PathError::Precondition(_)));
}

#[test]
fn failing_leg_is_named() {
    let p = cone_structure(&flat());
    let cs = ControlSystem::from_cone(&flat()).unwrap();
    // K = ∂_θ has no x₁ component, so its leaves are not graphs over x₁.
    let err = verify_duality(
        &p,
        Side::K,
        &cs,
        &origin(6),
        0.5,
        &DualityOptions::default(),
    )
    .unwrap_err();
    match err {
        PathError::Leg { leg, source } => {
            assert_eq!(leg, "leaf");
            assert_eq!(*source, PathError::NotGraph);
        }
        e => panic!("{e:?}"),
    }
}

#[test]
fn time_reversal() {
    let tol = 1e-10;
    for s in [
        cone_structure(&compliant_bc()),
        dist_structure(&distribution("y2^2 + y1^3")),
    ] {
        for side in [Side::K, Side::L] {
            let v = singular_path_field(&s, side);
            let z0 = [0.1, -0.05, 0.2, 0.15, 0.0, 0.3];
            let ctrl = StepControl::adaptive(tol);
            let fwd = integrate_flow(&v, &z0, 0.5, &ctrl).unwrap();
            let back = integrate_flow(&v, &fwd, -0.5, &ctrl).unwrap();
            let err = back
                .iter()
                .zip(&z0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 10.0 * tol, "{side}: {err}");
        }
    }
}

/// p₀ annihilating ∂E and pairing with [K,[K,L]].
fn l_costate(s: &PseudoProductStructure, z0: &[Value]) -> Vec<f64> {
    let kl = lie_bracket(s.k(), s.l()).unwrap();
    let kkl = lie_bracket(s.k(), &kl).unwrap();
    annihilating_costate(s.flag().level_fields(1), z0, &[kkl]).unwrap()
}

/// p₀ annihilating ∂⁽³⁾E, which the K-flow preserves.
fn k_costate(s: &PseudoProductStructure, z0: &[Value]) -> Vec<f64> {
    annihilating_costate(s.flag().level_fields(3), z0, &[]).unwrap()
}

fn flat_structures() -> Vec<PseudoProductStructure> {
    vec![dist_structure(&hilbert_cartan()), cone_structure(&flat())]
}

#[test]
fn fibre_lifts_are_classified() {
    let opts = BiExtremalOptions::default();
    for (i, s) in flat_structures().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(20 + i as u64);
        for _ in 0..5 {
            let z0 = random_start(&mut rng);
            let zf = f64s(&z0);
            let tr = lift_leaf(s.l(), &zf, &l_costate(s, &z0), 0.25, &opts).unwrap();
            let r = classify_biextremal(s.flag(), &tr).unwrap();
            assert_eq!(r.tag, Classification::RegularSingular, "{r:?}");
            assert!(r.d1_residual <= 1e-8);

            let tr = lift_leaf(s.k(), &zf, &k_costate(s, &z0), 0.25, &opts).unwrap();
            let r = classify_biextremal(s.flag(), &tr).unwrap();
            assert_eq!(r.tag, Classification::TotallyIrregular, "{r:?}");
            assert!(r.d2_residual <= 1e-8);
        }
    }
}

#[test]
fn generic_costate_is_unclassified() {
    let s = dist_structure(&hilbert_cartan());
    // p₀ annihilates L but pairs with K.
    let p0 =
        annihilating_costate(std::slice::from_ref(s.l()), &origin(6), &[s.k().clone()]).unwrap();
    let tr = lift_leaf(s.l(), &[0.0; 6], &p0, 0.25, &BiExtremalOptions::default()).unwrap();
    let r = classify_biextremal(s.flag(), &tr).unwrap();
    assert_eq!(r.tag, Classification::Unclassified);
    assert!(r.d1_residual > 1e-8);
}

#[test]
fn classification_needs_the_flag_chart() {
    let s = dist_structure(&hilbert_cartan());
    let cs = ControlSystem::from_distribution(&hilbert_cartan()).unwrap();
    let p0 = initial_costate(&cs, &origin(5), &[q(1, 1), q(0, 1)]).unwrap();
    let tr = integrate_biextremal(
        &cs,
        &[0.0; 5],
        &p0,
        &[1.0, 0.0],
        0.25,
        &BiExtremalOptions::default(),
    )
    .unwrap();
    assert!(matches!(
        classify_biextremal(s.flag(), &tr).unwrap_err(),
        PathError::Precondition(_)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn asymmetry_holds_on_compliant_model(
        x in prop::collection::vec(-16i64..=16, 5),
        th in -16i64..=16,
    ) {
        let s = cone_structure(&compliant_bc());
        let mut z0: Vec<Value> = x.iter().map(|&k| q(k, 64)).collect();
        z0.push(q(th, 32));
        let zf = f64s(&z0);
        let opts = BiExtremalOptions::default();
        let tr = lift_leaf(s.l(), &zf, &l_costate(&s, &z0), 0.25, &opts).unwrap();
        let tag = classify_biextremal(s.flag(), &tr).unwrap().tag;
        prop_assert_ne!(tag, Classification::TotallyIrregular);
        let tr = lift_leaf(s.k(), &zf, &k_costate(&s, &z0), 0.25, &opts).unwrap();
        let tag = classify_biextremal(s.flag(), &tr).unwrap().tag;
        prop_assert_ne!(tag, Classification::RegularSingular);
    }
}
