use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::family::{theta_half_width, ConeFamily, DirectionField};
use super::ConeError;
use crate::distduality::PseudoProductStructure;
use crate::scalar::{frac, is_zero, RatFunc, SampleBox, ScalarExpr, Symbol, Value, ZeroTest};
use crate::vecfield::{
    assignment, box_points, check_contact, exterior_derivative, lie_bracket, rank_at,
    reduce_many_symbolic, Point, VectorField,
};

/// Samples used for the self-check of U.
const U_SAMPLES: usize = 50;

/// ζ₂ on the chart (x, θ).
pub fn cone_generator(f: &ConeFamily) -> VectorField {
    f.zeta2()
}

fn theta_samples(f: &ConeFamily) -> Vec<Value> {
    let t0 = f.theta0().to_f64();
    let exact = f.theta0().as_rational().cloned();
    (-8..=8)
        .map(|k| match &exact {
            Some(q) => Value::Rational(q + frac(k, 16)),
            None => Value::Real(t0 + k as f64 / 16.0),
        })
        .collect()
}

/// True iff ζ₂, ζ₃, ζ₄, ζ₅ have rank 4 at (x, θ) for θ across the θ interval.
pub fn check_nondegenerate(f: &ConeFamily, x: &[Value]) -> Result<bool, ConeError> {
    let [_, z2, z3, z4, z5] = f.frame()?;
    let fields = [z2, z3, z4, z5];
    for th in theta_samples(f) {
        let mut pt = x.to_vec();
        pt.push(th);
        if rank_at(&fields, &pt)? != 4 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of [`check_lagrangian`].
#[derive(Clone, Debug)]
pub struct LagrangianReport {
    pub pass: bool,
    /// α∧dα∧dα ≠ 0 at x₀.
    pub contact: bool,
    /// α(ζ₂) at θ = s(x).
    pub alpha_zeta2: ZeroTest,
    /// α(ζ₃) at θ = s(x).
    pub alpha_zeta3: ZeroTest,
    /// dα(ζ₂, ζ₃) at θ = s(x).
    pub dalpha: ZeroTest,
    /// The same three identities hold for every θ in the θ interval.
    pub all_sections: bool,
    /// Box on which the identities were certified.
    pub certified_box: SampleBox,
}

fn zero_on(e: RatFunc, f: &ConeFamily, bx: &SampleBox) -> Result<ZeroTest, ConeError> {
    if e.is_zero() {
        return Ok(ZeroTest::ProvablyZero);
    }
    Ok(is_zero(&e.to_expr(f.z_chart()), bx)?)
}

fn lagrangian_terms(
    f: &ConeFamily,
    z2: &VectorField,
    z3: &VectorField,
) -> Result<[RatFunc; 3], ConeError> {
    let alpha = f.alpha().lift(f.z_chart())?;
    let d = exterior_derivative(&alpha)?;
    Ok([alpha.pair_rf(z2)?, alpha.pair_rf(z3)?, d.pair_rf(z2, z3)?])
}

/// Checks C ⊂ D′ = ker α and that T_sC = ⟨ζ₂, ζ₃⟩|_{θ=s(x)} is Lagrangian for dα.
pub fn check_lagrangian(f: &ConeFamily, s: &DirectionField) -> Result<LagrangianReport, ConeError> {
    s.validate(f)?;
    let [_, z2, z3, _, _] = f.frame()?;
    let contact = check_contact(f.alpha(), f.x0())?;
    let zbox = f.default_box()?;
    let full = lagrangian_terms(f, &z2, &z3)?;
    let mut all_sections = true;
    for t in full {
        if !zero_on(t, f, &zbox)?.is_zero() {
            all_sections = false;
        }
    }
    let (v, w) = (s.restrict(f, &z2)?, s.restrict(f, &z3)?);
    let xbox = f.x_box()?;
    let [a2, a3, da] = lagrangian_terms(f, &v, &w)?;
    let a2 = zero_on(a2, f, &xbox)?;
    let a3 = zero_on(a3, f, &xbox)?;
    let da = zero_on(da, f, &xbox)?;
    let pass = contact && a2.is_zero() && a3.is_zero() && da.is_zero();
    Ok(LagrangianReport {
        pass,
        contact,
        alpha_zeta2: a2,
        alpha_zeta3: a3,
        dalpha: da,
        all_sections,
        certified_box: if all_sections { zbox } else { xbox },
    })
}

/// T_sC ⊂ O⁽²⁾_sC ⊂ O⁽³⁾_sC along a section, as fields on the Z chart with θ = s(x).
#[derive(Clone, Debug)]
pub struct OsculatingData {
    pub tangent: Vec<VectorField>,
    pub o2: Vec<VectorField>,
    pub o3: Vec<VectorField>,
    /// O⁽³⁾ at x₀ agrees with the one of five other sections.
    pub s_independent: bool,
}

fn osculating_frames(
    f: &ConeFamily,
    s: &DirectionField,
) -> Result<[Vec<VectorField>; 3], ConeError> {
    let [_, z2, z3, z4, z5] = f.frame()?;
    let r = |v: &VectorField| s.restrict(f, v);
    let t = vec![r(&z2)?, r(&z3)?];
    let mut o2 = t.clone();
    o2.push(r(&z4)?);
    let mut o3 = o2.clone();
    o3.push(r(&z5)?);
    Ok([t, o2, o3])
}

/// Builds the osculating flag along `s` and compares O⁽³⁾ at x₀ across random sections.
pub fn osculating(f: &ConeFamily, s: &DirectionField) -> Result<OsculatingData, ConeError> {
    s.validate(f)?;
    let mut x0 = f.x0().to_vec();
    x0.push(f.theta0().clone());
    let [t, o2, o3] = osculating_frames(f, s)?;
    for (stage, frame) in [(2, &t), (3, &o2), (4, &o3)] {
        let rank = rank_at(frame, &x0)?;
        if rank != stage {
            return Err(ConeError::OsculatingRank {
                expected: stage,
                rank,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut s_independent = true;
    for _ in 0..5 {
        let other = random_section(f, &mut rng);
        let [_, _, o3b] = osculating_frames(f, &other)?;
        let mut union = o3.clone();
        union.extend(o3b);
        if rank_at(&union, &x0)? != 4 {
            s_independent = false;
        }
    }
    Ok(OsculatingData {
        tangent: t,
        o2,
        o3,
        s_independent,
    })
}

/// s(x) = θ₀ + c₀ + Σ cᵢ(xᵢ − x₀ᵢ) with small rational coefficients.
fn random_section(f: &ConeFamily, rng: &mut ChaCha8Rng) -> DirectionField {
    let c = |rng: &mut ChaCha8Rng| ScalarExpr::constant(frac(rng.random_range(-8..=8), 64));
    let mut terms = vec![c(rng)];
    if let Some(t0) = f.theta0().as_rational() {
        terms.push(ScalarExpr::constant(t0.clone()));
    }
    for (v, x0) in f.x_chart().vars().iter().zip(f.x0()) {
        let shift = x0.as_rational().cloned().unwrap_or_else(|| frac(0, 1));
        let dx = ScalarExpr::sum(vec![ScalarExpr::var(v), ScalarExpr::constant(-shift)]);
        terms.push(ScalarExpr::product(vec![c(rng), dx]));
    }
    DirectionField::new(ScalarExpr::sum(terms))
}

/// Outcome of [`check_osculating_condition`].
#[derive(Clone, Debug)]
pub struct OsculatingConditionReport {
    pub pass: bool,
    /// [ζ₂, ζ₃]
    pub bracket: VectorField,
    /// Components of [ζ₂, ζ₃] left after reduction modulo ζ₁, …, ζ₄, by chart coordinate.
    pub residual: Vec<(Symbol, ScalarExpr)>,
    /// Box sample where a residual component is nonzero.
    pub witness: Option<(Vec<(Symbol, BigRational)>, f64)>,
}

/// Checks [ζ₂, ζ₃] ≡ 0 mod ζ₁, ζ₂, ζ₃, ζ₄ on the (x, θ) box.
pub fn check_osculating_condition(
    f: &ConeFamily,
    bx: &SampleBox,
) -> Result<OsculatingConditionReport, ConeError> {
    let [z1, z2, z3, z4, _] = f.frame()?;
    let bracket = lie_bracket(&z2, &z3)?;
    let red = reduce_many_symbolic(std::slice::from_ref(&bracket), &[z1, z2, z3, z4], f.base())?
        .remove(0);
    let mut residual = Vec::new();
    let mut witness = None;
    for (i, r) in &red.residual {
        if r.is_zero() {
            continue;
        }
        let e = r.to_expr(f.z_chart());
        if let ZeroTest::NonZero { witness: w, value } = is_zero(&e, bx)? {
            if witness.is_none() {
                witness = Some((w, value));
            }
        }
        residual.push((f.z_chart().var(*i).clone(), e));
    }
    Ok(OsculatingConditionReport {
        pass: witness.is_none(),
        bracket,
        residual,
        witness,
    })
}

/// The function U with [ζ₂ + Uζ₁, ζ₃] ≡ 0 mod ζ₁, ζ₂, ζ₃.
#[derive(Clone, Debug)]
pub struct SolvedU {
    pub expr: ScalarExpr,
    /// [ζ₂ + Uζ₁, ζ₃] reduced modulo ζ₁, ζ₂, ζ₃ over the box.
    pub self_check: ZeroTest,
    /// Largest reduction residual at the sampled points.
    pub max_residual: f64,
}

/// Solves for U. Since [Uζ₁, ζ₃] = Uζ₄ − ζ₃(U)ζ₁, the residual is affine in U.
pub fn solve_u(f: &ConeFamily, bx: &SampleBox) -> Result<SolvedU, ConeError> {
    if !check_osculating_condition(f, bx)?.pass {
        return Err(ConeError::Precondition("osculating condition".into()));
    }
    let [z1, z2, z3, z4, _] = f.frame()?;
    let bracket = lie_bracket(&z2, &z3)?;
    let frame = [z1.clone(), z2.clone(), z3.clone()];
    let red = reduce_many_symbolic(&[bracket, z4], &frame, f.base())?;
    let a = assignment(f.z_chart(), f.base());
    let mut pick: Option<(usize, f64)> = None;
    for (k, (_, r2)) in red[1].residual.iter().enumerate() {
        let v = r2.eval(&a)?.to_f64().abs();
        if v > 0.0 && pick.is_none_or(|(_, best)| v > best) {
            pick = Some((k, v));
        }
    }
    let Some((k, _)) = pick else {
        return Err(ConeError::VanishingCoefficient);
    };
    let (r1, r2) = (&red[0].residual[k].1, &red[1].residual[k].1);
    let points: Vec<Point> = box_points(f.z_chart(), bx, f.base(), U_SAMPLES);
    for pt in &points {
        let v = r2.eval(&assignment(f.z_chart(), pt))?.to_f64();
        if v == 0.0 {
            return Err(ConeError::VanishingCoefficient);
        }
    }
    let u = r1.neg().div(r2)?;
    let l = z2.add(&z1.scale(&u))?;
    let check = lie_bracket(&l, &z3)?;
    let red = reduce_many_symbolic(std::slice::from_ref(&check), &frame, f.base())?.remove(0);
    let mut self_check = ZeroTest::ProvablyZero;
    for (_, r) in &red.residual {
        if r.is_zero() {
            continue;
        }
        match is_zero(&r.to_expr(f.z_chart()), bx)? {
            ZeroTest::ProvablyZero => {}
            ZeroTest::NumericallyZero => self_check = ZeroTest::NumericallyZero,
            nz => {
                self_check = nz;
                break;
            }
        }
    }
    let fr = crate::vecfield::Frame::new(f.z_chart(), frame.to_vec(), f.base().to_vec())?;
    let mut max_residual: f64 = 0.0;
    for pt in &points {
        if let crate::vecfield::Reduction::Residual(r) =
            crate::vecfield::reduce_mod(&check, &fr, pt)?
        {
            let m = r.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max);
            max_residual = max_residual.max(m);
        }
    }
    Ok(SolvedU {
        expr: u.to_expr(f.z_chart()),
        self_check,
        max_residual,
    })
}

/// E = ⟨ζ₁, ζ₂⟩ with K = ⟨ζ₁⟩ and L = ⟨ζ₂ + Uζ₁⟩.
pub fn prolong_cone(f: &ConeFamily, bx: &SampleBox) -> Result<PseudoProductStructure, ConeError> {
    if !check_nondegenerate(f, f.x0())? {
        return Err(ConeError::Precondition("non-degenerate".into()));
    }
    let s = match f.theta0() {
        Value::Rational(q) => DirectionField::constant(q.clone()),
        Value::Real(_) => return Err(ConeError::Params("θ₀ must be rational".into())),
    };
    if !check_lagrangian(f, &s)?.pass {
        return Err(ConeError::Precondition("Lagrangian".into()));
    }
    let u = solve_u(f, bx)?;
    let u = RatFunc::from_expr(&u.expr)?;
    let z1 = f.zeta1();
    let l = f.zeta2().add(&z1.scale(&u))?;
    Ok(PseudoProductStructure::new(
        f.z_chart(),
        z1,
        l,
        f.base().to_vec(),
    )?)
}

/// Half-width of the default θ interval, for reports.
pub fn theta_interval(f: &ConeFamily) -> (f64, f64) {
    let t0 = f.theta0().to_f64();
    let h = crate::scalar::rational_to_f64(&theta_half_width());
    (t0 - h, t0 + h)
}
