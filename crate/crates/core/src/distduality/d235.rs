use num_rational::BigRational;

use super::DistError;
use crate::scalar::{is_zero, Chart, RatFunc, SampleBox, ScalarExpr, Symbol, Value, ZeroTest};
use crate::vecfield::{
    box_points, derived_flag, lie_bracket, rank_at, reduce_many_symbolic, DistributionFlag, Frame,
    Point, VectorField,
};

/// Number of box samples used by the rank and identity checks.
pub const DEFAULT_SAMPLES: usize = 32;

/// A rank-2 distribution on a 5-dimensional chart given by two generators.
#[derive(Clone, Debug)]
pub struct Distribution235 {
    chart: Chart,
    eta1: VectorField,
    eta2: VectorField,
    base: Point,
}

impl Distribution235 {
    /// Requires a 5-dimensional chart and generators independent at `base`. The growth
    /// condition is verified separately by [`check_235`].
    pub fn new(
        chart: &Chart,
        eta1: VectorField,
        eta2: VectorField,
        base: Point,
    ) -> Result<Self, DistError> {
        if chart.dim() != 5 {
            return Err(DistError::Dimension {
                expected: 5,
                got: chart.dim(),
            });
        }
        let r = rank_at(&[eta1.clone(), eta2.clone()], &base)?;
        if r < 2 {
            return Err(DistError::DependentGenerators);
        }
        Frame::new(chart, vec![eta1.clone(), eta2.clone()], base.clone())?;
        Ok(Distribution235 {
            chart: chart.clone(),
            eta1,
            eta2,
            base,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn eta1(&self) -> &VectorField {
        &self.eta1
    }

    pub fn eta2(&self) -> &VectorField {
        &self.eta2
    }

    pub fn base(&self) -> &[Value] {
        &self.base
    }

    /// η₁, η₂, η₃ = [η₁,η₂], η₄ = [η₁,η₃], η₅ = [η₂,η₃].
    pub fn bracket_frame(&self) -> Result<[VectorField; 5], DistError> {
        let e3 = lie_bracket(&self.eta1, &self.eta2)?;
        let e4 = lie_bracket(&self.eta1, &e3)?;
        let e5 = lie_bracket(&self.eta2, &e3)?;
        Ok([self.eta1.clone(), self.eta2.clone(), e3, e4, e5])
    }
}

/// Outcome of [`check_235`].
#[derive(Clone, Debug)]
pub struct Check235Report {
    /// Growth vector of the derived flag at the base point.
    pub growth: Vec<usize>,
    pub pass: bool,
    /// Ranks of ⟨η₁,η₂⟩, ⟨η₁,η₂,η₃⟩, ⟨η₁,…,η₅⟩ where the check first failed.
    pub witness: Option<(Point, Vec<usize>)>,
    pub samples: usize,
}

fn frame_ranks(f: &[VectorField; 5], p: &[Value]) -> Result<Vec<usize>, DistError> {
    Ok(vec![
        rank_at(&f[..2], p)?,
        rank_at(&f[..3], p)?,
        rank_at(&f[..], p)?,
    ])
}

/// Checks ranks (2, 3, 5) of the bracket frame at the base point and at box samples.
pub fn check_235(d: &Distribution235, bx: &SampleBox) -> Result<Check235Report, DistError> {
    let frame = d.bracket_frame()?;
    let flag = derived_flag(
        &Frame::new(
            &d.chart,
            vec![d.eta1.clone(), d.eta2.clone()],
            d.base.clone(),
        )?,
        2,
    )?;
    let expected = vec![2, 3, 5];
    let mut points = vec![d.base.clone()];
    points.extend(box_points(&d.chart, bx, &d.base, DEFAULT_SAMPLES));
    let mut witness = None;
    for p in &points {
        let r = frame_ranks(&frame, p)?;
        if r != expected {
            witness = Some((p.clone(), r));
            break;
        }
    }
    Ok(Check235Report {
        growth: flag.growth(),
        pass: witness.is_none(),
        witness,
        samples: points.len() - 1,
    })
}

/// Parametrization of the directions of D used for the fiber coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiberChart {
    /// η₁ + tη₂
    Affine,
    /// sη₁ + η₂, covering the direction t = ∞.
    Antipodal,
}

/// The Cartan prolongation E = ⟨ζ₁, ζ₂⟩ on Z = P(D) in the chart (y, t).
#[derive(Clone, Debug)]
pub struct Prolongation {
    pub distribution: Distribution235,
    pub chart: Chart,
    pub fiber: Symbol,
    pub fiber_chart: FiberChart,
    /// η₁, …, η₅ regarded as fields on Z.
    pub eta: [VectorField; 5],
    pub zeta1: VectorField,
    pub zeta2: VectorField,
    pub flag: DistributionFlag,
    pub base: Point,
}

impl Prolongation {
    /// The generator of ∂⁽³⁾E beyond ∂⁽²⁾E: η₄ + tη₅ (affine) or sη₄ + η₅ (antipodal).
    pub fn fourth(&self) -> Result<VectorField, DistError> {
        let t = RatFunc::var(&self.fiber);
        Ok(match self.fiber_chart {
            FiberChart::Affine => self.eta[3].add(&self.eta[4].scale(&t))?,
            FiberChart::Antipodal => self.eta[3].scale(&t).add(&self.eta[4])?,
        })
    }

    /// ∂E = ⟨η₁,η₂,ζ₂⟩
    pub fn d1_frame(&self) -> Vec<VectorField> {
        vec![self.eta[0].clone(), self.eta[1].clone(), self.zeta2.clone()]
    }

    /// ∂⁽²⁾E = ⟨η₁,η₂,η₃,ζ₂⟩
    pub fn d2_frame(&self) -> Vec<VectorField> {
        vec![
            self.eta[0].clone(),
            self.eta[1].clone(),
            self.eta[2].clone(),
            self.zeta2.clone(),
        ]
    }

    /// ∂⁽³⁾E = ⟨η₁,η₂,η₃,η₄+tη₅,ζ₂⟩
    pub fn d3_frame(&self) -> Result<Vec<VectorField>, DistError> {
        Ok(vec![
            self.eta[0].clone(),
            self.eta[1].clone(),
            self.eta[2].clone(),
            self.fourth()?,
            self.zeta2.clone(),
        ])
    }

    pub fn e_frame(&self) -> Frame {
        Frame::new(
            &self.chart,
            vec![self.zeta1.clone(), self.zeta2.clone()],
            self.base.clone(),
        )
        .expect("ζ₁, ζ₂ are independent")
    }
}

/// Prolongs D to Z with fiber coordinate value `t0` at the base point.
pub fn prolong_235(
    d: &Distribution235,
    t0: &BigRational,
    fiber_chart: FiberChart,
) -> Result<Prolongation, DistError> {
    let name = d.chart.fresh_name(match fiber_chart {
        FiberChart::Affine => "t",
        FiberChart::Antipodal => "s",
    });
    let chart = d.chart.extended(&name)?;
    let fiber = Symbol::new(&name);
    let eta = d.bracket_frame()?;
    let eta: [VectorField; 5] = eta
        .iter()
        .map(|v| v.lift(&chart))
        .collect::<Result<Vec<_>, _>>()?
        .try_into()
        .expect("five fields");
    let t = RatFunc::var(&fiber);
    let zeta1 = match fiber_chart {
        FiberChart::Affine => eta[0].add(&eta[1].scale(&t))?,
        FiberChart::Antipodal => eta[0].scale(&t).add(&eta[1])?,
    };
    let zeta2 = VectorField::coordinate(&chart, 5);
    let mut base = d.base.clone();
    base.push(Value::Rational(t0.clone()));
    let e = Frame::new(&chart, vec![zeta1.clone(), zeta2.clone()], base.clone())?;
    let flag = derived_flag(&e, 4)?;
    if flag.growth() != [2, 3, 4, 5, 6] {
        return Err(DistError::Growth {
            expected: vec![2, 3, 4, 5, 6],
            got: flag.growth(),
        });
    }
    Ok(Prolongation {
        distribution: d.clone(),
        chart,
        fiber,
        fiber_chart,
        eta,
        zeta1,
        zeta2,
        flag,
        base,
    })
}

/// The coefficient e(y, t) of the K-generator ζ₁ + eζ₂.
#[derive(Clone, Debug)]
pub struct SolvedE {
    /// Closed form, when the symbolic division is valid on the whole box.
    pub expr: Option<ScalarExpr>,
    /// Pointwise values when the closed form is not usable on the box.
    pub table: Vec<(Point, f64)>,
    pub warning: Option<String>,
    /// Result of checking [ζ₁ + eζ₂, w] ∈ ∂⁽³⁾E for every generator w.
    pub self_check: ZeroTest,
}

impl SolvedE {
    /// ζ₁ + eζ₂, when a closed form exists.
    pub fn k_generator(&self, p: &Prolongation) -> Option<VectorField> {
        let e = RatFunc::from_expr(self.expr.as_ref()?).ok()?;
        p.zeta1.add(&p.zeta2.scale(&e)).ok()
    }
}

/// Solves for e by imposing [ζ₁ + eζ₂, w] ≡ 0 mod ∂⁽³⁾E for every w in the ∂⁽³⁾E frame.
/// The residual is affine in e: R₁(w) + e·R₂(w), since [eζ₂, w] = e[ζ₂, w] − w(e)ζ₂.
pub fn solve_e(p: &Prolongation, bx: &SampleBox) -> Result<SolvedE, DistError> {
    let frame = p.d3_frame()?;
    let mut targets = Vec::new();
    for w in &frame {
        targets.push(lie_bracket(&p.zeta1, w)?);
        targets.push(lie_bracket(&p.zeta2, w)?);
    }
    let red = reduce_many_symbolic(&targets, &frame, &p.base)?;
    let assign = crate::vecfield::assignment(&p.chart, &p.base);
    // Pairs (R₁, R₂) per frame generator and residual row.
    let mut pairs: Vec<(RatFunc, RatFunc)> = Vec::new();
    for j in 0..frame.len() {
        let r1 = &red[2 * j].residual;
        let r2 = &red[2 * j + 1].residual;
        for (a, b) in r1.iter().zip(r2) {
            pairs.push((a.1.clone(), b.1.clone()));
        }
    }
    let mut pick = None;
    for (i, (_, r2)) in pairs.iter().enumerate() {
        let v = r2.eval(&assign)?.to_f64().abs();
        if v > 0.0 && pick.is_none_or(|(_, best)| v > best) {
            pick = Some((i, v));
        }
    }
    let Some((i, _)) = pick else {
        return Err(DistError::VanishingCoefficient);
    };
    let (r1, r2) = &pairs[i];
    let e = r1.neg().div(r2)?;
    let points = box_points(&p.chart, bx, &p.base, DEFAULT_SAMPLES);
    let mut bad = Vec::new();
    for pt in &points {
        let a = crate::vecfield::assignment(&p.chart, pt);
        let ok = matches!(r2.eval(&a), Ok(v) if v.to_f64() != 0.0);
        if !ok {
            bad.push(pt.clone());
        }
    }
    if !bad.is_empty() {
        // The closed form has a pole in the box: tabulate pointwise instead.
        let mut table = Vec::new();
        for pt in &points {
            let a = crate::vecfield::assignment(&p.chart, pt);
            let (Ok(n), Ok(d)) = (r1.eval(&a), r2.eval(&a)) else {
                continue;
            };
            if d.to_f64() != 0.0 {
                table.push((pt.clone(), -n.to_f64() / d.to_f64()));
            }
        }
        return Ok(SolvedE {
            expr: None,
            table,
            warning: Some(format!(
                "coefficient of e vanishes at {} of {} box samples; e reported pointwise",
                bad.len(),
                points.len()
            )),
            self_check: ZeroTest::NumericallyZero,
        });
    }
    let mut check = ZeroTest::ProvablyZero;
    for (a, b) in &pairs {
        let r = a.add(&b.mul(&e)).to_expr(&p.chart);
        match is_zero(&r, bx)? {
            ZeroTest::ProvablyZero => {}
            ZeroTest::NumericallyZero => check = ZeroTest::NumericallyZero,
            nz @ ZeroTest::NonZero { .. } => {
                check = nz;
                break;
            }
        }
    }
    Ok(SolvedE {
        expr: Some(e.to_expr(&p.chart)),
        table: Vec::new(),
        warning: None,
        self_check: check,
    })
}
