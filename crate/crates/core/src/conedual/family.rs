use num_rational::BigRational;

use super::ConeError;
use crate::scalar::{
    frac, is_zero, Chart, RatFunc, SampleBox, ScalarExpr, Symbol, Value, ZeroTest,
};
use crate::vecfield::{box_around, OneForm, Point, VectorField};

/// Default half-width of the θ interval around θ₀.
pub fn theta_half_width() -> BigRational {
    frac(1, 2)
}

/// Default half-width of the x box around x₀.
pub fn x_half_width() -> BigRational {
    frac(1, 4)
}

/// A cone family C_x = ℝ·ζ₂(x, θ) in the normal form
/// ζ₂ = ∂₁ + A∂₂ + B∂₃ + S∂₄ + T∂₅ with A, B, S, T functions of (x, θ).
#[derive(Clone, Debug)]
pub struct ConeFamily {
    x_chart: Chart,
    z_chart: Chart,
    theta: Symbol,
    comps: [RatFunc; 4],
    alpha: OneForm,
    base: Point,
}

impl ConeFamily {
    /// Compatibility with α and non-degeneracy are not enforced here; see
    /// [`check_lagrangian`](super::check_lagrangian) and
    /// [`check_nondegenerate`](super::check_nondegenerate).
    pub fn new(
        x_chart: &Chart,
        theta: &str,
        comps: [ScalarExpr; 4],
        alpha: OneForm,
        x0: Point,
        theta0: Value,
    ) -> Result<Self, ConeError> {
        if x_chart.dim() != 5 {
            return Err(ConeError::Dimension(x_chart.dim()));
        }
        if alpha.chart() != x_chart || x0.len() != 5 {
            return Err(ConeError::Params(
                "contact form and base point must live on the x chart".into(),
            ));
        }
        let z_chart = x_chart.extended(theta)?;
        let theta = Symbol::new(theta);
        let comps = comps
            .iter()
            .map(|c| {
                for v in c.variables() {
                    if !z_chart.contains(&v) {
                        return Err(ConeError::Params(format!("unknown variable `{v}`")));
                    }
                }
                Ok(RatFunc::from_expr(c)?)
            })
            .collect::<Result<Vec<_>, ConeError>>()?
            .try_into()
            .expect("four components");
        let mut base = x0;
        base.push(theta0);
        Ok(ConeFamily {
            x_chart: x_chart.clone(),
            z_chart,
            theta,
            comps,
            alpha,
            base,
        })
    }

    pub fn x_chart(&self) -> &Chart {
        &self.x_chart
    }

    /// The chart (x₁, …, x₅, θ).
    pub fn z_chart(&self) -> &Chart {
        &self.z_chart
    }

    pub fn theta(&self) -> &Symbol {
        &self.theta
    }

    pub fn alpha(&self) -> &OneForm {
        &self.alpha
    }

    /// (x₀, θ₀)
    pub fn base(&self) -> &[Value] {
        &self.base
    }

    pub fn x0(&self) -> &[Value] {
        &self.base[..5]
    }

    pub fn theta0(&self) -> &Value {
        &self.base[5]
    }

    /// A, B, S, T
    pub fn components(&self) -> Vec<ScalarExpr> {
        self.comps
            .iter()
            .map(|c| c.to_expr(&self.z_chart))
            .collect()
    }

    /// The same family at another base point.
    pub fn with_base(&self, x0: Point, theta0: Value) -> Self {
        let mut base = x0;
        base.push(theta0);
        ConeFamily {
            base,
            ..self.clone()
        }
    }

    /// ζ₁ = ∂/∂θ
    pub fn zeta1(&self) -> VectorField {
        VectorField::coordinate(&self.z_chart, 5)
    }

    /// ζ₂ = ∂₁ + A∂₂ + B∂₃ + S∂₄ + T∂₅
    pub fn zeta2(&self) -> VectorField {
        let mut c = vec![RatFunc::one()];
        c.extend(self.comps.iter().cloned());
        c.push(RatFunc::zero());
        VectorField::from_ratfuncs(&self.z_chart, c).expect("six components")
    }

    /// ζ₁, ζ₂, ζ₃ = ∂ζ₂/∂θ, ζ₄ = ∂²ζ₂/∂θ², ζ₅ = ∂³ζ₂/∂θ³.
    pub fn frame(&self) -> Result<[VectorField; 5], ConeError> {
        let z2 = self.zeta2();
        let z3 = self.theta_derivative(&z2)?;
        let z4 = self.theta_derivative(&z3)?;
        let z5 = self.theta_derivative(&z4)?;
        Ok([self.zeta1(), z2, z3, z4, z5])
    }

    fn theta_derivative(&self, v: &VectorField) -> Result<VectorField, ConeError> {
        let c = v
            .ratfuncs()
            .iter()
            .map(|f| f.differentiate(&self.theta))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorField::from_ratfuncs(&self.z_chart, c)?)
    }

    /// Substitutes θ ↦ λθ + μ.
    pub fn reparametrize(&self, lambda: &BigRational, mu: &BigRational) -> Result<Self, ConeError> {
        let th = ScalarExpr::var(&self.theta);
        let repl = ScalarExpr::sum(vec![
            ScalarExpr::product(vec![ScalarExpr::constant(lambda.clone()), th]),
            ScalarExpr::constant(mu.clone()),
        ]);
        let comps: Vec<ScalarExpr> = self
            .components()
            .iter()
            .map(|c| c.substitute(&self.theta, &repl))
            .collect();
        // The base direction θ₀ corresponds to (θ₀ − μ)/λ.
        let t0 = match self.theta0() {
            Value::Rational(q) => Value::Rational((q - mu) / lambda),
            Value::Real(x) => Value::Real(
                (x - crate::scalar::rational_to_f64(mu)) / crate::scalar::rational_to_f64(lambda),
            ),
        };
        ConeFamily::new(
            &self.x_chart,
            self.theta.as_str(),
            comps.try_into().expect("four components"),
            self.alpha.clone(),
            self.x0().to_vec(),
            t0,
        )
    }

    /// True when every component has vanishing fourth θ-derivative.
    pub fn is_cubic(&self) -> Result<bool, ConeError> {
        for c in &self.comps {
            let mut d = c.clone();
            for _ in 0..4 {
                d = d.differentiate(&self.theta)?;
            }
            if !d.is_zero() {
                let e = d.to_expr(&self.z_chart);
                if !matches!(is_zero(&e, &self.default_box()?)?, ZeroTest::ProvablyZero) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// x₀ ± 1/4 and θ₀ ± 1/2.
    pub fn default_box(&self) -> Result<SampleBox, ConeError> {
        let xb = box_around(&self.x_chart, self.x0(), &x_half_width())?;
        let t0 = self
            .theta0()
            .as_rational()
            .cloned()
            .ok_or(ConeError::Params("θ₀ must be rational".into()))?;
        let h = theta_half_width();
        let mut sides = xb.sides().to_vec();
        sides.push((self.theta.clone(), &t0 - &h, &t0 + &h));
        Ok(SampleBox::new(sides)?)
    }

    /// The x box alone, for identities that do not involve θ.
    pub fn x_box(&self) -> Result<SampleBox, ConeError> {
        Ok(box_around(&self.x_chart, self.x0(), &x_half_width())?)
    }
}

/// A section θ = s(x) of P(C).
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionField {
    expr: ScalarExpr,
}

impl DirectionField {
    pub fn new(expr: ScalarExpr) -> Self {
        DirectionField { expr }
    }

    pub fn constant(value: BigRational) -> Self {
        DirectionField {
            expr: ScalarExpr::constant(value),
        }
    }

    pub fn expr(&self) -> &ScalarExpr {
        &self.expr
    }

    /// Requires s to depend on x only and s(x₀) to lie in the θ interval.
    pub fn validate(&self, f: &ConeFamily) -> Result<(), ConeError> {
        for v in self.expr.variables() {
            if !f.x_chart.contains(&v) {
                return Err(ConeError::Params(format!(
                    "direction field depends on `{v}`, which is not an x coordinate"
                )));
            }
        }
        let a = crate::vecfield::assignment(&f.x_chart, f.x0());
        let s0 = RatFunc::from_expr(&self.expr)?.eval(&a)?.to_f64();
        let t0 = f.theta0().to_f64();
        let h = crate::scalar::rational_to_f64(&theta_half_width());
        if (s0 - t0).abs() > h {
            return Err(ConeError::Params(format!(
                "s(x₀) = {s0} lies outside the θ interval around {t0}"
            )));
        }
        Ok(())
    }

    /// v(x, s(x)) for a field v on the Z chart.
    pub fn restrict(&self, f: &ConeFamily, v: &VectorField) -> Result<VectorField, ConeError> {
        Ok(v.substitute(&f.theta, &self.expr)?)
    }
}
