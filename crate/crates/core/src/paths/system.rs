use super::PathError;
use crate::conedual::ConeFamily;
use crate::distduality::Distribution235;
use crate::scalar::{Chart, CompiledExpr, RatFunc, ScalarExpr, Symbol};
use crate::vecfield::{lie_bracket, VectorField};

/// How the dynamics depend on the controls.
#[derive(Clone, Debug)]
pub(crate) enum Kind {
    General,
    /// F = Σ uᵢ fᵢ(x)
    Linear(Vec<VectorField>),
}

/// ẋ = F(x, u) on a state chart with a control chart.
#[derive(Clone, Debug)]
pub struct ControlSystem {
    state: Chart,
    controls: Chart,
    joint: Chart,
    dynamics: Vec<RatFunc>,
    gauge: Vec<Option<f64>>,
    pub(crate) kind: Kind,
}

impl ControlSystem {
    pub fn new(
        state: &Chart,
        controls: &Chart,
        dynamics: Vec<ScalarExpr>,
    ) -> Result<Self, PathError> {
        if dynamics.len() != state.dim() {
            return Err(PathError::Precondition(format!(
                "{} dynamics components for a {}-dimensional state",
                dynamics.len(),
                state.dim()
            )));
        }
        let joint = state.join(controls)?;
        let dynamics = dynamics
            .iter()
            .map(RatFunc::from_expr)
            .collect::<Result<_, _>>()?;
        Ok(ControlSystem {
            state: state.clone(),
            controls: controls.clone(),
            joint,
            gauge: vec![None; controls.dim()],
            dynamics,
            kind: Kind::General,
        })
    }

    /// F(x; r, θ) = r·ζ₂(x, θ), with r fixed to 1.
    pub fn from_cone(f: &ConeFamily) -> Result<Self, PathError> {
        let r = f.x_chart().fresh_name("r");
        let controls = Chart::new(&[r.as_str(), f.theta().as_str()])?;
        let rr = ScalarExpr::var(&Symbol::new(&r));
        let z2 = f.zeta2();
        let dynamics = z2.coeffs()[..5]
            .iter()
            .map(|c| ScalarExpr::product(vec![rr.clone(), c.clone()]))
            .collect();
        let cs = ControlSystem::new(f.x_chart(), &controls, dynamics)?;
        cs.with_gauge(&r, 1.0)
    }

    /// F(y; u) = u₁η₁ + u₂η₂
    pub fn from_distribution(d: &Distribution235) -> Result<Self, PathError> {
        Self::from_frame(d.chart(), &[d.eta1().clone(), d.eta2().clone()])
    }

    /// F(x; u) = Σ uᵢ fᵢ with controls u1, u2, …
    pub fn from_frame(chart: &Chart, fields: &[VectorField]) -> Result<Self, PathError> {
        let names: Vec<String> = (1..=fields.len())
            .map(|i| chart.fresh_name(&format!("u{i}")))
            .collect();
        let controls = Chart::new(&names)?;
        let joint = chart.join(&controls)?;
        let mut dynamics = vec![RatFunc::zero(); chart.dim()];
        for (f, name) in fields.iter().zip(&names) {
            if f.chart() != chart {
                return Err(PathError::Precondition("field on a different chart".into()));
            }
            let u = RatFunc::var(&Symbol::new(name));
            for (d, c) in dynamics.iter_mut().zip(f.ratfuncs()) {
                *d = d.add(&c.mul(&u));
            }
        }
        Ok(ControlSystem {
            state: chart.clone(),
            controls: controls.clone(),
            joint,
            gauge: vec![None; fields.len()],
            dynamics,
            kind: Kind::Linear(fields.to_vec()),
        })
    }

    /// Fixes control `name` to `value` during integration.
    pub fn with_gauge(mut self, name: &str, value: f64) -> Result<Self, PathError> {
        let i = self
            .controls
            .index_of(&Symbol::new(name))
            .ok_or_else(|| PathError::Precondition(format!("no control named `{name}`")))?;
        self.gauge[i] = Some(value);
        Ok(self)
    }

    pub fn state(&self) -> &Chart {
        &self.state
    }

    pub fn controls(&self) -> &Chart {
        &self.controls
    }

    /// The chart (x, u).
    pub fn joint(&self) -> &Chart {
        &self.joint
    }

    pub fn gauge(&self) -> &[Option<f64>] {
        &self.gauge
    }

    pub fn dynamics(&self) -> Vec<ScalarExpr> {
        self.dynamics
            .iter()
            .map(|d| d.to_expr(&self.joint))
            .collect()
    }

    pub(crate) fn dynamics_rf(&self) -> &[RatFunc] {
        &self.dynamics
    }

    /// The fields fᵢ when F is linear in u.
    pub fn linear_fields(&self) -> Option<&[VectorField]> {
        match &self.kind {
            Kind::Linear(f) => Some(f),
            Kind::General => None,
        }
    }
}

/// H(x, p, u) = ⟨p, F(x, u)⟩ with its partial derivatives.
#[derive(Clone, Debug)]
pub struct HamiltonianData {
    /// The chart (x, p, u).
    pub chart: Chart,
    pub costates: Vec<Symbol>,
    pub h: ScalarExpr,
    pub dh_dx: Vec<ScalarExpr>,
    pub dh_dp: Vec<ScalarExpr>,
    pub dh_du: Vec<ScalarExpr>,
}

pub fn hamiltonian(cs: &ControlSystem) -> Result<HamiltonianData, PathError> {
    let mut taken = cs.joint.clone();
    let mut chart = cs.state.clone();
    let mut costates = Vec::new();
    for i in 1..=cs.state.dim() {
        let n = taken.fresh_name(&format!("p{i}"));
        taken = taken.extended(&n)?;
        chart = chart.extended(&n)?;
        costates.push(Symbol::new(&n));
    }
    let chart = chart.join(&cs.controls)?;
    let h = cs
        .dynamics
        .iter()
        .zip(&costates)
        .fold(RatFunc::zero(), |acc, (f, p)| {
            acc.add(&f.mul(&RatFunc::var(p)))
        });
    let d =
        |v: &Symbol| -> Result<ScalarExpr, PathError> { Ok(h.differentiate(v)?.to_expr(&chart)) };
    Ok(HamiltonianData {
        h: h.to_expr(&chart),
        dh_dx: cs.state.vars().iter().map(d).collect::<Result<_, _>>()?,
        dh_dp: costates.iter().map(d).collect::<Result<_, _>>()?,
        dh_du: cs.controls.vars().iter().map(d).collect::<Result<_, _>>()?,
        costates,
        chart,
    })
}

/// Numeric evaluators for F and the derivatives used by the integrator, over (x, u).
pub(crate) struct Compiled {
    pub m: usize,
    pub f: Vec<CompiledExpr>,
    /// ∂Fⁱ/∂xⱼ
    pub dfdx: Vec<Vec<CompiledExpr>>,
    /// ∂Fⁱ/∂u_k
    pub dfdu: Vec<Vec<CompiledExpr>>,
    /// ∂²Fⁱ/∂u_k∂u_l
    pub d2fdu: Vec<Vec<Vec<CompiledExpr>>>,
    /// Brackets η₃ = [f₁,f₂], η₄ = [f₁,η₃], η₅ = [f₂,η₃] for linear two-control systems.
    pub hierarchy: Option<[Vec<CompiledExpr>; 5]>,
}

fn compile_rf(f: &RatFunc, chart: &Chart) -> Result<CompiledExpr, PathError> {
    Ok(CompiledExpr::compile(&f.to_expr(chart), chart.vars())?)
}

pub(crate) fn compile_field(
    v: &VectorField,
    chart: &Chart,
) -> Result<Vec<CompiledExpr>, PathError> {
    v.ratfuncs().iter().map(|c| compile_rf(c, chart)).collect()
}

impl Compiled {
    pub fn new(cs: &ControlSystem) -> Result<Self, PathError> {
        let j = &cs.joint;
        let xs = cs.state.vars();
        let us = cs.controls.vars();
        let mut f = Vec::new();
        let mut dfdx = Vec::new();
        let mut dfdu = Vec::new();
        let mut d2fdu = Vec::new();
        for fi in &cs.dynamics {
            f.push(compile_rf(fi, j)?);
            dfdx.push(
                xs.iter()
                    .map(|x| compile_rf(&fi.differentiate(x)?, j))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            let mut row = Vec::new();
            let mut row2 = Vec::new();
            for u in us {
                let d = fi.differentiate(u)?;
                row.push(compile_rf(&d, j)?);
                row2.push(
                    us.iter()
                        .map(|w| compile_rf(&d.differentiate(w)?, j))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            dfdu.push(row);
            d2fdu.push(row2);
        }
        let hierarchy = match &cs.kind {
            Kind::Linear(fields) if fields.len() == 2 => {
                let e3 = lie_bracket(&fields[0], &fields[1])?;
                let e4 = lie_bracket(&fields[0], &e3)?;
                let e5 = lie_bracket(&fields[1], &e3)?;
                let s = &cs.state;
                Some([
                    compile_field(&fields[0], s)?,
                    compile_field(&fields[1], s)?,
                    compile_field(&e3, s)?,
                    compile_field(&e4, s)?,
                    compile_field(&e5, s)?,
                ])
            }
            _ => None,
        };
        Ok(Compiled {
            m: xs.len(),
            f,
            dfdx,
            dfdu,
            d2fdu,
            hierarchy,
        })
    }
}

/// Evaluates compiled expressions, turning domain failures into errors.
pub(crate) fn eval_all(exprs: &[CompiledExpr], args: &[f64]) -> Result<Vec<f64>, PathError> {
    exprs
        .iter()
        .map(|e| {
            let v = e.eval(args);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(PathError::NonFinite)
            }
        })
        .collect()
}
