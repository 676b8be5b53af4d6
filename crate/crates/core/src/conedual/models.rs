use std::collections::BTreeMap;

use super::family::ConeFamily;
use super::ConeError;
use crate::distduality::Distribution235;
use crate::scalar::{int, parse_expr, Chart, OpaqueRegistry, RatFunc, ScalarExpr, Symbol, Value};
use crate::vecfield::{OneForm, VectorField};

pub const BUILTIN_MODELS: [&str; 4] = ["flat-cone", "cubic-a", "noncubic-bc", "hilbert-cartan"];

/// Name of the fiber coordinate of the cone models.
pub const THETA: &str = "th";

#[derive(Clone, Debug)]
pub enum Model {
    Cone(ConeFamily),
    Distribution(Distribution235),
}

pub fn x_chart() -> Chart {
    Chart::new(&["x1", "x2", "x3", "x4", "x5"]).expect("distinct names")
}

pub fn y_chart() -> Chart {
    Chart::new(&["x", "y", "y1", "y2", "z"]).expect("distinct names")
}

/// dx₅ − x₃dx₂ + 2x₂dx₃ − x₁dx₄
pub fn standard_contact_form() -> OneForm {
    let c = x_chart();
    let reg = OpaqueRegistry::new();
    let coeffs = ["0", "-x3", "2*x2", "-x1", "1"]
        .iter()
        .map(|s| parse_expr(s, &c, &reg).expect("valid literal"))
        .collect();
    OneForm::new(&c, coeffs).expect("five coefficients")
}

fn zero(n: usize) -> Vec<Value> {
    vec![Value::Rational(int(0)); n]
}

fn param(
    params: &BTreeMap<String, String>,
    name: &str,
    chart: &Chart,
    allowed: &[&str],
    reg: &OpaqueRegistry,
) -> Result<ScalarExpr, ConeError> {
    let text = params
        .get(name)
        .ok_or_else(|| ConeError::Params(format!("missing parameter `{name}`")))?;
    let e = parse_expr(text, chart, reg)?;
    for v in e.variables() {
        if !allowed.contains(&v.as_str()) {
            return Err(ConeError::Params(format!(
                "parameter `{name}` may depend on {allowed:?} only, found `{v}`"
            )));
        }
    }
    Ok(e)
}

fn check_unknown(params: &BTreeMap<String, String>, known: &[&str]) -> Result<(), ConeError> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(ConeError::Params(format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

/// Requires the first `order` θ-derivatives of `e` to vanish at θ = 0.
fn check_order(name: &str, e: &ScalarExpr, order: u32) -> Result<(), ConeError> {
    let th = Symbol::new(THETA);
    let mut d = RatFunc::from_expr(e)?;
    let at0 = [(th.clone(), Value::Rational(int(0)))]
        .into_iter()
        .collect();
    for k in 0..order {
        let v = d.eval(&at0)?;
        if v.to_f64() != 0.0 {
            return Err(ConeError::Order {
                name: name.to_string(),
                required: order,
                found: k,
            });
        }
        d = d.differentiate(&th)?;
    }
    Ok(())
}

/// The family of the cubic model with parameter function a(x₁):
/// A = θ, B = θ² + a, S = θ³ − 3θa, T = x₃θ − 2x₂B + x₁S.
pub fn cubic_a(a: &ScalarExpr) -> Result<ConeFamily, ConeError> {
    let c = x_chart();
    let reg = OpaqueRegistry::new();
    let z = c.extended(THETA)?;
    let p = |s: &str| parse_expr(s, &z, &reg).expect("valid literal");
    let th = p(THETA);
    let b = ScalarExpr::sum(vec![p("th^2"), a.clone()]);
    let s = ScalarExpr::sum(vec![
        p("th^3"),
        ScalarExpr::product(vec![ScalarExpr::integer(-3), th.clone(), a.clone()]),
    ]);
    cone_from_abs(th, b, s)
}

/// The family with b(θ), c(θ): A = θ, B = θ² + b, S = θ³ + c, T = x₃θ − 2x₂B + x₁S.
pub fn noncubic_bc(b: &ScalarExpr, c: &ScalarExpr) -> Result<ConeFamily, ConeError> {
    let th = ScalarExpr::var(&Symbol::new(THETA));
    let bb = ScalarExpr::sum(vec![th.pow(2), b.clone()]);
    let s = ScalarExpr::sum(vec![th.pow(3), c.clone()]);
    cone_from_abs(th, bb, s)
}

/// T is fixed by α(ζ₂) = 0 for the standard contact form.
fn cone_from_abs(a: ScalarExpr, b: ScalarExpr, s: ScalarExpr) -> Result<ConeFamily, ConeError> {
    let x = |i: usize| ScalarExpr::var(&Symbol::new(&format!("x{i}")));
    let t = ScalarExpr::sum(vec![
        ScalarExpr::product(vec![x(3), a.clone()]),
        ScalarExpr::product(vec![ScalarExpr::integer(-2), x(2), b.clone()]),
        ScalarExpr::product(vec![x(1), s.clone()]),
    ]);
    ConeFamily::new(
        &x_chart(),
        THETA,
        [a, b, s, t],
        standard_contact_form(),
        zero(5),
        Value::Rational(int(0)),
    )
}

/// η₁ = ∂ₓ + y₁∂_y + y₂∂_{y₁} + y₂²∂_z, η₂ = ∂_{y₂}.
pub fn hilbert_cartan() -> Distribution235 {
    let c = y_chart();
    let reg = OpaqueRegistry::new();
    let e1 = VectorField::parse(&c, &reg, &["1", "y1", "y2", "0", "y2^2"]).expect("valid literal");
    let e2 = VectorField::parse(&c, &reg, &["0", "0", "0", "1", "0"]).expect("valid literal");
    Distribution235::new(&c, e1, e2, zero(5)).expect("independent at the origin")
}

/// Builds a bundled model. Parameters are expression texts: `a` in x1 for `cubic-a`,
/// `b` and `c` in th for `noncubic-bc`.
pub fn builtin_model(
    name: &str,
    params: &BTreeMap<String, String>,
    reg: &OpaqueRegistry,
) -> Result<Model, ConeError> {
    let z = x_chart().extended(THETA)?;
    match name {
        "flat-cone" => {
            check_unknown(params, &[])?;
            Ok(Model::Cone(cubic_a(&ScalarExpr::zero())?))
        }
        "cubic-a" => {
            check_unknown(params, &["a"])?;
            let a = param(params, "a", &z, &["x1"], reg)?;
            Ok(Model::Cone(cubic_a(&a)?))
        }
        "noncubic-bc" => {
            check_unknown(params, &["b", "c"])?;
            let b = param(params, "b", &z, &[THETA], reg)?;
            let c = param(params, "c", &z, &[THETA], reg)?;
            check_order("b", &b, 3)?;
            check_order("c", &c, 4)?;
            Ok(Model::Cone(noncubic_bc(&b, &c)?))
        }
        "hilbert-cartan" => {
            check_unknown(params, &[])?;
            Ok(Model::Distribution(hilbert_cartan()))
        }
        other => Err(ConeError::UnknownModel(other.to_string())),
    }
}
