use duality_core::paths::{
    initial_costate, integrate_biextremal, BiExtremalOptions, ControlSystem, PathError, StepControl,
};
use duality_core::scalar::Value;
use num_rational::BigRational;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::model::{ModelBody, ModelFile};
use crate::report::{float, floats_json};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{0} models have no control system to trace")]
    Unsupported(&'static str),
    #[error("expected {expected} start coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    /// Start point; the model's base point when absent.
    pub x0: Option<Vec<BigRational>>,
    /// Initial direction: θ₀ for cones, the slope u₂/u₁ for distributions.
    pub theta0: Option<BigRational>,
    pub t: f64,
    pub tol: f64,
    /// Number of grid intervals.
    pub grid: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            x0: None,
            theta0: None,
            t: 0.5,
            tol: 1e-10,
            grid: 64,
        }
    }
}

/// The singular bi-extremal from x₀ in direction θ₀, one JSON record per grid point.
pub fn trace_records(model: &ModelFile, opts: &TraceOptions) -> Result<Vec<Json>, TraceError> {
    let (cs, base, theta_base) = match &model.body {
        ModelBody::Cone(f) => (
            ControlSystem::from_cone(f)?,
            f.x0().to_vec(),
            f.theta0().clone(),
        ),
        ModelBody::Distribution(d) => (
            ControlSystem::from_distribution(d)?,
            d.base().to_vec(),
            Value::Rational(BigRational::from_integer(0.into())),
        ),
        ModelBody::PseudoProduct(_) => return Err(TraceError::Unsupported("pseudo-product")),
    };
    let x0: Vec<Value> = match &opts.x0 {
        Some(x) if x.len() != base.len() => {
            return Err(TraceError::Dimension {
                expected: base.len(),
                got: x.len(),
            })
        }
        Some(x) => x.iter().cloned().map(Value::Rational).collect(),
        None => base,
    };
    let theta0 = opts.theta0.clone().map_or(theta_base, Value::Rational);
    let u0 = [Value::Rational(BigRational::from_integer(1.into())), theta0];
    let p0 = initial_costate(&cs, &x0, &u0)?;
    let xf: Vec<f64> = x0.iter().map(Value::to_f64).collect();
    let uf: Vec<f64> = u0.iter().map(Value::to_f64).collect();
    let bopts = BiExtremalOptions {
        step: StepControl::adaptive(opts.tol).with_h_max(opts.t.abs() / 32.0),
        grid: opts.grid,
        parameter: None,
    };
    let tr = integrate_biextremal(&cs, &xf, &p0, &uf, opts.t, &bopts)?;
    Ok((0..tr.times.len())
        .map(|i| {
            json!({
                "t": float(tr.times[i]),
                "x": floats_json(&tr.states[i]),
                "p": floats_json(&tr.costates[i]),
                "u": floats_json(&tr.controls[i]),
                "residual": float(tr.residuals[i]),
            })
        })
        .collect())
}
