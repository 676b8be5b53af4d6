use std::fmt;
use std::str::FromStr;

use super::extremal::{
    annihilating_costate, initial_costate, integrate_biextremal, lift_leaf, BiExtremalOptions,
    BiExtremalTrace,
};
use super::ode::{dopri5, integrate_on_grid, StepControl};
use super::system::{compile_field, eval_all, ControlSystem};
use super::PathError;
use crate::distduality::PseudoProductStructure;
use crate::scalar::{CompiledExpr, Symbol, Value};
use crate::vecfield::{lie_bracket, VectorField};

/// One of the two line fields of E = K ⊕ L.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    K,
    L,
}

impl FromStr for Side {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "K" | "k" => Ok(Side::K),
            "L" | "l" => Ok(Side::L),
            _ => Err(PathError::InvalidSide(s.to_string())),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::K => "K",
            Side::L => "L",
        })
    }
}

/// The generator of K or L. Its integral curves with the fiber coordinate dropped are the
/// candidate singular paths of the dual side.
pub fn singular_path_field(p: &PseudoProductStructure, side: Side) -> VectorField {
    match side {
        Side::K => p.k().clone(),
        Side::L => p.l().clone(),
    }
}

/// The hypersurface {coordinate = level}.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSpec {
    pub coordinate: Symbol,
    pub level: f64,
}

struct Flow {
    f: Vec<CompiledExpr>,
}

impl Flow {
    fn new(field: &VectorField) -> Result<Self, PathError> {
        Ok(Flow {
            f: compile_field(field, field.chart())?,
        })
    }

    fn at(&self, z: &[f64]) -> Result<Vec<f64>, PathError> {
        eval_all(&self.f, z)
    }
}

fn flow_endpoint(
    flow: &Flow,
    z0: &[f64],
    t: f64,
    ctrl: &StepControl,
) -> Result<Vec<f64>, PathError> {
    let out = dopri5(|_, z: &[f64]| flow.at(z), |_, _| Ok(()), 0.0, z0, t, ctrl)?;
    Ok(out.last().expect("nonempty").1.clone())
}

/// Flows z₀ along `field` for time `t` (negative runs backward).
pub fn integrate_flow(
    field: &VectorField,
    z0: &[f64],
    t: f64,
    ctrl: &StepControl,
) -> Result<Vec<f64>, PathError> {
    if z0.len() != field.chart().dim() {
        return Err(PathError::Precondition(
            "point does not match the field's chart".into(),
        ));
    }
    flow_endpoint(&Flow::new(field)?, z0, t, ctrl)
}

/// Event tolerance on the crossing time.
const CROSSING_TOL: f64 = 1e-10;
const MACRO_STEPS: usize = 128;

/// Follows `flow` from z₀ (forward or backward, whichever heads toward the slice) until it
/// crosses the slice, and returns the crossing point.
pub fn leaf_project(
    flow: &VectorField,
    slice: &SliceSpec,
    z0: &[f64],
    t_max: f64,
) -> Result<Vec<f64>, PathError> {
    let chart = flow.chart();
    let c = chart.index_of(&slice.coordinate).ok_or_else(|| {
        PathError::Precondition(format!("`{}` is not a coordinate", slice.coordinate))
    })?;
    if z0.len() != chart.dim() {
        return Err(PathError::Precondition(
            "point does not match the field's chart".into(),
        ));
    }
    let fl = Flow::new(flow)?;
    let ctrl = StepControl::adaptive(1e-12);
    let phi = |z: &[f64]| z[c] - slice.level;
    let transverse = |z: &[f64]| -> Result<f64, PathError> {
        let v = fl.at(z)?;
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if v[c].abs() <= 1e-12 * n.max(1e-300) {
            Err(PathError::Tangential)
        } else {
            Ok(v[c])
        }
    };
    let d0 = phi(z0);
    if d0 == 0.0 {
        transverse(z0)?;
        return Ok(z0.to_vec());
    }
    let dir = -(d0 * transverse(z0)?).signum();
    let h = dir * t_max / MACRO_STEPS as f64;
    let mut z = z0.to_vec();
    for _ in 0..MACRO_STEPS {
        let next = flow_endpoint(&fl, &z, h, &ctrl)?;
        if phi(&next) == 0.0 {
            transverse(&next)?;
            return Ok(next);
        }
        if phi(&next).signum() != phi(&z).signum() {
            let (mut lo, mut hi) = (0.0, h);
            let mut best = next;
            while (hi - lo).abs() > CROSSING_TOL {
                let mid = 0.5 * (lo + hi);
                let zm = flow_endpoint(&fl, &z, mid, &ctrl)?;
                if phi(&zm).signum() == phi(&z).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                best = zm;
            }
            transverse(&best)?;
            return Ok(best);
        }
        z = next;
    }
    Err(PathError::NoCrossing)
}

#[derive(Clone, Debug)]
pub struct DualityOptions {
    /// Pass threshold on the sup distance.
    pub tol: f64,
    pub step: StepControl,
    /// Number of grid intervals.
    pub grid: usize,
}

impl Default for DualityOptions {
    fn default() -> Self {
        DualityOptions {
            tol: 1e-6,
            step: StepControl::adaptive(1e-10),
            grid: 64,
        }
    }
}

/// Both legs sampled on a common grid of the first state coordinate.
#[derive(Clone, Debug)]
pub struct DualityReport {
    pub side: Side,
    pub sup_distance: f64,
    pub pass: bool,
    /// Values of the first state coordinate.
    pub grid: Vec<f64>,
    /// Leaf states with the fiber coordinate dropped.
    pub leaf: Vec<Vec<f64>>,
    pub extremal: BiExtremalTrace,
    /// Range of the first coordinate on which the comparison holds.
    pub interval: (f64, f64),
}

fn leg(name: &'static str) -> impl Fn(PathError) -> PathError {
    move |e| PathError::Leg {
        leg: name,
        source: Box::new(e),
    }
}

/// Compares the projected integral curve of K or L through z₀ = (x₀, fiber₀) with the
/// singular path of `cs` from x₀ in the direction fixed by the fiber coordinate. Both are
/// parametrized by the first state coordinate over an interval of length `t`.
pub fn verify_duality(
    p: &PseudoProductStructure,
    side: Side,
    cs: &ControlSystem,
    z0: &[Value],
    t: f64,
    opts: &DualityOptions,
) -> Result<DualityReport, PathError> {
    let m = cs.state().dim();
    let zc = p.chart();
    if zc.dim() != m + 1 || z0.len() != m + 1 || cs.state().vars() != &zc.vars()[..m] {
        return Err(PathError::Precondition(
            "the structure must live on the state chart extended by one fiber coordinate".into(),
        ));
    }
    if cs.controls().dim() != 2 {
        return Err(PathError::Precondition(
            "expected a two-control system".into(),
        ));
    }
    let step = match opts.step.fixed_steps {
        Some(_) => opts.step.clone(),
        None => opts.step.clone().with_h_max(t.abs() / 32.0),
    };
    let zf: Vec<f64> = z0.iter().map(Value::to_f64).collect();
    let s0 = zf[0];
    let grid: Vec<f64> = (0..=opts.grid)
        .map(|i| s0 + t * i as f64 / opts.grid as f64)
        .collect();

    let fl = Flow::new(&singular_path_field(p, side)).map_err(leg("leaf"))?;
    let rhs = |_s: f64, z: &[f64]| -> Result<Vec<f64>, PathError> {
        let mut v = fl.at(z)?;
        let d = v[0];
        if d.abs() <= 1e-10 {
            return Err(PathError::NotGraph);
        }
        v.iter_mut().for_each(|x| *x /= d);
        Ok(v)
    };
    let leaf: Vec<Vec<f64>> = integrate_on_grid(rhs, |_, _| Ok(()), &grid, &zf, &step)
        .map_err(leg("leaf"))?
        .into_iter()
        .map(|z| z[..m].to_vec())
        .collect();

    let u0 = [Value::Rational(crate::scalar::int(1)), z0[m].clone()];
    let p0 = initial_costate(cs, &z0[..m], &u0).map_err(leg("extremal"))?;
    let bopts = BiExtremalOptions {
        step,
        grid: opts.grid,
        parameter: Some(0),
    };
    let u0f: Vec<f64> = u0.iter().map(Value::to_f64).collect();
    let extremal =
        integrate_biextremal(cs, &zf[..m], &p0, &u0f, t, &bopts).map_err(leg("extremal"))?;

    let sup_distance = leaf
        .iter()
        .zip(&extremal.states)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    Ok(DualityReport {
        side,
        sup_distance,
        pass: sup_distance <= opts.tol,
        interval: (s0.min(s0 + t), s0.max(s0 + t)),
        grid,
        leaf,
        extremal,
    })
}

/// Runs [`verify_duality`] for each start point on its own thread; results keep the input order.
pub fn verify_duality_batch(
    p: &PseudoProductStructure,
    side: Side,
    cs: &ControlSystem,
    starts: &[Vec<Value>],
    t: f64,
    opts: &DualityOptions,
) -> Vec<Result<DualityReport, PathError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .iter()
            .map(|z0| scope.spawn(move || verify_duality(p, side, cs, z0, t, opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("duality worker panicked"))
            .collect()
    })
}

/// Lifts the leaf of K or L through z₀ with the costate the flag singles out: for L a
/// covector annihilating ∂E and pairing with [K,[K,L]], for K one annihilating ∂⁽³⁾E.
pub fn fibre_lift(
    p: &PseudoProductStructure,
    side: Side,
    z0: &[Value],
    t: f64,
    opts: &BiExtremalOptions,
) -> Result<BiExtremalTrace, PathError> {
    let flag = p.flag();
    if flag.depth() < 4 {
        return Err(PathError::Precondition("flag needs ∂⁽³⁾E".into()));
    }
    let p0 = match side {
        Side::L => {
            let kl = lie_bracket(p.k(), p.l())?;
            let kkl = lie_bracket(p.k(), &kl)?;
            annihilating_costate(flag.level_fields(1), z0, &[kkl])?
        }
        Side::K => annihilating_costate(flag.level_fields(3), z0, &[])?,
    };
    let zf: Vec<f64> = z0.iter().map(Value::to_f64).collect();
    lift_leaf(&singular_path_field(p, side), &zf, &p0, t, opts)
}
