use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};

use super::ode::{integrate_on_grid, StepControl};
use super::system::{eval_all, Compiled, ControlSystem, Kind};
use super::PathError;
use crate::scalar::{RatFunc, Value};
use crate::vecfield::{assignment, lie_bracket, linalg::Matrix, DistributionFlag, VectorField};

/// Convergence threshold for the control equations.
pub const NEWTON_TOL: f64 = 1e-12;
/// Relative annihilation tolerance used by [`classify_biextremal`].
pub const CLASSIFY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    RegularSingular,
    TotallyIrregular,
    Unclassified,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::RegularSingular => "regular-singular",
            Classification::TotallyIrregular => "totally-irregular",
            Classification::Unclassified => "unclassified",
        }
    }
}

/// A sampled solution (x(t), p(t), u(t)) of the constrained Hamiltonian system.
#[derive(Clone, Debug)]
pub struct BiExtremalTrace {
    /// Time, or the value of the parametrizing coordinate.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Unit costates.
    pub costates: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    /// max_k |∂H/∂u_k| at each grid point.
    pub residuals: Vec<f64>,
    pub tag: Classification,
}

impl BiExtremalTrace {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct BiExtremalOptions {
    pub step: StepControl,
    /// Number of grid intervals.
    pub grid: usize,
    /// Integrate against this state coordinate instead of time.
    pub parameter: Option<usize>,
}

impl Default for BiExtremalOptions {
    fn default() -> Self {
        BiExtremalOptions {
            step: StepControl::adaptive(1e-10),
            grid: 64,
            parameter: None,
        }
    }
}

enum Mode {
    /// Every control is gauge-fixed.
    Fixed,
    /// Two-control linear system: u ∝ (⟨p,η₅⟩, −⟨p,η₄⟩).
    Hierarchy,
    /// Newton on ∂H/∂u_k = 0 over the free controls.
    Newton(Vec<usize>),
}

struct Solver<'a> {
    c: &'a Compiled,
    gauge: &'a [Option<f64>],
    mode: Mode,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn args(x: &[f64], u: &[f64]) -> Vec<f64> {
    x.iter().chain(u).cloned().collect()
}

impl<'a> Solver<'a> {
    fn new(cs: &'a ControlSystem, c: &'a Compiled) -> Self {
        let gauge = cs.gauge();
        let free: Vec<usize> = (0..gauge.len()).filter(|&k| gauge[k].is_none()).collect();
        let mode = if free.is_empty() {
            Mode::Fixed
        } else if c.hierarchy.is_some() && free.len() == gauge.len() {
            Mode::Hierarchy
        } else {
            Mode::Newton(free)
        };
        Solver { c, gauge, mode }
    }

    fn hierarchy_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, PathError> {
        let h = self.c.hierarchy.as_ref().expect("hierarchy mode");
        h.iter().map(|v| eval_all(v, x)).collect()
    }

    fn dfdu(&self, x: &[f64], u: &[f64], k: usize) -> Result<Vec<f64>, PathError> {
        let a = args(x, u);
        self.c
            .dfdu
            .iter()
            .map(|row| eval_all(&row[k..=k], &a).map(|v| v[0]))
            .collect()
    }

    fn solve(&self, x: &[f64], p: &[f64], guess: &[f64]) -> Result<Vec<f64>, PathError> {
        let mut u: Vec<f64> = guess
            .iter()
            .zip(self.gauge)
            .map(|(g, fixed)| fixed.unwrap_or(*g))
            .collect();
        match &self.mode {
            Mode::Fixed => Ok(u),
            Mode::Hierarchy => {
                let h = self.hierarchy_at(x)?;
                let (a, b) = (dot(p, &h[3]), dot(p, &h[4]));
                let n = (a * a + b * b).sqrt();
                if n <= 1e-12 * norm(p) {
                    return Err(PathError::RankDrop);
                }
                let mut v = vec![b / n, -a / n];
                if dot(&v, guess) < 0.0 {
                    v = vec![-v[0], -v[1]];
                }
                Ok(v)
            }
            Mode::Newton(free) => {
                let gfun = |u: &[f64]| -> Result<Vec<f64>, PathError> {
                    let a = args(x, u);
                    free.iter()
                        .map(|&k| {
                            let col: Vec<f64> =
                                self.c.dfdu.iter().map(|row| row[k].eval(&a)).collect();
                            let v = dot(p, &col);
                            if v.is_finite() {
                                Ok(v)
                            } else {
                                Err(PathError::NonFinite)
                            }
                        })
                        .collect()
                };
                let scale = norm(p).max(1e-300);
                let mut g = gfun(&u)?;
                for _ in 0..50 {
                    let gn = norm(&g);
                    if gn <= NEWTON_TOL * scale {
                        return Ok(u);
                    }
                    let a = args(x, &u);
                    let n = free.len();
                    let mut jm = DMatrix::<f64>::zeros(n, n);
                    for (r, &k) in free.iter().enumerate() {
                        for (c, &l) in free.iter().enumerate() {
                            let col: Vec<f64> =
                                self.c.d2fdu.iter().map(|d| d[k][l].eval(&a)).collect();
                            jm[(r, c)] = dot(p, &col);
                        }
                    }
                    let jmax = jm.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let lu = jm.lu();
                    let det = lu.determinant();
                    if !det.is_finite()
                        || det.abs() <= 1e-14 * jmax.powi(n as i32).max(1e-300)
                        || jmax == 0.0
                    {
                        return Err(PathError::RankDrop);
                    }
                    let delta = lu
                        .solve(&DVector::from_vec(g.clone()))
                        .ok_or(PathError::RankDrop)?;
                    let mut lambda = 1.0;
                    let mut accepted = false;
                    for _ in 0..12 {
                        let mut trial = u.clone();
                        for (i, &k) in free.iter().enumerate() {
                            trial[k] -= lambda * delta[i];
                        }
                        let gt = gfun(&trial)?;
                        if norm(&gt) < gn {
                            u = trial;
                            g = gt;
                            accepted = true;
                            break;
                        }
                        lambda /= 2.0;
                    }
                    if !accepted {
                        return Err(PathError::NewtonDivergence);
                    }
                }
                if norm(&g) <= NEWTON_TOL * scale * 10.0 {
                    Ok(u)
                } else {
                    Err(PathError::NewtonDivergence)
                }
            }
        }
    }

    /// Vectors v with ⟨p, v⟩ = 0 conserved along the flow.
    fn invariants(&self, x: &[f64], u: &[f64]) -> Result<Vec<Vec<f64>>, PathError> {
        match &self.mode {
            Mode::Fixed => Ok(Vec::new()),
            Mode::Hierarchy => Ok(self.hierarchy_at(x)?.into_iter().take(3).collect()),
            Mode::Newton(_) => (0..self.gauge.len())
                .filter(|&k| self.gauge[k].is_some())
                .map(|k| self.dfdu(x, u, k))
                .collect(),
        }
    }

    fn residual(&self, x: &[f64], p: &[f64], u: &[f64]) -> Result<f64, PathError> {
        let mut r: f64 = 0.0;
        for k in 0..self.gauge.len() {
            r = r.max(dot(p, &self.dfdu(x, u, k)?).abs());
        }
        if let Mode::Hierarchy = self.mode {
            r = r.max(dot(p, &self.hierarchy_at(x)?[2]).abs());
        }
        Ok(r)
    }

    fn rhs(&self, x: &[f64], p: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>), PathError> {
        let a = args(x, u);
        let xdot = eval_all(&self.c.f, &a)?;
        let m = self.c.m;
        let mut pdot = vec![0.0; m];
        for i in 0..m {
            let row = eval_all(&self.c.dfdx[i], &a)?;
            for j in 0..m {
                pdot[j] -= p[i] * row[j];
            }
        }
        Ok((xdot, pdot))
    }
}

/// Removes the components of p along the span of `vs`.
fn project(p: &mut [f64], vs: &[Vec<f64>]) {
    if vs.is_empty() {
        return;
    }
    let m = p.len();
    let k = vs.len();
    let v = DMatrix::from_fn(m, k, |i, j| vs[j][i]);
    let gram = v.transpose() * &v;
    let rhs = v.transpose() * DVector::from_column_slice(p);
    if let Some(c) = gram.lu().solve(&rhs) {
        let corr = v * c;
        for i in 0..m {
            p[i] -= corr[i];
        }
    }
}

/// Integrates ẋ = ∂H/∂p, ṗ = −∂H/∂x with u kept on ∂H/∂u = 0, from (x₀, p₀, u₀)
/// over a parameter interval of length `t_end`.
pub fn integrate_biextremal(
    cs: &ControlSystem,
    x0: &[f64],
    p0: &[f64],
    u0: &[f64],
    t_end: f64,
    opts: &BiExtremalOptions,
) -> Result<BiExtremalTrace, PathError> {
    let m = cs.state().dim();
    if x0.len() != m || p0.len() != m || u0.len() != cs.controls().dim() {
        return Err(PathError::Precondition("dimension mismatch".into()));
    }
    if norm(p0) == 0.0 {
        return Err(PathError::Precondition("p₀ = 0".into()));
    }
    let c = Compiled::new(cs)?;
    let solver = Solver::new(cs, &c);
    let p0n: Vec<f64> = p0.iter().map(|v| v / norm(p0)).collect();
    let given: Vec<f64> = u0
        .iter()
        .zip(cs.gauge())
        .map(|(u, g)| g.unwrap_or(*u))
        .collect();
    let r0 = solver.residual(x0, &p0n, &given)?;
    if r0 > 1e-8 {
        return Err(PathError::Precondition(format!(
            "∂H/∂u = {r0:e} at the initial point"
        )));
    }
    let u_start = solver.solve(x0, &p0n, u0)?;
    let guess = RefCell::new(u_start);
    let param = opts.parameter;
    let rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>, PathError> {
        let (x, p) = y.split_at(m);
        let u = solver.solve(x, p, &guess.borrow())?;
        let (mut xd, mut pd) = solver.rhs(x, p, &u)?;
        if let Some(j) = param {
            let s = xd[j];
            if s.abs() <= 1e-10 {
                return Err(PathError::NotGraph);
            }
            xd.iter_mut().for_each(|v| *v /= s);
            pd.iter_mut().for_each(|v| *v /= s);
        }
        xd.extend(pd);
        Ok(xd)
    };
    let post = |_t: f64, y: &mut Vec<f64>| -> Result<(), PathError> {
        let (x, p) = y.split_at_mut(m);
        let u = solver.solve(x, p, &guess.borrow())?;
        project(p, &solver.invariants(x, &u)?);
        let n = norm(p);
        if n <= 1e-12 {
            return Err(PathError::CostateVanished);
        }
        p.iter_mut().for_each(|v| *v /= n);
        let u = solver.solve(x, p, &u)?;
        *guess.borrow_mut() = u;
        Ok(())
    };
    let s0 = param.map_or(0.0, |j| x0[j]);
    let grid: Vec<f64> = (0..=opts.grid)
        .map(|i| s0 + t_end * i as f64 / opts.grid as f64)
        .collect();
    let mut y0 = x0.to_vec();
    y0.extend(&p0n);
    let ys = integrate_on_grid(rhs, post, &grid, &y0, &opts.step)?;
    let mut trace = BiExtremalTrace {
        times: grid,
        states: Vec::new(),
        costates: Vec::new(),
        controls: Vec::new(),
        residuals: Vec::new(),
        tag: Classification::Unclassified,
    };
    let mut u = u0.to_vec();
    for y in ys {
        let (x, p) = y.split_at(m);
        u = solver.solve(x, p, &u)?;
        trace.residuals.push(solver.residual(x, p, &u)?);
        trace.states.push(x.to_vec());
        trace.costates.push(p.to_vec());
        trace.controls.push(u.clone());
    }
    Ok(trace)
}

/// Lifts the integral curve of `field` from z₀ with costate p₀ (the single-field
/// Hamiltonian system with its control fixed to 1).
pub fn lift_leaf(
    field: &VectorField,
    z0: &[f64],
    p0: &[f64],
    t_end: f64,
    opts: &BiExtremalOptions,
) -> Result<BiExtremalTrace, PathError> {
    let cs = ControlSystem::from_frame(field.chart(), std::slice::from_ref(field))?;
    let name = cs.controls().var(0).as_str().to_string();
    let cs = cs.with_gauge(&name, 1.0)?;
    integrate_biextremal(&cs, z0, p0, &[1.0], t_end, opts)
}

/// Outcome of [`classify_biextremal`], with the worst relative annihilation residuals.
#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub tag: Classification,
    /// max over the grid of max_{v ∈ ∂E} |⟨p, v⟩| / (|p||v|)
    pub d1_residual: f64,
    /// max over the grid of max_{v ∈ ∂⁽²⁾E} |⟨p, v⟩| / (|p||v|)
    pub d2_residual: f64,
    /// min over the grid of max_{v ∈ ∂⁽²⁾E} |⟨p, v⟩| / (|p||v|)
    pub d2_min: f64,
}

fn relative_annihilation(fields: &[VectorField], z: &[f64], p: &[f64]) -> Result<f64, PathError> {
    let pt: Vec<Value> = z.iter().map(|v| Value::Real(*v)).collect();
    let pn = norm(p);
    let mut worst: f64 = 0.0;
    for f in fields {
        let v = f.eval_f64(&pt)?;
        let vn = norm(&v);
        if vn > 0.0 {
            worst = worst.max(dot(p, &v).abs() / (pn * vn));
        }
    }
    Ok(worst)
}

/// Regular singular iff p annihilates ∂E but not ∂⁽²⁾E at every grid point; totally
/// irregular iff p annihilates ∂⁽²⁾E at every grid point.
pub fn classify_biextremal(
    flag: &DistributionFlag,
    trace: &BiExtremalTrace,
) -> Result<ClassificationReport, PathError> {
    if flag.depth() < 3 {
        return Err(PathError::Precondition("flag needs ∂E and ∂⁽²⁾E".into()));
    }
    if trace
        .states
        .first()
        .is_some_and(|z| z.len() != flag.chart().dim())
    {
        return Err(PathError::Precondition(
            "trace does not live on the flag's chart".into(),
        ));
    }
    let (d1, d2) = (flag.level_fields(1), flag.level_fields(2));
    let mut d1_res: f64 = 0.0;
    let mut d2_res: f64 = 0.0;
    let mut d2_min = f64::INFINITY;
    for (z, p) in trace.states.iter().zip(&trace.costates) {
        d1_res = d1_res.max(relative_annihilation(d1, z, p)?);
        let r2 = relative_annihilation(d2, z, p)?;
        d2_res = d2_res.max(r2);
        d2_min = d2_min.min(r2);
    }
    let tag = if d2_res <= CLASSIFY_TOL {
        Classification::TotallyIrregular
    } else if d1_res <= CLASSIFY_TOL && d2_min > CLASSIFY_TOL {
        Classification::RegularSingular
    } else {
        Classification::Unclassified
    };
    Ok(ClassificationReport {
        tag,
        d1_residual: d1_res,
        d2_residual: d2_res,
        d2_min,
    })
}

fn dot_values(a: &[Value], b: &[Value]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.to_f64() * y.to_f64()).sum()
}

/// A unit covector annihilating `fields` at `point`. Among the annihilator basis the
/// vector pairing most strongly with `prefer` is chosen.
pub fn annihilating_costate(
    fields: &[VectorField],
    point: &[Value],
    prefer: &[VectorField],
) -> Result<Vec<f64>, PathError> {
    let rows = fields
        .iter()
        .map(|f| f.eval_at(point))
        .collect::<Result<Vec<_>, _>>()?;
    let basis = Matrix::from_values(rows).nullspace();
    let pref = prefer
        .iter()
        .map(|f| f.eval_at(point))
        .collect::<Result<Vec<_>, _>>()?;
    let score = |b: &Vec<Value>| pref.iter().map(|v| dot_values(b, v).abs()).sum::<f64>();
    let best = basis
        .iter()
        .fold(None::<(&Vec<Value>, f64)>, |acc, b| {
            let s = score(b);
            match acc {
                Some((_, t)) if t >= s => acc,
                _ => Some((b, s)),
            }
        })
        .ok_or(PathError::RankDrop)?;
    if !prefer.is_empty() && best.1 == 0.0 {
        return Err(PathError::RankDrop);
    }
    let v: Vec<f64> = best.0.iter().map(Value::to_f64).collect();
    let n = norm(&v);
    Ok(v.iter().map(|x| x / n).collect())
}

/// A costate making (x₀, u₀) the start of a singular bi-extremal: for linear two-control
/// systems p₀ annihilates η₁, η₂, η₃ and u₁η₄ + u₂η₅; for one free control θ it
/// annihilates F, ∂_θF, ∂³_θF and pairs nontrivially with ∂²_θF.
pub fn initial_costate(
    cs: &ControlSystem,
    x0: &[Value],
    u0: &[Value],
) -> Result<Vec<f64>, PathError> {
    if let (Kind::Linear(fields), true) = (&cs.kind, cs.gauge().iter().all(Option::is_none)) {
        if fields.len() == 2 {
            let e3 = lie_bracket(&fields[0], &fields[1])?;
            let e4 = lie_bracket(&fields[0], &e3)?;
            let e5 = lie_bracket(&fields[1], &e3)?;
            let to_rf = |v: &Value| match v {
                Value::Rational(q) => RatFunc::constant(q.clone()),
                Value::Real(x) => {
                    RatFunc::constant(num_rational::BigRational::from_float(*x).unwrap_or_default())
                }
            };
            let w = e4.scale(&to_rf(&u0[0])).add(&e5.scale(&to_rf(&u0[1])))?;
            return annihilating_costate(&[fields[0].clone(), fields[1].clone(), e3, w], x0, &[e5]);
        }
    }
    let free: Vec<usize> = (0..cs.gauge().len())
        .filter(|&k| cs.gauge()[k].is_none())
        .collect();
    let [k] = free[..] else {
        return Err(PathError::Precondition(
            "initial costate needs one free control or a linear two-control system".into(),
        ));
    };
    let theta = cs.controls().var(k).clone();
    let mut derivs = vec![cs.dynamics_rf().to_vec()];
    for _ in 0..3 {
        let last = derivs.last().expect("nonempty");
        derivs.push(
            last.iter()
                .map(|f| f.differentiate(&theta))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    let mut point: Vec<Value> = x0.to_vec();
    point.extend(u0.iter().cloned());
    let a = assignment(cs.joint(), &point);
    let fields = derivs
        .iter()
        .map(|d| {
            let vals = d
                .iter()
                .map(|f| f.eval(&a))
                .collect::<Result<Vec<_>, _>>()?;
            let rfs = vals
                .iter()
                .map(|v| match v {
                    Value::Rational(q) => Ok(RatFunc::constant(q.clone())),
                    Value::Real(_) => Err(PathError::Precondition(
                        "base point must be rational".into(),
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(VectorField::from_ratfuncs(cs.state(), rfs)?)
        })
        .collect::<Result<Vec<_>, PathError>>()?;
    annihilating_costate(
        &[fields[0].clone(), fields[1].clone(), fields[3].clone()],
        x0,
        &[fields[2].clone()],
    )
}
