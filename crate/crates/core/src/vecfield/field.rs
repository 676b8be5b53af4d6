use std::fmt;

use num_rational::BigRational;

use super::linalg::{solve_columns, Matrix, Solve};
use super::VecFieldError;
use crate::scalar::{
    parse_expr, Assignment, Chart, OpaqueRegistry, RatFunc, SampleBox, ScalarExpr, Symbol, Value,
};

/// A point in chart coordinates, one value per chart variable.
pub type Point = Vec<Value>;

pub fn assignment(chart: &Chart, point: &[Value]) -> Assignment {
    chart
        .vars()
        .iter()
        .cloned()
        .zip(point.iter().cloned())
        .collect()
}

/// Converts rational coordinates to a [`Point`].
pub fn rational_point(coords: &[BigRational]) -> Point {
    coords.iter().cloned().map(Value::Rational).collect()
}

/// Exact Halton samples of `bx`, reordered to chart coordinates. Coordinates missing
/// from the box are taken from `base`.
pub fn box_points(chart: &Chart, bx: &SampleBox, base: &[Value], n: usize) -> Vec<Point> {
    bx.samples(n)
        .into_iter()
        .map(|pt| {
            chart
                .vars()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    pt.iter()
                        .find(|(s, _)| s == v)
                        .map(|(_, q)| Value::Rational(q.clone()))
                        .unwrap_or_else(|| base[i].clone())
                })
                .collect()
        })
        .collect()
}

/// The box `base ± half_width` over every chart coordinate. Requires a rational base.
pub fn box_around(
    chart: &Chart,
    base: &[Value],
    half_width: &BigRational,
) -> Result<SampleBox, VecFieldError> {
    let center: Vec<(Symbol, BigRational)> = chart
        .vars()
        .iter()
        .zip(base)
        .map(|(s, v)| {
            v.as_rational()
                .cloned()
                .map(|q| (s.clone(), q))
                .ok_or(VecFieldError::NonRationalBase)
        })
        .collect::<Result<_, _>>()?;
    Ok(SampleBox::around(&center, half_width)?)
}

/// A vector field Σ vⁱ ∂/∂xᵢ with coefficients kept in rational normal form.
#[derive(Clone, PartialEq)]
pub struct VectorField {
    chart: Chart,
    coeffs: Vec<RatFunc>,
}

impl VectorField {
    pub fn new(chart: &Chart, coeffs: Vec<ScalarExpr>) -> Result<Self, VecFieldError> {
        if coeffs.len() != chart.dim() {
            return Err(VecFieldError::CoefficientCount {
                expected: chart.dim(),
                got: coeffs.len(),
            });
        }
        let coeffs = coeffs
            .iter()
            .map(RatFunc::from_expr)
            .collect::<Result<_, _>>()?;
        Ok(VectorField {
            chart: chart.clone(),
            coeffs,
        })
    }

    pub fn from_ratfuncs(chart: &Chart, coeffs: Vec<RatFunc>) -> Result<Self, VecFieldError> {
        if coeffs.len() != chart.dim() {
            return Err(VecFieldError::CoefficientCount {
                expected: chart.dim(),
                got: coeffs.len(),
            });
        }
        Ok(VectorField {
            chart: chart.clone(),
            coeffs,
        })
    }

    /// Parses one coefficient string per chart coordinate.
    pub fn parse(
        chart: &Chart,
        registry: &OpaqueRegistry,
        coeffs: &[&str],
    ) -> Result<Self, VecFieldError> {
        let exprs = coeffs
            .iter()
            .map(|c| parse_expr(c, chart, registry))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(chart, exprs)
    }

    pub fn zero(chart: &Chart) -> Self {
        VectorField {
            chart: chart.clone(),
            coeffs: vec![RatFunc::zero(); chart.dim()],
        }
    }

    /// The coordinate field ∂/∂xᵢ.
    pub fn coordinate(chart: &Chart, i: usize) -> Self {
        let mut v = Self::zero(chart);
        v.coeffs[i] = RatFunc::one();
        v
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, i: usize) -> &RatFunc {
        &self.coeffs[i]
    }

    pub fn ratfuncs(&self) -> &[RatFunc] {
        &self.coeffs
    }

    /// Coefficients as expressions printed in chart order.
    pub fn coeffs(&self) -> Vec<ScalarExpr> {
        self.coeffs.iter().map(|c| c.to_expr(&self.chart)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(RatFunc::is_zero)
    }

    fn same_chart(&self, o: &VectorField) -> Result<(), VecFieldError> {
        if self.chart == o.chart {
            Ok(())
        } else {
            Err(VecFieldError::ChartMismatch)
        }
    }

    pub fn add(&self, o: &VectorField) -> Result<VectorField, VecFieldError> {
        self.same_chart(o)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&o.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    pub fn sub(&self, o: &VectorField) -> Result<VectorField, VecFieldError> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(RatFunc::neg).collect(),
        }
    }

    /// f · v
    pub fn scale(&self, f: &RatFunc) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(|c| c.mul(f)).collect(),
        }
    }

    /// The directional derivative v(f).
    pub fn apply(&self, f: &RatFunc) -> Result<RatFunc, VecFieldError> {
        let mut acc = RatFunc::zero();
        for (c, x) in self.coeffs.iter().zip(self.chart.vars()) {
            if c.is_zero() {
                continue;
            }
            let d = f.differentiate(x)?;
            if !d.is_zero() {
                acc = acc.add(&c.mul(&d));
            }
        }
        Ok(acc)
    }

    /// Same field on a larger chart whose leading coordinates are this chart's.
    pub fn lift(&self, chart: &Chart) -> Result<VectorField, VecFieldError> {
        if chart.dim() < self.dim() || chart.vars()[..self.dim()] != *self.chart.vars() {
            return Err(VecFieldError::ChartMismatch);
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(chart.dim(), RatFunc::zero());
        Ok(VectorField {
            chart: chart.clone(),
            coeffs,
        })
    }

    /// Drops trailing coordinates, keeping the components on `chart`.
    pub fn project(&self, chart: &Chart) -> Result<VectorField, VecFieldError> {
        if chart.dim() > self.dim() || self.chart.vars()[..chart.dim()] != *chart.vars() {
            return Err(VecFieldError::ChartMismatch);
        }
        Ok(VectorField {
            chart: chart.clone(),
            coeffs: self.coeffs[..chart.dim()].to_vec(),
        })
    }

    pub fn eval_at(&self, point: &[Value]) -> Result<Vec<Value>, VecFieldError> {
        let a = assignment(&self.chart, point);
        Ok(self
            .coeffs
            .iter()
            .map(|c| c.eval(&a))
            .collect::<Result<_, _>>()?)
    }

    pub fn eval_f64(&self, point: &[Value]) -> Result<Vec<f64>, VecFieldError> {
        Ok(self.eval_at(point)?.iter().map(Value::to_f64).collect())
    }

    /// Substitutes `sym := value` in every coefficient.
    pub fn substitute(
        &self,
        sym: &Symbol,
        value: &ScalarExpr,
    ) -> Result<VectorField, VecFieldError> {
        let coeffs = self
            .coeffs()
            .iter()
            .map(|c| RatFunc::from_expr(&c.substitute(sym, value)))
            .collect::<Result<_, _>>()?;
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs,
        })
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, x) in self.coeffs().iter().zip(self.chart.vars()) {
            if c.is_zero_literal() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if c.is_one_literal() {
                write!(f, "d/d{x}")?;
            } else {
                write!(f, "({c})*d/d{x}")?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// [v, w]ⁱ = Σⱼ vʲ ∂ⱼwⁱ − wʲ ∂ⱼvⁱ.
pub fn lie_bracket(v: &VectorField, w: &VectorField) -> Result<VectorField, VecFieldError> {
    v.same_chart(w)?;
    let coeffs = (0..v.dim())
        .map(|i| Ok(v.apply(&w.coeffs[i])?.sub(&w.apply(&v.coeffs[i])?)))
        .collect::<Result<Vec<_>, VecFieldError>>()?;
    Ok(VectorField {
        chart: v.chart.clone(),
        coeffs,
    })
}

/// Rank of the coefficient matrix of `fields` at `point`.
pub fn rank_at(fields: &[VectorField], point: &[Value]) -> Result<usize, VecFieldError> {
    if fields.is_empty() {
        return Ok(0);
    }
    for f in &fields[1..] {
        fields[0].same_chart(f)?;
    }
    let rows = fields
        .iter()
        .map(|f| f.eval_at(point))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::from_values(rows).rank())
}

/// An ordered generating set, independent at its base point.
#[derive(Clone, Debug)]
pub struct Frame {
    chart: Chart,
    fields: Vec<VectorField>,
    base: Point,
}

impl Frame {
    pub fn new(
        chart: &Chart,
        fields: Vec<VectorField>,
        base: Point,
    ) -> Result<Self, VecFieldError> {
        if base.len() != chart.dim() {
            return Err(VecFieldError::CoefficientCount {
                expected: chart.dim(),
                got: base.len(),
            });
        }
        for f in &fields {
            if f.chart() != chart {
                return Err(VecFieldError::ChartMismatch);
            }
        }
        let r = rank_at(&fields, &base)?;
        if r < fields.len() {
            return Err(VecFieldError::DependentFrame {
                rank: r,
                len: fields.len(),
            });
        }
        Ok(Frame {
            chart: chart.clone(),
            fields,
            base,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn base(&self) -> &[Value] {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// The same fields with another base point (independence rechecked).
    pub fn at(&self, base: Point) -> Result<Frame, VecFieldError> {
        Frame::new(&self.chart, self.fields.clone(), base)
    }

    pub fn rank_at(&self, point: &[Value]) -> Result<usize, VecFieldError> {
        rank_at(&self.fields, point)
    }
}

/// Outcome of [`reduce_mod`].
#[derive(Clone, Debug, PartialEq)]
pub enum Reduction {
    Member(Vec<Value>),
    Residual(Vec<Value>),
}

impl Reduction {
    pub fn is_member(&self) -> bool {
        matches!(self, Reduction::Member(_))
    }
}

/// Expresses v(point) in the frame at `point`.
pub fn reduce_mod(
    v: &VectorField,
    frame: &Frame,
    point: &[Value],
) -> Result<Reduction, VecFieldError> {
    if v.chart() != frame.chart() {
        return Err(VecFieldError::ChartMismatch);
    }
    let cols = frame
        .fields
        .iter()
        .map(|f| f.eval_at(point))
        .collect::<Result<Vec<_>, _>>()?;
    let b = v.eval_at(point)?;
    Ok(match solve_columns(&cols, &b) {
        Solve::Solution(c) => Reduction::Member(c),
        Solve::Inconsistent { residual } => Reduction::Residual(residual),
    })
}

/// Symbolic reduction of a field against a frame.
#[derive(Clone, Debug)]
pub struct SymbolicReduction {
    /// Coefficients on the pivot rows: v ≡ Σ cᵢ fᵢ + residual.
    pub coeffs: Vec<RatFunc>,
    /// Remaining components on the rows not used as pivots, indexed by chart coordinate.
    pub residual: Vec<(usize, RatFunc)>,
}

impl SymbolicReduction {
    pub fn is_member(&self) -> bool {
        self.residual.iter().all(|(_, r)| r.is_zero())
    }
}

/// Gaussian elimination over rational functions, with pivots chosen by the largest
/// value at `point`. Valid on the neighborhood of `point` where the pivots do not vanish.
pub fn reduce_mod_symbolic(
    v: &VectorField,
    frame: &[VectorField],
    point: &[Value],
) -> Result<SymbolicReduction, VecFieldError> {
    reduce_many_symbolic(std::slice::from_ref(v), frame, point).map(|mut r| r.remove(0))
}

/// [`reduce_mod_symbolic`] for several right-hand sides sharing one elimination.
pub fn reduce_many_symbolic(
    vs: &[VectorField],
    frame: &[VectorField],
    point: &[Value],
) -> Result<Vec<SymbolicReduction>, VecFieldError> {
    let n = vs.first().map_or(0, VectorField::dim);
    let k = frame.len();
    for f in frame.iter().chain(vs) {
        if f.dim() != n || f.chart() != vs[0].chart() {
            return Err(VecFieldError::ChartMismatch);
        }
    }
    let chart = vs[0].chart().clone();
    let a = assignment(&chart, point);
    // rows[i] = [frame coefficients..., rhs...]
    let mut rows: Vec<Vec<RatFunc>> = (0..n)
        .map(|i| {
            frame
                .iter()
                .map(|f| f.coeffs[i].clone())
                .chain(vs.iter().map(|v| v.coeffs[i].clone()))
                .collect()
        })
        .collect();
    let mut pivot_rows: Vec<usize> = Vec::with_capacity(k);
    for c in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (r, row) in rows.iter().enumerate() {
            if pivot_rows.contains(&r) || row[c].is_zero() {
                continue;
            }
            let val = row[c].eval(&a)?.to_f64().abs();
            if val > 0.0 && best.is_none_or(|b| val > b.1) {
                best = Some((r, val));
            }
        }
        let Some((p, _)) = best else {
            return Err(VecFieldError::DependentFrame { rank: c, len: k });
        };
        let inv = rows[p][c].recip()?;
        let prow: Vec<RatFunc> = rows[p].iter().map(|x| x.mul(&inv)).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == p || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, y) in row.iter_mut().zip(&prow).skip(c) {
                if !y.is_zero() {
                    *x = x.sub(&f.mul(y));
                }
            }
        }
        rows[p] = prow;
        pivot_rows.push(p);
    }
    Ok((0..vs.len())
        .map(|j| SymbolicReduction {
            coeffs: pivot_rows.iter().map(|&p| rows[p][k + j].clone()).collect(),
            residual: (0..n)
                .filter(|r| !pivot_rows.contains(r))
                .map(|r| (r, rows[r][k + j].clone()))
                .collect(),
        })
        .collect())
}
