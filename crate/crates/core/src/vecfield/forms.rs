use super::field::{assignment, Frame, VectorField};
use super::linalg::Matrix;
use super::VecFieldError;
use crate::scalar::{int, Chart, RatFunc, ScalarExpr, Value};

/// α = Σ αᵢ dxᵢ
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    chart: Chart,
    coeffs: Vec<RatFunc>,
}

/// ω = Σ_{i<j} ω_ij dxᵢ∧dxⱼ
#[derive(Clone, Debug, PartialEq)]
pub struct TwoForm {
    chart: Chart,
    /// Row-major upper triangle: (0,1), (0,2), …, (n-2,n-1).
    coeffs: Vec<RatFunc>,
}

impl OneForm {
    pub fn new(chart: &Chart, coeffs: Vec<ScalarExpr>) -> Result<Self, VecFieldError> {
        if coeffs.len() != chart.dim() {
            return Err(VecFieldError::CoefficientCount {
                expected: chart.dim(),
                got: coeffs.len(),
            });
        }
        Ok(OneForm {
            chart: chart.clone(),
            coeffs: coeffs
                .iter()
                .map(RatFunc::from_expr)
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn coeff(&self, i: usize) -> &RatFunc {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> Vec<ScalarExpr> {
        self.coeffs.iter().map(|c| c.to_expr(&self.chart)).collect()
    }

    /// The same form on a chart extending this one by trailing coordinates.
    pub fn lift(&self, chart: &Chart) -> Result<OneForm, VecFieldError> {
        if chart.dim() < self.coeffs.len()
            || chart.vars()[..self.coeffs.len()] != *self.chart.vars()
        {
            return Err(VecFieldError::ChartMismatch);
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(chart.dim(), RatFunc::zero());
        Ok(OneForm {
            chart: chart.clone(),
            coeffs,
        })
    }

    pub fn pair_rf(&self, v: &VectorField) -> Result<RatFunc, VecFieldError> {
        if v.chart() != &self.chart {
            return Err(VecFieldError::ChartMismatch);
        }
        Ok(self
            .coeffs
            .iter()
            .zip(v.ratfuncs())
            .fold(RatFunc::zero(), |acc, (a, b)| acc.add(&a.mul(b))))
    }

    /// α(v)
    pub fn pair(&self, v: &VectorField) -> Result<ScalarExpr, VecFieldError> {
        Ok(self.pair_rf(v)?.to_expr(&self.chart))
    }
}

impl TwoForm {
    fn index(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < n);
        i * (2 * n - i - 1) / 2 + (j - i - 1)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// ω_ij for any i, j (antisymmetric extension).
    pub fn coeff(&self, i: usize, j: usize) -> RatFunc {
        let n = self.chart.dim();
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.coeffs[Self::index(n, i, j)].clone(),
            std::cmp::Ordering::Greater => self.coeffs[Self::index(n, j, i)].neg(),
            std::cmp::Ordering::Equal => RatFunc::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(RatFunc::is_zero)
    }

    /// Nonzero components (i, j, ω_ij) with i < j.
    pub fn components(&self) -> Vec<(usize, usize, ScalarExpr)> {
        let n = self.chart.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let c = &self.coeffs[Self::index(n, i, j)];
                if !c.is_zero() {
                    out.push((i, j, c.to_expr(&self.chart)));
                }
            }
        }
        out
    }

    pub fn pair_rf(&self, v: &VectorField, w: &VectorField) -> Result<RatFunc, VecFieldError> {
        if v.chart() != &self.chart || w.chart() != &self.chart {
            return Err(VecFieldError::ChartMismatch);
        }
        let n = self.chart.dim();
        let mut acc = RatFunc::zero();
        for i in 0..n {
            for j in i + 1..n {
                let c = &self.coeffs[Self::index(n, i, j)];
                if c.is_zero() {
                    continue;
                }
                let m = v.coeff(i).mul(w.coeff(j)).sub(&v.coeff(j).mul(w.coeff(i)));
                acc = acc.add(&c.mul(&m));
            }
        }
        Ok(acc)
    }

    /// ω(v, w)
    pub fn pair(&self, v: &VectorField, w: &VectorField) -> Result<ScalarExpr, VecFieldError> {
        Ok(self.pair_rf(v, w)?.to_expr(&self.chart))
    }
}

/// (dα)_ij = ∂ᵢα_j − ∂ⱼαᵢ
pub fn exterior_derivative(alpha: &OneForm) -> Result<TwoForm, VecFieldError> {
    let n = alpha.chart.dim();
    let vars = alpha.chart.vars();
    let mut coeffs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let a = alpha.coeffs[j].differentiate(&vars[i])?;
            let b = alpha.coeffs[i].differentiate(&vars[j])?;
            coeffs.push(a.sub(&b));
        }
    }
    Ok(TwoForm {
        chart: alpha.chart.clone(),
        coeffs,
    })
}

/// Exterior derivative of a two-form, as the coefficients of dxᵢ∧dxⱼ∧dx_k, i<j<k.
pub fn exterior_derivative2(omega: &TwoForm) -> Result<Vec<RatFunc>, VecFieldError> {
    let n = omega.chart.dim();
    let vars = omega.chart.vars();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let t = omega
                    .coeff(j, k)
                    .differentiate(&vars[i])?
                    .sub(&omega.coeff(i, k).differentiate(&vars[j])?)
                    .add(&omega.coeff(i, j).differentiate(&vars[k])?);
                out.push(t);
            }
        }
    }
    Ok(out)
}

/// Coefficient of dx₁∧…∧dx₅ in α∧dα∧dα on a 5-chart.
pub fn contact_coefficient(alpha: &OneForm) -> Result<ScalarExpr, VecFieldError> {
    if alpha.chart.dim() != 5 {
        return Err(VecFieldError::NotFiveDimensional(alpha.chart.dim()));
    }
    let w = exterior_derivative(alpha)?;
    let mut acc = RatFunc::zero();
    for k in 0..5 {
        if alpha.coeffs[k].is_zero() {
            continue;
        }
        let rest: Vec<usize> = (0..5).filter(|&i| i != k).collect();
        let (a, b, c, d) = (rest[0], rest[1], rest[2], rest[3]);
        // (ω∧ω)_abcd = 2(ω_ab ω_cd − ω_ac ω_bd + ω_ad ω_bc)
        let pf = w
            .coeff(a, b)
            .mul(&w.coeff(c, d))
            .sub(&w.coeff(a, c).mul(&w.coeff(b, d)))
            .add(&w.coeff(a, d).mul(&w.coeff(b, c)));
        let term = alpha.coeffs[k]
            .mul(&pf)
            .scale(&int(if k % 2 == 0 { 2 } else { -2 }));
        acc = acc.add(&term);
    }
    Ok(acc.to_expr(&alpha.chart))
}

/// True iff α∧dα∧dα ≠ 0 at `point`.
pub fn check_contact(alpha: &OneForm, point: &[Value]) -> Result<bool, VecFieldError> {
    let c = contact_coefficient(alpha)?;
    let v = RatFunc::from_expr(&c)?.eval(&assignment(&alpha.chart, point))?;
    Ok(match v {
        Value::Rational(q) => q != int(0),
        Value::Real(x) => x.abs() > 1e-12,
    })
}

/// Pointwise Cauchy characteristic directions of `sub` inside `ambient`: constant
/// coefficient vectors c with Σ cᵢ[vᵢ, w_j](p) ∈ ambient(p) for every generator w_j.
pub fn cauchy_characteristic_at(
    sub: &Frame,
    ambient: &Frame,
    point: &[Value],
) -> Result<Vec<Vec<Value>>, VecFieldError> {
    let amb_rows = ambient
        .fields()
        .iter()
        .map(|f| f.eval_at(point))
        .collect::<Result<Vec<_>, _>>()?;
    // Covectors annihilating the ambient span: nullspace of the matrix with rows = fields.
    let annihilators = Matrix::from_values(amb_rows).nullspace();
    let mut rows: Vec<Vec<Value>> = Vec::new();
    let brackets: Vec<Vec<Vec<Value>>> = sub
        .fields()
        .iter()
        .map(|v| {
            ambient
                .fields()
                .iter()
                .map(|w| super::lie_bracket(v, w)?.eval_at(point))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    for phi in &annihilators {
        for j in 0..ambient.len() {
            rows.push(brackets.iter().map(|bi| dot(phi, &bi[j])).collect());
        }
    }
    if rows.is_empty() {
        return Ok(identity(sub.len()));
    }
    Ok(Matrix::from_values(rows).nullspace())
}

fn dot(a: &[Value], b: &[Value]) -> Value {
    let exact = a.iter().chain(b).all(|v| v.as_rational().is_some());
    if exact {
        Value::Rational(
            a.iter()
                .zip(b)
                .map(|(x, y)| x.as_rational().unwrap() * y.as_rational().unwrap())
                .sum(),
        )
    } else {
        Value::Real(a.iter().zip(b).map(|(x, y)| x.to_f64() * y.to_f64()).sum())
    }
}

fn identity(k: usize) -> Vec<Vec<Value>> {
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| Value::Rational(int(i64::from(i == j))))
                .collect()
        })
        .collect()
}
