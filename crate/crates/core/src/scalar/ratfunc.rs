//! Canonical rational-function form: `num / den` with gcd(num, den) = 1 and a monic
//! denominator. Opaque applications are treated as independent indeterminates.

use std::cmp::Ordering;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::chart::Chart;
use super::eval::{evaluate, Assignment, Value};
use super::expr::{Node, ScalarExpr, Symbol};
use super::poly::{gcd, Atom, Mono, Poly};
use super::ScalarError;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatFunc {
    num: Poly,
    den: Poly,
}

impl RatFunc {
    pub fn zero() -> Self {
        RatFunc {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        RatFunc {
            num: Poly::constant(c),
            den: Poly::one(),
        }
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFunc {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn var(s: &Symbol) -> Self {
        Self::from_poly(Poly::atom(Atom::Var(s.clone())))
    }

    pub fn new(num: Poly, den: Poly) -> Result<Self, ScalarError> {
        if den.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(Self::zero());
        }
        if let Some(c) = den.as_constant() {
            return Ok(RatFunc {
                num: num.scale(&c.recip()),
                den: Poly::one(),
            });
        }
        let g = gcd(&num, &den);
        let (num, den) = if g.is_constant() {
            (num, den)
        } else {
            (
                num.exact_div(&g).expect("gcd divides numerator"),
                den.exact_div(&g).expect("gcd divides denominator"),
            )
        };
        let lc = den.leading().map(|(_, c)| c.clone()).unwrap();
        let inv = lc.recip();
        Ok(RatFunc {
            num: num.scale(&inv),
            den: den.scale(&inv),
        })
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_constant() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn add(&self, o: &RatFunc) -> RatFunc {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            if self.den.is_constant() {
                return RatFunc::from_poly(self.num.add(&o.num));
            }
            return RatFunc::new(self.num.add(&o.num), self.den.clone()).unwrap();
        }
        let num = self.num.mul(&o.den).add(&o.num.mul(&self.den));
        RatFunc::new(num, self.den.mul(&o.den)).unwrap()
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, o: &RatFunc) -> RatFunc {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &RatFunc) -> RatFunc {
        if self.is_zero() || o.is_zero() {
            return RatFunc::zero();
        }
        if self.den.is_constant() && o.den.is_constant() {
            return RatFunc::from_poly(self.num.mul(&o.num));
        }
        RatFunc::new(self.num.mul(&o.num), self.den.mul(&o.den)).unwrap()
    }

    pub fn scale(&self, k: &BigRational) -> RatFunc {
        RatFunc {
            num: self.num.scale(k),
            den: if k.is_zero() {
                Poly::one()
            } else {
                self.den.clone()
            },
        }
    }

    pub fn recip(&self) -> Result<RatFunc, ScalarError> {
        RatFunc::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, o: &RatFunc) -> Result<RatFunc, ScalarError> {
        Ok(self.mul(&o.recip()?))
    }

    pub fn pow(&self, n: i64) -> Result<RatFunc, ScalarError> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let e = n.unsigned_abs() as u32;
        Ok(RatFunc {
            num: base.num.pow(e),
            den: base.den.pow(e),
        })
    }

    pub fn from_expr(e: &ScalarExpr) -> Result<RatFunc, ScalarError> {
        Ok(match e.node() {
            Node::Const(c) => RatFunc::constant(c.clone()),
            Node::Var(s) => RatFunc::var(s),
            Node::Sum(ts) => {
                let mut acc = RatFunc::zero();
                for t in ts {
                    acc = acc.add(&RatFunc::from_expr(t)?);
                }
                acc
            }
            Node::Product(fs) => {
                let mut acc = RatFunc::one();
                for f in fs {
                    acc = acc.mul(&RatFunc::from_expr(f)?);
                    if acc.is_zero() {
                        break;
                    }
                }
                acc
            }
            Node::Pow(b, n) => RatFunc::from_expr(b)?.pow(*n)?,
            Node::Opaque(func, arg) => {
                let arg = RatFunc::from_expr(arg)?.to_expr(&Chart::empty());
                let key: Arc<str> = Arc::from(arg.to_string());
                RatFunc::from_poly(Poly::atom(Atom::Opaque {
                    func: func.clone(),
                    arg,
                    key,
                }))
            }
        })
    }

    /// Partial derivative with respect to `v`, applying the chain rule through opaque atoms.
    pub fn differentiate(&self, v: &Symbol) -> Result<RatFunc, ScalarError> {
        let dn = diff_poly(&self.num, v)?;
        if self.den.is_constant() {
            return Ok(dn.scale(&self.den.as_constant().unwrap().recip()));
        }
        let dd = diff_poly(&self.den, v)?;
        let den = RatFunc::from_poly(self.den.clone());
        let num = RatFunc::from_poly(self.num.clone());
        // (n' d - n d') / d^2
        let top = dn.mul(&den).sub(&num.mul(&dd));
        top.div(&den.mul(&den))
    }

    /// Canonical expression tree, with terms in graded lexicographic order over the
    /// chart's declaration order (other variables after, by name; opaques last).
    pub fn to_expr(&self, chart: &Chart) -> ScalarExpr {
        let num = poly_to_expr(&self.num, chart);
        if self.den.is_constant() {
            return num;
        }
        let den = poly_to_expr(&self.den, chart);
        match num.node() {
            Node::Product(fs) => {
                let mut fs = fs.clone();
                fs.push(den.pow(-1));
                ScalarExpr::product(fs)
            }
            _ if num.is_one_literal() => den.pow(-1),
            _ => ScalarExpr::product(vec![num, den.pow(-1)]),
        }
    }
}

impl RatFunc {
    /// Evaluates at `point`; exact when every atom takes a rational value.
    pub fn eval(&self, point: &Assignment) -> Result<Value, ScalarError> {
        if let Some(v) = self.eval_exact(point)? {
            return Ok(Value::Rational(v));
        }
        let mut err = None;
        let mut atom = |a: &Atom| -> Option<f64> {
            let r = match a {
                Atom::Var(s) => point
                    .get(s)
                    .map(Value::to_f64)
                    .ok_or_else(|| ScalarError::MissingAssignment(s.to_string())),
                Atom::Opaque { func, arg, .. } => evaluate(arg, point).and_then(|x| {
                    let x = x.to_f64();
                    func.eval(x)
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| ScalarError::EvalDomain {
                            name: func.name().to_string(),
                            arg: x,
                        })
                }),
            };
            match r {
                Ok(v) => Some(v),
                Err(e) => {
                    err.get_or_insert(e);
                    None
                }
            }
        };
        let n = self.num.eval_f64(&mut atom);
        let d = self.den.eval_f64(&mut atom);
        if let Some(e) = err {
            return Err(e);
        }
        let v = n.unwrap() / d.unwrap();
        if v.is_finite() {
            Ok(Value::Real(v))
        } else {
            Err(ScalarError::DivisionByZero)
        }
    }

    fn eval_exact(&self, point: &Assignment) -> Result<Option<BigRational>, ScalarError> {
        let mut missing = None;
        let mut atom = |a: &Atom| match a {
            Atom::Var(s) => match point.get(s) {
                Some(Value::Rational(q)) => Some(q.clone()),
                Some(Value::Real(_)) => None,
                None => {
                    missing.get_or_insert_with(|| s.to_string());
                    None
                }
            },
            Atom::Opaque { .. } => None,
        };
        let n = self.num.eval_with(&mut atom);
        let d = self.den.eval_with(&mut atom);
        if let Some(m) = missing {
            return Err(ScalarError::MissingAssignment(m));
        }
        match (n, d) {
            (Some(n), Some(d)) => {
                if d.is_zero() {
                    Err(ScalarError::DivisionByZero)
                } else {
                    Ok(Some(n / d))
                }
            }
            _ => Ok(None),
        }
    }
}

fn diff_poly(p: &Poly, v: &Symbol) -> Result<RatFunc, ScalarError> {
    let mut poly_part = Poly::zero();
    let mut rest = RatFunc::zero();
    for (m, c) in p.terms() {
        for (idx, (atom, e)) in m.iter().enumerate() {
            let inner = match atom {
                Atom::Var(s) => {
                    if s == v {
                        None
                    } else {
                        continue;
                    }
                }
                Atom::Opaque { func, arg, .. } => {
                    if !arg.depends_on(v) {
                        continue;
                    }
                    let darg = RatFunc::from_expr(arg)?.differentiate(v)?;
                    if darg.is_zero() {
                        continue;
                    }
                    let fprime = RatFunc::from_expr(&func.derivative_at(arg)?)?;
                    Some(fprime.mul(&darg))
                }
            };
            let mut reduced: Mono = m.clone();
            if *e == 1 {
                reduced.remove(idx);
            } else {
                reduced[idx].1 = e - 1;
            }
            let coef = c * BigRational::from_integer((*e).into());
            let term = mono_poly(&reduced).scale(&coef);
            match inner {
                None => poly_part = poly_part.add(&term),
                Some(chain) => rest = rest.add(&RatFunc::from_poly(term).mul(&chain)),
            }
        }
    }
    Ok(RatFunc::from_poly(poly_part).add(&rest))
}

fn mono_poly(m: &Mono) -> Poly {
    let mut p = Poly::one();
    for (a, e) in m {
        p = p.mul(&Poly::atom(a.clone()).pow(*e));
    }
    p
}

#[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Debug)]
enum Precedence<'a> {
    Chart(usize),
    Other(&'a str),
    Opaque(&'a str, &'a str),
}

fn precedence<'a>(a: &'a Atom, chart: &Chart) -> Precedence<'a> {
    match a {
        Atom::Var(s) => match chart.index_of(s) {
            Some(i) => Precedence::Chart(i),
            None => Precedence::Other(s.as_str()),
        },
        Atom::Opaque { func, key, .. } => Precedence::Opaque(func.name(), key),
    }
}

fn grlex_desc(a: &[(Precedence, u32)], b: &[(Precedence, u32)]) -> Ordering {
    let da: u32 = a.iter().map(|x| x.1).sum();
    let db: u32 = b.iter().map(|x| x.1).sum();
    if da != db {
        return db.cmp(&da);
    }
    let (mut i, mut j) = (0, 0);
    loop {
        match (a.get(i), b.get(j)) {
            (None, None) => return Ordering::Equal,
            (Some(_), None) => return Ordering::Less,
            (None, Some(_)) => return Ordering::Greater,
            (Some((pa, ea)), Some((pb, eb))) => match pa.cmp(pb) {
                Ordering::Less => return Ordering::Less,
                Ordering::Greater => return Ordering::Greater,
                Ordering::Equal => {
                    if ea != eb {
                        return eb.cmp(ea);
                    }
                    i += 1;
                    j += 1;
                }
            },
        }
    }
}

fn atom_expr(a: &Atom, chart: &Chart) -> ScalarExpr {
    match a {
        Atom::Var(s) => ScalarExpr::var(s),
        Atom::Opaque { func, arg, .. } => {
            let arg = RatFunc::from_expr(arg)
                .map(|r| r.to_expr(chart))
                .unwrap_or_else(|_| arg.clone());
            ScalarExpr::apply(func, arg)
        }
    }
}

fn poly_to_expr(p: &Poly, chart: &Chart) -> ScalarExpr {
    let mut terms: Vec<(Vec<(Precedence, u32)>, &Mono, &BigRational)> = p
        .terms()
        .map(|(m, c)| {
            let mut key: Vec<(Precedence, u32)> =
                m.iter().map(|(a, e)| (precedence(a, chart), *e)).collect();
            key.sort_by(|x, y| x.0.cmp(&y.0));
            (key, m, c)
        })
        .collect();
    terms.sort_by(|a, b| grlex_desc(&a.0, &b.0));
    let exprs: Vec<ScalarExpr> = terms
        .into_iter()
        .map(|(_, m, c)| {
            let mut atoms: Vec<(&Atom, u32)> = m.iter().map(|(a, e)| (a, *e)).collect();
            atoms.sort_by(|x, y| precedence(x.0, chart).cmp(&precedence(y.0, chart)));
            let mut factors: Vec<ScalarExpr> = Vec::new();
            if !c.is_one() || atoms.is_empty() {
                factors.push(ScalarExpr::constant(c.clone()));
            }
            for (a, e) in atoms {
                factors.push(atom_expr(a, chart).pow(e as i64));
            }
            ScalarExpr::product(factors)
        })
        .collect();
    ScalarExpr::sum(exprs)
}
