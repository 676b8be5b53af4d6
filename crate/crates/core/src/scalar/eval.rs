use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::expr::{Node, ScalarExpr, Symbol};
use super::opaque::OpaqueFn;
use super::poly::rational_to_f64;
use super::ScalarError;

/// A coordinate value: exact when possible.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Rational(BigRational),
    Real(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Rational(q) => rational_to_f64(q),
            Value::Real(x) => *x,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Value::Rational(q) => Some(q),
            Value::Real(_) => None,
        }
    }

    fn add(self, o: Value) -> Value {
        match (self, o) {
            (Value::Rational(a), Value::Rational(b)) => Value::Rational(a + b),
            (a, b) => Value::Real(a.to_f64() + b.to_f64()),
        }
    }

    fn mul(self, o: Value) -> Value {
        match (self, o) {
            (Value::Rational(a), Value::Rational(b)) => Value::Rational(a * b),
            (a, b) => Value::Real(a.to_f64() * b.to_f64()),
        }
    }
}

impl From<BigRational> for Value {
    fn from(q: BigRational) -> Self {
        Value::Rational(q)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

/// Variable assignment used by [`evaluate`].
pub type Assignment = BTreeMap<Symbol, Value>;

/// Evaluates `f` at `point`. The result is exact when every value reached is rational
/// and no opaque function is applied.
pub fn evaluate(f: &ScalarExpr, point: &Assignment) -> Result<Value, ScalarError> {
    match f.node() {
        Node::Const(c) => Ok(Value::Rational(c.clone())),
        Node::Var(s) => point
            .get(s)
            .cloned()
            .ok_or_else(|| ScalarError::MissingAssignment(s.to_string())),
        Node::Sum(ts) => {
            let mut acc = Value::Rational(BigRational::zero());
            for t in ts {
                acc = acc.add(evaluate(t, point)?);
            }
            Ok(acc)
        }
        Node::Product(fs) => {
            let mut acc = Value::Rational(BigRational::one());
            for t in fs {
                acc = acc.mul(evaluate(t, point)?);
            }
            Ok(acc)
        }
        Node::Pow(b, n) => match evaluate(b, point)? {
            Value::Rational(q) => {
                if *n < 0 && q.is_zero() {
                    return Err(ScalarError::DivisionByZero);
                }
                let p = num_traits::pow::pow(q, n.unsigned_abs() as usize);
                Ok(Value::Rational(if *n < 0 { p.recip() } else { p }))
            }
            Value::Real(x) => {
                let v = x.powi(*n as i32);
                if v.is_finite() {
                    Ok(Value::Real(v))
                } else {
                    Err(ScalarError::DivisionByZero)
                }
            }
        },
        Node::Opaque(func, arg) => {
            let x = evaluate(arg, point)?.to_f64();
            func.eval(x)
                .filter(|v| v.is_finite())
                .map(Value::Real)
                .ok_or_else(|| ScalarError::EvalDomain {
                    name: func.name().to_string(),
                    arg: x,
                })
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(usize),
    Add(usize),
    Mul(usize),
    Pow(i32),
    Apply(Arc<OpaqueFn>),
}

/// An expression lowered to a stack program over a fixed variable order. Domain
/// failures surface as NaN.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    ops: Vec<Op>,
}

impl CompiledExpr {
    pub fn compile(e: &ScalarExpr, vars: &[Symbol]) -> Result<Self, ScalarError> {
        let mut ops = Vec::new();
        lower(e, vars, &mut ops)?;
        Ok(CompiledExpr { ops })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut stack: Vec<f64> = Vec::with_capacity(16);
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Var(i) => stack.push(x[*i]),
                Op::Add(n) => {
                    let k = stack.len() - n;
                    let s: f64 = stack.drain(k..).sum();
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let k = stack.len() - n;
                    let s: f64 = stack.drain(k..).product();
                    stack.push(s);
                }
                Op::Pow(n) => {
                    let b = stack.pop().unwrap();
                    stack.push(b.powi(*n));
                }
                Op::Apply(f) => {
                    let a = stack.pop().unwrap();
                    stack.push(f.eval(a).unwrap_or(f64::NAN));
                }
            }
        }
        stack.pop().unwrap_or(0.0)
    }
}

fn lower(e: &ScalarExpr, vars: &[Symbol], ops: &mut Vec<Op>) -> Result<(), ScalarError> {
    match e.node() {
        Node::Const(c) => ops.push(Op::Const(rational_to_f64(c))),
        Node::Var(s) => {
            let i = vars
                .iter()
                .position(|v| v == s)
                .ok_or_else(|| ScalarError::MissingAssignment(s.to_string()))?;
            ops.push(Op::Var(i));
        }
        Node::Sum(ts) => {
            for t in ts {
                lower(t, vars, ops)?;
            }
            ops.push(Op::Add(ts.len()));
        }
        Node::Product(fs) => {
            for t in fs {
                lower(t, vars, ops)?;
            }
            ops.push(Op::Mul(fs.len()));
        }
        Node::Pow(b, n) => {
            lower(b, vars, ops)?;
            ops.push(Op::Pow(*n as i32));
        }
        Node::Opaque(f, a) => {
            lower(a, vars, ops)?;
            ops.push(Op::Apply(f.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{parse_expr, Chart, OpaqueRegistry};

    fn q(n: i64) -> Value {
        Value::Rational(BigRational::from_integer(n.into()))
    }

    #[test]
    fn exact_when_rational() {
        let chart = Chart::new(&["x1", "x2", "x3", "th"]).unwrap();
        let e = parse_expr(
            "x3*th - 2*x2*th^2 + x1*th^3",
            &chart,
            &OpaqueRegistry::new(),
        )
        .unwrap();
        let pt: Assignment = chart.vars().iter().map(|s| (s.clone(), q(1))).collect();
        assert_eq!(evaluate(&e, &pt).unwrap(), q(0));
    }

    #[test]
    fn opaque_gives_real() {
        let chart = Chart::new(&["th"]).unwrap();
        let mut reg = OpaqueRegistry::new();
        let s = Symbol::new("s");
        reg.register(OpaqueFn::from_body("b", &s, &ScalarExpr::var(&s).pow(3)).unwrap());
        let e = parse_expr("th^2 + b(th)", &chart, &reg).unwrap();
        let pt: Assignment = [(Symbol::new("th"), q(2))].into_iter().collect();
        assert_eq!(evaluate(&e, &pt).unwrap(), Value::Real(12.0));
    }

    #[test]
    fn missing_and_domain_errors() {
        let chart = Chart::new(&["x", "y"]).unwrap();
        let reg = OpaqueRegistry::with_builtins();
        let e = parse_expr("x + y", &chart, &reg).unwrap();
        let pt: Assignment = [(Symbol::new("x"), q(1))].into_iter().collect();
        assert!(matches!(evaluate(&e, &pt), Err(ScalarError::MissingAssignment(n)) if n == "y"));
        let e = parse_expr("ln(x - 2)", &chart, &reg).unwrap();
        assert!(matches!(
            evaluate(&e, &pt),
            Err(ScalarError::EvalDomain { .. })
        ));
    }

    #[test]
    fn compiled_matches_tree() {
        let chart = Chart::new(&["x", "y"]).unwrap();
        let reg = OpaqueRegistry::with_builtins();
        let e = parse_expr("x^2*y - 3/2*sin(x*y)/(1 + y^2)", &chart, &reg).unwrap();
        let c = CompiledExpr::compile(&e, chart.vars()).unwrap();
        let pt: Assignment = [
            (Symbol::new("x"), Value::Real(0.3)),
            (Symbol::new("y"), Value::Real(-1.7)),
        ]
        .into_iter()
        .collect();
        let a = evaluate(&e, &pt).unwrap().to_f64();
        assert!((a - c.eval(&[0.3, -1.7])).abs() < 1e-14);
    }
}
