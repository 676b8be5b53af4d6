use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::eval::{evaluate, Assignment, Value};
use super::expr::{ScalarExpr, Symbol};
use super::poly::{rational_to_f64, Atom, Poly};
use super::ratfunc::RatFunc;
use super::ScalarError;

/// An axis-aligned box with rational corners.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBox {
    sides: Vec<(Symbol, BigRational, BigRational)>,
}

impl SampleBox {
    pub fn new(sides: Vec<(Symbol, BigRational, BigRational)>) -> Result<Self, ScalarError> {
        for (s, lo, hi) in &sides {
            if lo >= hi {
                return Err(ScalarError::DegenerateBox(s.to_string()));
            }
        }
        Ok(SampleBox { sides })
    }

    /// The box `center ± half_width` in every coordinate.
    pub fn around(
        center: &[(Symbol, BigRational)],
        half_width: &BigRational,
    ) -> Result<Self, ScalarError> {
        Self::new(
            center
                .iter()
                .map(|(s, c)| (s.clone(), c - half_width, c + half_width))
                .collect(),
        )
    }

    pub fn sides(&self) -> &[(Symbol, BigRational, BigRational)] {
        &self.sides
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    /// The k-th Halton point (k ≥ 1), exact.
    pub fn halton(&self, k: u64) -> Vec<(Symbol, BigRational)> {
        self.sides
            .iter()
            .enumerate()
            .map(|(i, (s, lo, hi))| {
                let r = radical_inverse(k, nth_prime(i));
                (s.clone(), lo + (hi - lo) * r)
            })
            .collect()
    }

    /// The first `n` Halton points.
    pub fn samples(&self, n: usize) -> Vec<Vec<(Symbol, BigRational)>> {
        (1..=n as u64).map(|k| self.halton(k)).collect()
    }
}

fn nth_prime(i: usize) -> u64 {
    let mut count = 0;
    let mut n = 1u64;
    loop {
        n += 1;
        if (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0) {
            if count == i {
                return n;
            }
            count += 1;
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> BigRational {
    let mut r = BigRational::zero();
    let mut scale = BigRational::new(BigInt::from(1), BigInt::from(base));
    let step = scale.clone();
    while k > 0 {
        r += &scale * BigInt::from(k % base);
        scale *= &step;
        k /= base;
    }
    r
}

/// Outcome of [`is_zero`].
#[derive(Clone, Debug, PartialEq)]
pub enum ZeroTest {
    ProvablyZero,
    NumericallyZero,
    NonZero {
        witness: Vec<(Symbol, BigRational)>,
        value: f64,
    },
}

impl ZeroTest {
    pub fn is_zero(&self) -> bool {
        !matches!(self, ZeroTest::NonZero { .. })
    }
}

const SAMPLES: usize = 32;
const RELATIVE_THRESHOLD: f64 = 1e-9;

/// Decides whether `f` vanishes on `bx`. Opaque-free input is decided exactly;
/// otherwise the normal form is sampled at quasi-random rational points.
pub fn is_zero(f: &ScalarExpr, bx: &SampleBox) -> Result<ZeroTest, ScalarError> {
    let rf = RatFunc::from_expr(f)?;
    if rf.is_zero() {
        return Ok(ZeroTest::ProvablyZero);
    }
    for v in f.variables() {
        if !bx.sides.iter().any(|(s, _, _)| *s == v) {
            return Err(ScalarError::MissingAssignment(v.to_string()));
        }
    }
    if !f.has_opaque() {
        // A nonzero polynomial cannot vanish on every Halton point.
        let mut fallback = None;
        for k in 1..=4096u64 {
            let pt = bx.halton(k);
            let Some(d) = eval_exact(rf.denom(), &pt) else {
                continue;
            };
            if d.is_zero() {
                continue;
            }
            let n = eval_exact(rf.numer(), &pt).unwrap();
            if !n.is_zero() {
                let value = rational_to_f64(&(n / d));
                return Ok(ZeroTest::NonZero { witness: pt, value });
            }
            fallback.get_or_insert(pt);
        }
        let witness = fallback.unwrap_or_else(|| bx.halton(1));
        return Ok(ZeroTest::NonZero {
            witness,
            value: 0.0,
        });
    }
    let threshold = RELATIVE_THRESHOLD * (1.0 + rational_to_f64(&rf.numer().max_abs_coefficient()));
    let mut worst: Option<(Vec<(Symbol, BigRational)>, f64)> = None;
    for k in 1..=SAMPLES as u64 {
        let pt = bx.halton(k);
        let assign: Assignment = pt
            .iter()
            .map(|(s, q)| (s.clone(), Value::Rational(q.clone())))
            .collect();
        let Some(v) = eval_ratfunc(&rf, &assign) else {
            continue;
        };
        if v.abs() > threshold && worst.as_ref().map_or(true, |w| v.abs() > w.1.abs()) {
            worst = Some((pt, v));
        }
    }
    Ok(match worst {
        Some((witness, value)) => ZeroTest::NonZero { witness, value },
        None => ZeroTest::NumericallyZero,
    })
}

fn eval_exact(p: &Poly, pt: &[(Symbol, BigRational)]) -> Option<BigRational> {
    p.eval_with(|a| match a {
        Atom::Var(s) => pt.iter().find(|(v, _)| v == s).map(|(_, q)| q.clone()),
        Atom::Opaque { .. } => None,
    })
}

fn eval_ratfunc(rf: &RatFunc, assign: &Assignment) -> Option<f64> {
    let atom = |a: &Atom| -> Option<f64> {
        match a {
            Atom::Var(s) => assign.get(s).map(Value::to_f64),
            Atom::Opaque { func, arg, .. } => {
                let x = evaluate(arg, assign).ok()?.to_f64();
                func.eval(x)
            }
        }
    };
    let n = rf.numer().eval_f64(atom)?;
    let d = rf.denom().eval_f64(atom)?;
    let v = n / d;
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{parse_expr, Chart, OpaqueFn, OpaqueRegistry};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn radical_inverse_base2() {
        assert_eq!(radical_inverse(1, 2), q(1, 2));
        assert_eq!(radical_inverse(2, 2), q(1, 4));
        assert_eq!(radical_inverse(3, 2), q(3, 4));
        assert_eq!(radical_inverse(5, 3), q(7, 9));
    }

    #[test]
    fn ring_identity_is_provably_zero() {
        let chart = Chart::new(&["th"]).unwrap();
        let e = parse_expr("th*th - th^2", &chart, &OpaqueRegistry::new()).unwrap();
        let bx = SampleBox::new(vec![(Symbol::new("th"), q(-1, 2), q(1, 2))]).unwrap();
        assert_eq!(is_zero(&e, &bx).unwrap(), ZeroTest::ProvablyZero);
    }

    #[test]
    fn compatibility_condition_witness() {
        let chart = Chart::new(&["th"]).unwrap();
        let reg = OpaqueRegistry::new();
        // c' - (3 th b' - 3 b) with b = th^3, c = th^4
        let e = parse_expr("4*th^3 - (3*th*3*th^2 - 3*th^3)", &chart, &reg).unwrap();
        let bx = SampleBox::new(vec![(Symbol::new("th"), q(0, 1), q(2, 1))]).unwrap();
        match is_zero(&e, &bx).unwrap() {
            ZeroTest::NonZero { witness, value } => {
                assert_eq!(witness[0].1, q(1, 1));
                assert_eq!(value, -2.0);
            }
            other => panic!("{other:?}"),
        }
        let e = parse_expr("6*th^3 - (3*th*3*th^2 - 3*th^3)", &chart, &reg).unwrap();
        assert_eq!(is_zero(&e, &bx).unwrap(), ZeroTest::ProvablyZero);
    }

    #[test]
    fn opaque_identity_sampled() {
        let chart = Chart::new(&["x"]).unwrap();
        let reg = OpaqueRegistry::with_builtins();
        let e = parse_expr("sin(x)^2 + cos(x)^2 - 1", &chart, &reg).unwrap();
        let bx = SampleBox::new(vec![(Symbol::new("x"), q(-1, 1), q(1, 1))]).unwrap();
        assert_eq!(is_zero(&e, &bx).unwrap(), ZeroTest::NumericallyZero);
        let e = parse_expr("sin(x) - x", &chart, &reg).unwrap();
        assert!(!is_zero(&e, &bx).unwrap().is_zero());
        let s = Symbol::new("s");
        let a = OpaqueFn::from_body("a", &s, &ScalarExpr::var(&s)).unwrap();
        let e = ScalarExpr::apply(&a, ScalarExpr::var(&Symbol::new("x")))
            - ScalarExpr::apply(&a, ScalarExpr::var(&Symbol::new("x")));
        assert_eq!(is_zero(&e, &bx).unwrap(), ZeroTest::ProvablyZero);
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(SampleBox::new(vec![(Symbol::new("x"), q(1, 1), q(1, 1))]).is_err());
    }
}
