use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::opaque::OpaqueFn;

/// A coordinate symbol. Symbols compare by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

#[derive(Clone, Debug)]
pub enum Node {
    Const(BigRational),
    Var(Symbol),
    Sum(Vec<ScalarExpr>),
    Product(Vec<ScalarExpr>),
    Pow(ScalarExpr, i64),
    Opaque(Arc<OpaqueFn>, ScalarExpr),
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Node::Const(a), Node::Const(b)) => a == b,
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Sum(a), Node::Sum(b)) => a == b,
            (Node::Product(a), Node::Product(b)) => a == b,
            (Node::Pow(a, m), Node::Pow(b, n)) => m == n && a == b,
            (Node::Opaque(f, a), Node::Opaque(g, b)) => f.name() == g.name() && a == b,
            _ => false,
        }
    }
}

impl Eq for Node {}

/// Immutable symbolic scalar field. Cloning is cheap.
#[derive(Clone, PartialEq, Eq)]
pub struct ScalarExpr(Arc<Node>);

impl ScalarExpr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn from_node(node: Node) -> Self {
        ScalarExpr(Arc::new(node))
    }

    pub fn constant(value: BigRational) -> Self {
        ScalarExpr(Arc::new(Node::Const(value)))
    }

    pub fn integer(value: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::constant(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Self::integer(0)
    }

    pub fn one() -> Self {
        Self::integer(1)
    }

    pub fn var(sym: &Symbol) -> Self {
        ScalarExpr(Arc::new(Node::Var(sym.clone())))
    }

    pub fn sum(terms: Vec<ScalarExpr>) -> Self {
        match terms.len() {
            0 => Self::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => ScalarExpr(Arc::new(Node::Sum(terms))),
        }
    }

    pub fn product(factors: Vec<ScalarExpr>) -> Self {
        match factors.len() {
            0 => Self::one(),
            1 => factors.into_iter().next().unwrap(),
            _ => ScalarExpr(Arc::new(Node::Product(factors))),
        }
    }

    pub fn pow(&self, exponent: i64) -> Self {
        match exponent {
            0 => Self::one(),
            1 => self.clone(),
            _ => ScalarExpr(Arc::new(Node::Pow(self.clone(), exponent))),
        }
    }

    pub fn apply(func: &Arc<OpaqueFn>, arg: ScalarExpr) -> Self {
        ScalarExpr(Arc::new(Node::Opaque(func.clone(), arg)))
    }

    pub fn recip(&self) -> Self {
        self.pow(-1)
    }

    pub fn as_constant(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True for the literal constant zero. Use `normalize` first for a semantic test.
    pub fn is_zero_literal(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_zero())
    }

    pub fn is_one_literal(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    /// Replaces every occurrence of `sym` by `replacement`.
    pub fn substitute(&self, sym: &Symbol, replacement: &ScalarExpr) -> ScalarExpr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(s) => {
                if s == sym {
                    replacement.clone()
                } else {
                    self.clone()
                }
            }
            Node::Sum(ts) => {
                ScalarExpr::sum(ts.iter().map(|t| t.substitute(sym, replacement)).collect())
            }
            Node::Product(fs) => {
                ScalarExpr::product(fs.iter().map(|t| t.substitute(sym, replacement)).collect())
            }
            Node::Pow(b, n) => b.substitute(sym, replacement).pow(*n),
            Node::Opaque(f, a) => ScalarExpr::apply(f, a.substitute(sym, replacement)),
        }
    }

    /// Collects variable symbols (including those inside opaque arguments).
    pub fn variables(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Symbol>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(s) => out.push(s.clone()),
            Node::Sum(xs) | Node::Product(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
            Node::Pow(b, _) => b.collect_vars(out),
            Node::Opaque(_, a) => a.collect_vars(out),
        }
    }

    pub fn has_opaque(&self) -> bool {
        match self.node() {
            Node::Const(_) | Node::Var(_) => false,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().any(|x| x.has_opaque()),
            Node::Pow(b, _) => b.has_opaque(),
            Node::Opaque(..) => true,
        }
    }

    pub fn depends_on(&self, sym: &Symbol) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(s) => s == sym,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().any(|x| x.depends_on(sym)),
            Node::Pow(b, _) => b.depends_on(sym),
            Node::Opaque(_, a) => a.depends_on(sym),
        }
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl From<i64> for ScalarExpr {
    fn from(v: i64) -> Self {
        ScalarExpr::integer(v)
    }
}

impl From<BigRational> for ScalarExpr {
    fn from(v: BigRational) -> Self {
        ScalarExpr::constant(v)
    }
}

impl Add for &ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: &ScalarExpr) -> ScalarExpr {
        ScalarExpr::sum(vec![self.clone(), rhs.clone()])
    }
}

impl Sub for &ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: &ScalarExpr) -> ScalarExpr {
        ScalarExpr::sum(vec![self.clone(), -rhs])
    }
}

impl Mul for &ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, rhs: &ScalarExpr) -> ScalarExpr {
        ScalarExpr::product(vec![self.clone(), rhs.clone()])
    }
}

impl Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::product(vec![ScalarExpr::integer(-1), self.clone()])
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, rhs: ScalarExpr) -> ScalarExpr {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        -&self
    }
}
