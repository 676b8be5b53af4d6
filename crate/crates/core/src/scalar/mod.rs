//! Exact symbolic scalar fields: expression trees over rational constants, chart
//! variables and opaque unary functions, with a canonical rational normal form.

mod chart;
mod eval;
mod expr;
mod opaque;
mod parse;
mod poly;
mod print;
mod ratfunc;
mod zero;

use num_rational::BigRational;
use thiserror::Error;

pub use chart::Chart;
pub use eval::{evaluate, Assignment, CompiledExpr, Value};
pub use expr::{Node, ScalarExpr, Symbol};
pub use opaque::{Derivative, OpaqueFn, OpaqueRegistry};
pub use parse::parse_expr;
pub use poly::{rational_to_f64, Atom, Poly};
pub use ratfunc::RatFunc;
pub use zero::{is_zero, SampleBox, ZeroTest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalarError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("opaque function `{0}` has no registered derivative")]
    UnregisteredDerivative(String),
    #[error("no value assigned to `{0}`")]
    MissingAssignment(String),
    #[error("`{name}` cannot be evaluated at {arg}")]
    EvalDomain { name: String, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("duplicate chart symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("sample box is empty along `{0}`")]
    DegenerateBox(String),
}

/// The rational n/d.
pub fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// The integer n as a rational.
pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Canonical form with atoms ordered by name.
pub fn normalize(f: &ScalarExpr) -> Result<ScalarExpr, ScalarError> {
    normalize_in(f, &Chart::empty())
}

/// Canonical form with terms in graded lexicographic order over `chart`.
pub fn normalize_in(f: &ScalarExpr, chart: &Chart) -> Result<ScalarExpr, ScalarError> {
    Ok(RatFunc::from_expr(f)?.to_expr(chart))
}

/// Exact partial derivative, returned in normal form.
pub fn differentiate(f: &ScalarExpr, v: &Symbol) -> Result<ScalarExpr, ScalarError> {
    Ok(RatFunc::from_expr(f)?
        .differentiate(v)?
        .to_expr(&Chart::empty()))
}

/// True if `a - b` has zero normal form.
pub fn equivalent(a: &ScalarExpr, b: &ScalarExpr) -> Result<bool, ScalarError> {
    Ok(RatFunc::from_expr(a)?
        .sub(&RatFunc::from_expr(b)?)
        .is_zero())
}
