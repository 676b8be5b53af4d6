use std::fmt::{self, Write};

use num_rational::BigRational;
use num_traits::{One, Signed};

use super::expr::{Node, ScalarExpr};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 3;

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, 0).map_err(|_| fmt::Error)?;
        f.write_str(&s)
    }
}

fn write_rational(out: &mut String, c: &BigRational) -> fmt::Result {
    if c.is_integer() {
        write!(out, "{}", c.numer())
    } else {
        write!(out, "{}/{}", c.numer(), c.denom())
    }
}

/// A node that prints as a single token and never needs parentheses as a power base.
fn is_atomic(e: &ScalarExpr) -> bool {
    match e.node() {
        Node::Const(c) => c.is_integer() && !c.is_negative(),
        Node::Var(_) | Node::Opaque(..) => true,
        _ => false,
    }
}

fn write_expr(out: &mut String, e: &ScalarExpr, ctx: u8) -> fmt::Result {
    match e.node() {
        Node::Const(c) => {
            let wrap = (c.is_negative() && ctx >= PRODUCT) || (!c.is_integer() && ctx >= POWER);
            if wrap {
                out.push('(');
            }
            write_rational(out, c)?;
            if wrap {
                out.push(')');
            }
            Ok(())
        }
        Node::Var(s) => write!(out, "{s}"),
        Node::Opaque(func, arg) => {
            write!(out, "{}(", func.name())?;
            write_expr(out, arg, 0)?;
            out.push(')');
            Ok(())
        }
        Node::Sum(ts) => {
            let wrap = ctx >= PRODUCT;
            if wrap {
                out.push('(');
            }
            for (i, t) in ts.iter().enumerate() {
                if i == 0 {
                    write_expr(out, t, SUM)?;
                } else if sign_prefixed(t) {
                    out.push_str(" - ");
                    write_expr(out, &negate_leading(t), PRODUCT)?;
                } else {
                    out.push_str(" + ");
                    write_expr(out, t, SUM)?;
                }
            }
            if wrap {
                out.push(')');
            }
            Ok(())
        }
        Node::Product(fs) => write_product(out, fs, ctx),
        Node::Pow(b, n) => {
            let wrap = ctx >= POWER;
            if wrap {
                out.push('(');
            }
            write_base(out, b)?;
            write!(out, "^{n}")?;
            if wrap {
                out.push(')');
            }
            Ok(())
        }
    }
}

fn write_base(out: &mut String, b: &ScalarExpr) -> fmt::Result {
    if is_atomic(b) {
        write_expr(out, b, POWER)
    } else {
        out.push('(');
        write_expr(out, b, 0)?;
        out.push(')');
        Ok(())
    }
}

fn write_product(out: &mut String, fs: &[ScalarExpr], ctx: u8) -> fmt::Result {
    let wrap = ctx >= POWER;
    if wrap {
        out.push('(');
    }
    let mut i = 0;
    // Leading -1 coefficient: emit a bare minus unless the next factor would bind to it.
    if let Some(Node::Const(c)) = fs.first().map(|f| f.node()) {
        if c.is_negative() && (-c).is_one() && fs.len() > 1 {
            let next_binds = matches!(fs[1].node(), Node::Pow(..));
            if !next_binds {
                out.push('-');
                i = 1;
            }
        }
    }
    for (k, f) in fs[i..].iter().enumerate() {
        if let Node::Pow(b, n) = f.node() {
            if *n < 0 {
                if k == 0 {
                    out.push('1');
                }
                out.push('/');
                write_base(out, b)?;
                if *n != -1 {
                    write!(out, "^{}", -n)?;
                }
                continue;
            }
        }
        if k > 0 {
            out.push('*');
        }
        match f.node() {
            // A leading integer may print bare: "-2*x".
            Node::Const(c) if k == 0 && c.is_integer() => write_rational(out, c)?,
            Node::Const(c) if k > 0 && (!c.is_integer() || c.is_negative()) => {
                out.push('(');
                write_rational(out, c)?;
                out.push(')');
            }
            _ => write_expr(out, f, PRODUCT)?,
        }
    }
    if wrap {
        out.push(')');
    }
    Ok(())
}

/// A negative constant, or a product whose own first factor is one.
fn sign_prefixed(e: &ScalarExpr) -> bool {
    match e.node() {
        Node::Const(c) => c.is_negative(),
        Node::Product(fs) => {
            matches!(fs.first().map(|f| f.node()), Some(Node::Const(c)) if c.is_negative())
        }
        _ => false,
    }
}

/// Drops the sign of an expression for which `sign_prefixed` holds.
fn negate_leading(e: &ScalarExpr) -> ScalarExpr {
    match e.node() {
        Node::Const(c) => ScalarExpr::constant(-c),
        Node::Product(fs) => {
            let mut fs = fs.clone();
            fs[0] = negate_leading(&fs[0]);
            if fs[0].is_one_literal() && fs.len() > 1 {
                fs.remove(0);
            }
            ScalarExpr::product(fs)
        }
        _ => e.clone(),
    }
}
