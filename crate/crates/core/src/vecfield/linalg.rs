//! Dense linear algebra over Q (exact) and f64 (partial pivoting).

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::scalar::{rational_to_f64, Value};

/// Relative pivot tolerance for floating-point elimination.
pub const FLOAT_RANK_TOL: f64 = 1e-9;

/// A matrix whose entries are either all exact or converted to f64.
#[derive(Clone, Debug)]
pub enum Matrix {
    Exact(Vec<Vec<BigRational>>),
    Float(Vec<Vec<f64>>),
}

impl Matrix {
    /// Builds from evaluated entries, exact when every entry is rational.
    pub fn from_values(rows: Vec<Vec<Value>>) -> Matrix {
        if rows
            .iter()
            .flatten()
            .all(|v| matches!(v, Value::Rational(_)))
        {
            Matrix::Exact(
                rows.into_iter()
                    .map(|r| {
                        r.into_iter()
                            .map(|v| match v {
                                Value::Rational(q) => q,
                                Value::Real(_) => unreachable!(),
                            })
                            .collect()
                    })
                    .collect(),
            )
        } else {
            Matrix::Float(
                rows.into_iter()
                    .map(|r| r.iter().map(Value::to_f64).collect())
                    .collect(),
            )
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Matrix::Exact(m) => bareiss_rank(m),
            Matrix::Float(m) => float_rank(m),
        }
    }

    /// Basis of the right nullspace {c : M c = 0}.
    pub fn nullspace(&self) -> Vec<Vec<Value>> {
        match self {
            Matrix::Exact(m) => exact_nullspace(m)
                .into_iter()
                .map(|v| v.into_iter().map(Value::Rational).collect())
                .collect(),
            Matrix::Float(m) => float_nullspace(m)
                .into_iter()
                .map(|v| v.into_iter().map(Value::Real).collect())
                .collect(),
        }
    }
}

fn bareiss_rank(m: &[Vec<BigRational>]) -> usize {
    // Clear denominators row by row, then fraction-free elimination over Z.
    let mut a: Vec<Vec<BigInt>> = m
        .iter()
        .map(|row| {
            let l = row.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
            row.iter().map(|q| q.numer() * (&l / q.denom())).collect()
        })
        .collect();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for k in c + 1..cols {
                let v = &a[rank][c] * &a[r][k] - &a[r][c] * &a[rank][k];
                a[r][k] = v / &prev;
            }
            a[r][c] = BigInt::zero();
        }
        prev = a[rank][c].clone();
        rank += 1;
    }
    rank
}

/// Reduced row echelon form over Q; returns pivot columns.
fn exact_rref(a: &mut [Vec<BigRational>]) -> Vec<usize> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for k in c..cols {
            a[r][k] = &a[r][k] * &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for k in c..cols {
                    let d = &f * &a[r][k];
                    a[i][k] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn exact_nullspace(m: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let cols = m.first().map_or(0, Vec::len);
    let mut a = m.to_vec();
    let pivots = exact_rref(&mut a);
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![BigRational::zero(); cols];
        v[free] = BigRational::one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[r][free].clone();
        }
        basis.push(v);
    }
    basis
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Row echelon with partial pivoting; returns pivot columns.
fn float_rref(a: &mut [Vec<f64>], tol: f64) -> Vec<usize> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (p, best) = (r..rows)
            .map(|i| (i, a[i][c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            for row in a.iter_mut().skip(r) {
                row[c] = 0.0;
            }
            continue;
        }
        a.swap(r, p);
        let inv = 1.0 / a[r][c];
        for k in c..cols {
            a[r][k] *= inv;
        }
        for i in 0..rows {
            if i != r && a[i][c] != 0.0 {
                let f = a[i][c];
                for k in c..cols {
                    a[i][k] -= f * a[r][k];
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn float_rank(m: &[Vec<f64>]) -> usize {
    let mut a = m.to_vec();
    let tol = FLOAT_RANK_TOL * max_abs(m).max(f64::MIN_POSITIVE);
    float_rref(&mut a, tol).len()
}

fn float_nullspace(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = m.first().map_or(0, Vec::len);
    let mut a = m.to_vec();
    let tol = FLOAT_RANK_TOL * max_abs(m).max(f64::MIN_POSITIVE);
    let pivots = float_rref(&mut a, tol);
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0.0; cols];
        v[free] = 1.0;
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[r][free];
        }
        basis.push(v);
    }
    basis
}

/// Result of expressing a vector in terms of given columns.
#[derive(Clone, Debug, PartialEq)]
pub enum Solve {
    Solution(Vec<Value>),
    Inconsistent { residual: Vec<Value> },
}

/// Solves `cols · c = b` where `cols` are the column vectors. Columns are assumed
/// independent; the least-norm issue therefore does not arise.
pub fn solve_columns(cols: &[Vec<Value>], b: &[Value]) -> Solve {
    let n = b.len();
    let k = cols.len();
    let rows: Vec<Vec<Value>> = (0..n)
        .map(|i| {
            let mut r: Vec<Value> = cols.iter().map(|c| c[i].clone()).collect();
            r.push(b[i].clone());
            r
        })
        .collect();
    match Matrix::from_values(rows) {
        Matrix::Exact(mut a) => {
            let pivots = exact_rref(&mut a);
            if pivots.contains(&k) {
                return Solve::Inconsistent {
                    residual: exact_residual(cols, b, &a, &pivots, k),
                };
            }
            let mut c = vec![BigRational::zero(); k];
            for (r, &pc) in pivots.iter().enumerate() {
                c[pc] = a[r][k].clone();
            }
            Solve::Solution(c.into_iter().map(Value::Rational).collect())
        }
        Matrix::Float(mut a) => {
            let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            let tol = FLOAT_RANK_TOL * scale.max(f64::MIN_POSITIVE);
            let coeff_only: Vec<Vec<f64>> = a.iter().map(|r| r[..k].to_vec()).collect();
            let pivots = float_rref(&mut a, tol);
            let mut c = vec![0.0; k];
            for (r, &pc) in pivots.iter().enumerate() {
                if pc < k {
                    c[pc] = a[r][k];
                }
            }
            let bf: Vec<f64> = b.iter().map(Value::to_f64).collect();
            let residual: Vec<f64> = (0..n)
                .map(|i| bf[i] - (0..k).map(|j| coeff_only[i][j] * c[j]).sum::<f64>())
                .collect();
            let rmax = residual.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if rmax <= tol.max(FLOAT_RANK_TOL) {
                Solve::Solution(c.into_iter().map(Value::Real).collect())
            } else {
                Solve::Inconsistent {
                    residual: residual.into_iter().map(Value::Real).collect(),
                }
            }
        }
    }
}

fn exact_residual(
    cols: &[Vec<Value>],
    b: &[Value],
    a: &[Vec<BigRational>],
    pivots: &[usize],
    k: usize,
) -> Vec<Value> {
    // Best effort combination from the pivot rows that precede the inconsistency.
    let mut c = vec![BigRational::zero(); k];
    for (r, &pc) in pivots.iter().enumerate() {
        if pc < k {
            c[pc] = a[r][k].clone();
        }
    }
    b.iter()
        .enumerate()
        .map(|(i, bi)| {
            let bi = bi.as_rational().cloned().unwrap();
            let s: BigRational = (0..k)
                .map(|j| cols[j][i].as_rational().unwrap() * &c[j])
                .sum();
            Value::Rational(bi - s)
        })
        .collect()
}

/// Largest absolute entry of a value vector.
pub fn max_abs_value(v: &[Value]) -> f64 {
    v.iter().fold(0.0f64, |m, x| match x {
        Value::Rational(q) => m.max(rational_to_f64(&q.abs())),
        Value::Real(r) => m.max(r.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Value {
        Value::Rational(BigRational::from_integer(n.into()))
    }

    #[test]
    fn exact_rank_dependent_triple() {
        let m = Matrix::from_values(vec![vec![q(1), q(0), q(1)], vec![q(0), q(1), q(1)]]);
        assert_eq!(m.rank(), 2);
        let ns = m.nullspace();
        assert_eq!(ns, vec![vec![q(-1), q(-1), q(1)]]);
    }

    #[test]
    fn float_rank_with_tolerance() {
        let m = Matrix::Float(vec![vec![1.0, 2.0], vec![2.0, 4.0 + 1e-14]]);
        assert_eq!(m.rank(), 1);
        let m = Matrix::Float(vec![vec![1.0, 2.0], vec![2.0, 4.1]]);
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn solve_member_and_residual() {
        let cols = vec![vec![q(1), q(0), q(0)], vec![q(0), q(1), q(0)]];
        assert_eq!(
            solve_columns(&cols, &[q(1), q(1), q(0)]),
            Solve::Solution(vec![q(1), q(1)])
        );
        match solve_columns(&cols, &[q(0), q(0), q(1)]) {
            Solve::Inconsistent { residual } => assert_eq!(residual, vec![q(0), q(0), q(1)]),
            other => panic!("{other:?}"),
        }
    }
}
