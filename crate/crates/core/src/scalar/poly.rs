//! Sparse multivariate polynomials over Q whose indeterminates are variables or
//! opaque applications, with exact division and a primitive-PRS gcd.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::expr::{ScalarExpr, Symbol};
use super::opaque::OpaqueFn;

/// An indeterminate of the polynomial ring.
#[derive(Clone)]
pub enum Atom {
    Var(Symbol),
    Opaque {
        func: Arc<OpaqueFn>,
        /// Normalized argument.
        arg: ScalarExpr,
        /// Printed form of `arg`, used for ordering and equality.
        key: Arc<str>,
    },
}

impl Atom {
    fn rank(&self) -> (u8, &str, &str) {
        match self {
            Atom::Var(s) => (0, s.as_str(), ""),
            Atom::Opaque { func, key, .. } => (1, func.name(), key),
        }
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.rank() == other.rank()
    }
}
impl Eq for Atom {}
impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Var(s) => write!(f, "{s}"),
            Atom::Opaque { func, key, .. } => write!(f, "{}({})", func.name(), key),
        }
    }
}

/// Monomial as (atom, exponent) pairs sorted by atom, exponents positive.
pub type Mono = Vec<(Atom, u32)>;

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                out.push((a[i].0.clone(), a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// `a / b` if `b` divides `a`.
fn mono_div(a: &Mono, b: &Mono) -> Option<Mono> {
    let mut out = Vec::with_capacity(a.len());
    let mut j = 0;
    for (atom, e) in a {
        if j < b.len() && b[j].0 == *atom {
            let f = b[j].1;
            if f > *e {
                return None;
            }
            if f < *e {
                out.push((atom.clone(), e - f));
            }
            j += 1;
        } else if j < b.len() && b[j].0 < *atom {
            return None;
        } else {
            out.push((atom.clone(), *e));
        }
    }
    (j == b.len()).then_some(out)
}

/// Lexicographic order with the smallest atom most significant.
fn lex_cmp(a: &Mono, b: &Mono) -> Ordering {
    let (mut i, mut j) = (0, 0);
    loop {
        match (a.get(i), b.get(j)) {
            (None, None) => return Ordering::Equal,
            (Some(_), None) => return Ordering::Greater,
            (None, Some(_)) => return Ordering::Less,
            (Some((x, ex)), Some((y, ey))) => match x.cmp(y) {
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => {
                    if ex != ey {
                        return ex.cmp(ey);
                    }
                    i += 1;
                    j += 1;
                }
            },
        }
    }
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Mono, BigRational>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| format!("{c}*{m:?}"))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    pub fn atom(a: Atom) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(a, 1)], BigRational::one());
        Poly { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.contains_key(&Vec::new()))
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            return Some(BigRational::zero());
        }
        if self.is_constant() {
            return self.terms.get(&Vec::new()).cloned();
        }
        None
    }

    pub fn max_abs_coefficient(&self) -> BigRational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    fn mul_term(&self, m: &Mono, c: &BigRational) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, d)| (mono_mul(n, m), d * c))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = Poly::zero();
        for (m, c) in &small.terms {
            for (n, d) in &large.terms {
                out.add_term(mono_mul(m, n), c * d);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Leading term under [`lex_cmp`].
    pub fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.terms.iter().max_by(|a, b| lex_cmp(a.0, b.0))
    }

    /// Scales so the leading coefficient is 1.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some((_, c)) => {
                let inv = c.recip();
                self.scale(&inv)
            }
        }
    }

    /// All atoms occurring, sorted.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out: Vec<Atom> = self
            .terms
            .keys()
            .flat_map(|m| m.iter().map(|(a, _)| a.clone()))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn degree_in(&self, x: &Atom) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().find(|(a, _)| a == x).map_or(0, |(_, e)| *e))
            .max()
            .unwrap_or(0)
    }

    /// Coefficients in `x`, index = power of `x`.
    fn as_univariate(&self, x: &Atom) -> Vec<Poly> {
        let mut out = vec![Poly::zero(); self.degree_in(x) as usize + 1];
        for (m, c) in &self.terms {
            let mut rest = Vec::with_capacity(m.len());
            let mut e = 0u32;
            for (a, k) in m {
                if a == x {
                    e = *k;
                } else {
                    rest.push((a.clone(), *k));
                }
            }
            out[e as usize].add_term(rest, c.clone());
        }
        out
    }

    fn from_univariate(x: &Atom, coeffs: &[Poly]) -> Poly {
        let mut out = Poly::zero();
        for (k, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let xk: Mono = if k == 0 {
                vec![]
            } else {
                vec![(x.clone(), k as u32)]
            };
            for (m, v) in &c.terms {
                out.add_term(mono_mul(m, &xk), v.clone());
            }
        }
        out
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let (lm, lc) = d.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some((rm, rc)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let qm = mono_div(&rm, &lm)?;
            let qc = rc / &lc;
            rem = rem.sub(&d.mul_term(&qm, &qc));
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Evaluates with exact rational values per atom.
    pub fn eval_with<F>(&self, mut value: F) -> Option<BigRational>
    where
        F: FnMut(&Atom) -> Option<BigRational>,
    {
        let mut cache: BTreeMap<Atom, BigRational> = BTreeMap::new();
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (a, e) in m {
                let v = match cache.get(a) {
                    Some(v) => v.clone(),
                    None => {
                        let v = value(a)?;
                        cache.insert(a.clone(), v.clone());
                        v
                    }
                };
                t *= pow_rational(&v, *e);
            }
            acc += t;
        }
        Some(acc)
    }

    pub fn eval_f64<F>(&self, mut value: F) -> Option<f64>
    where
        F: FnMut(&Atom) -> Option<f64>,
    {
        let mut cache: BTreeMap<Atom, f64> = BTreeMap::new();
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = rational_to_f64(c);
            for (a, e) in m {
                let v = match cache.get(a) {
                    Some(v) => *v,
                    None => {
                        let v = value(a)?;
                        cache.insert(a.clone(), v);
                        v
                    }
                };
                t *= v.powi(*e as i32);
            }
            acc += t;
        }
        Some(acc)
    }
}

pub(crate) fn pow_rational(v: &BigRational, e: u32) -> BigRational {
    num_traits::pow::pow(v.clone(), e as usize)
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or_else(|| {
        // Very large numerators/denominators: scale through the bit lengths.
        let n = q.numer();
        let d = q.denom();
        let shift = n.bits().max(d.bits()).saturating_sub(900) as i32;
        let n2: BigInt = n >> shift as usize;
        let d2: BigInt = d >> shift as usize;
        n2.to_f64().unwrap_or(f64::NAN) / d2.to_f64().unwrap_or(f64::NAN)
    })
}

fn trim(u: &mut Vec<Poly>) {
    while u.len() > 1 && u.last().is_some_and(|p| p.is_zero()) {
        u.pop();
    }
    if u.is_empty() {
        u.push(Poly::zero());
    }
}

fn udeg(u: &[Poly]) -> Option<usize> {
    u.iter().rposition(|p| !p.is_zero())
}

fn content(u: &[Poly]) -> Poly {
    let mut g = Poly::zero();
    for c in u.iter().filter(|c| !c.is_zero()) {
        g = gcd(&g, c);
        if g.is_constant() {
            return Poly::one();
        }
    }
    g
}

fn primitive_part(u: &[Poly]) -> Vec<Poly> {
    let c = content(u);
    if c.is_constant() {
        return u.to_vec();
    }
    u.iter()
        .map(|p| p.exact_div(&c).expect("content divides coefficients"))
        .collect()
}

/// Sparse pseudo-remainder of univariate polynomials over a polynomial ring.
fn prem(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    let db = udeg(b).expect("nonzero divisor");
    let lb = &b[db];
    let mut r = a.to_vec();
    trim(&mut r);
    while let Some(dr) = udeg(&r) {
        if dr < db {
            break;
        }
        let lr = r[dr].clone();
        let shift = dr - db;
        let mut next: Vec<Poly> = r.iter().map(|c| c.mul(lb)).collect();
        for (k, bc) in b.iter().enumerate() {
            next[k + shift] = next[k + shift].sub(&bc.mul(&lr));
        }
        next[dr] = Poly::zero();
        trim(&mut next);
        r = next;
    }
    r
}

/// Greatest common divisor, normalized to be monic. gcd(0, 0) = 0.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a == b {
        return a.monic();
    }
    let mut atoms = a.atoms();
    atoms.extend(b.atoms());
    atoms.sort();
    let x = atoms[0].clone();
    let (da, db) = (a.degree_in(&x), b.degree_in(&x));
    if da == 0 {
        return gcd(a, &content(&b.as_univariate(&x)));
    }
    if db == 0 {
        return gcd(&content(&a.as_univariate(&x)), b);
    }
    let ua = a.as_univariate(&x);
    let ub = b.as_univariate(&x);
    let c = gcd(&content(&ua), &content(&ub));
    let mut p = primitive_part(&ua);
    let mut q = primitive_part(&ub);
    if udeg(&p) < udeg(&q) {
        std::mem::swap(&mut p, &mut q);
    }
    let g = loop {
        let r = prem(&p, &q);
        match udeg(&r) {
            None => break q,
            Some(0) => break vec![Poly::one()],
            Some(_) => {
                p = q;
                q = primitive_part(&r);
            }
        }
    };
    let g = primitive_part(&g);
    Poly::from_univariate(&x, &g).mul(&c).monic()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Poly {
        Poly::atom(Atom::Var(Symbol::new(name)))
    }

    fn k(n: i64) -> Poly {
        Poly::constant(BigRational::from_integer(n.into()))
    }

    #[test]
    fn gcd_of_factored_products() {
        let x = v("x");
        let y = v("y");
        let f = x.add(&y).mul(&x.sub(&k(1)));
        let g = x.add(&y).mul(&y.add(&k(2)));
        assert_eq!(gcd(&f, &g), x.add(&y).monic());
    }

    #[test]
    fn gcd_coprime_is_one() {
        let x = v("x");
        let y = v("y");
        assert_eq!(gcd(&x.add(&k(1)), &y), Poly::one());
        assert_eq!(gcd(&x.mul(&x).add(&k(1)), &x.add(&k(1))), Poly::one());
    }

    #[test]
    fn exact_division_roundtrip() {
        let x = v("x");
        let y = v("y");
        let a = x.mul(&x).sub(&y.mul(&y));
        let b = x.sub(&y);
        assert_eq!(a.exact_div(&b).unwrap(), x.add(&y));
        assert!(x.exact_div(&y).is_none());
    }

    #[test]
    fn gcd_with_repeated_factor() {
        let x = v("x");
        let y = v("y");
        let z = v("z");
        let common = x.mul(&z).add(&y).pow(2);
        let f = common.mul(&x.add(&k(3)));
        let g = common.mul(&z.sub(&y));
        assert_eq!(gcd(&f, &g), common.monic());
    }
}
