//! Integer expressions and their canonical polynomial form.
//!
//! Expressions are evaluated with exact integer arithmetic. The normal form is a
//! polynomial with rational coefficients, so two expressions normalize to the same
//! tree exactly when their difference is the zero polynomial.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Machine integer used for literals and ground evaluation.
pub type Int = i128;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Int(Int),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Division by a nonzero literal.
    Div(Box<Expr>, Int),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not assigned")]
    Unbound(String),
    #[error("{numerator} is not divisible by {denominator}")]
    NonIntegralDivision { numerator: Int, denominator: Int },
    #[error("integer overflow")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("division by zero literal")]
pub struct DivisionByZero;

impl Expr {
    pub fn int(n: Int) -> Expr {
        Expr::Int(n)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn div(e: Expr, d: Int) -> Result<Expr, DivisionByZero> {
        if d == 0 {
            return Err(DivisionByZero);
        }
        Ok(Expr::Div(Box::new(e), d))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Neg(a) | Expr::Div(a, _) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn mentions(&self, x: &str) -> bool {
        match self {
            Expr::Int(_) => false,
            Expr::Var(y) => x == y,
            Expr::Neg(a) | Expr::Div(a, _) => a.mentions(x),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.mentions(x) || b.mentions(x),
        }
    }

    /// Simultaneous replacement of variables.
    pub fn subst(&self, map: &BTreeMap<String, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        self.map_vars(&mut |x| map.get(x).cloned())
    }

    /// Rebuilds the expression, replacing each variable for which `f` returns a value.
    pub fn map_vars(&self, f: &mut impl FnMut(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Int(n) => Expr::Int(*n),
            Expr::Var(x) => f(x).unwrap_or_else(|| Expr::Var(x.clone())),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_vars(f))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Expr::Div(a, d) => Expr::Div(Box::new(a.map_vars(f)), *d),
        }
    }

    /// Exact integer evaluation; every division must divide evenly.
    pub fn eval(&self, env: &BTreeMap<String, Int>) -> Result<Int, EvalError> {
        self.eval_with(&|x| env.get(x).copied())
    }

    pub fn eval_with(&self, env: &dyn Fn(&str) -> Option<Int>) -> Result<Int, EvalError> {
        Ok(match self {
            Expr::Int(n) => *n,
            Expr::Var(x) => env(x).ok_or_else(|| EvalError::Unbound(x.clone()))?,
            Expr::Neg(a) => a.eval_with(env)?.checked_neg().ok_or(EvalError::Overflow)?,
            Expr::Add(a, b) => a
                .eval_with(env)?
                .checked_add(b.eval_with(env)?)
                .ok_or(EvalError::Overflow)?,
            Expr::Sub(a, b) => a
                .eval_with(env)?
                .checked_sub(b.eval_with(env)?)
                .ok_or(EvalError::Overflow)?,
            Expr::Mul(a, b) => a
                .eval_with(env)?
                .checked_mul(b.eval_with(env)?)
                .ok_or(EvalError::Overflow)?,
            Expr::Div(a, d) => {
                let n = a.eval_with(env)?;
                if n % d != 0 {
                    return Err(EvalError::NonIntegralDivision {
                        numerator: n,
                        denominator: *d,
                    });
                }
                n / d
            }
        })
    }

    pub fn to_poly(&self) -> Poly {
        match self {
            Expr::Int(n) => Poly::constant(BigRational::from_integer(BigInt::from(*n))),
            Expr::Var(x) => Poly::var(x),
            Expr::Neg(a) => -a.to_poly(),
            Expr::Add(a, b) => a.to_poly() + b.to_poly(),
            Expr::Sub(a, b) => a.to_poly() - b.to_poly(),
            Expr::Mul(a, b) => &a.to_poly() * &b.to_poly(),
            Expr::Div(a, d) => a
                .to_poly()
                .scale(&BigRational::new(BigInt::one(), BigInt::from(*d))),
        }
    }

    /// Canonical form: equal for two expressions iff they denote the same polynomial.
    pub fn normalize(&self) -> Expr {
        self.to_poly().to_expr()
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Int(_))
    }

    pub fn as_literal(&self) -> Option<Int> {
        match self {
            Expr::Int(n) => Some(*n),
            _ => None,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Int(_) | Expr::Var(_) => 4,
        }
    }
}

impl From<Int> for Expr {
    fn from(n: Int) -> Expr {
        Expr::Int(n)
    }
}

impl From<&str> for Expr {
    fn from(x: &str) -> Expr {
        Expr::Var(x.to_string())
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, a.precedence() < 4 || a.is_literal())
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                write_operand(f, a, a.precedence() < 1)?;
                write!(f, "{}", if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                write_operand(f, b, b.precedence() <= 1)
            }
            Expr::Mul(a, b) => {
                write_operand(f, a, a.precedence() < 2)?;
                write!(f, "*")?;
                write_operand(f, b, b.precedence() <= 2)
            }
            Expr::Div(a, d) => {
                write_operand(f, a, a.precedence() < 2)?;
                write!(f, "/{d}")
            }
        }
    }
}

/// A power product of variables, sorted by name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn var(x: &str) -> Monomial {
        Monomial(vec![(x.to_string(), 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, k)| k).sum()
    }

    pub fn factors(&self) -> &[(String, u32)] {
        &self.0
    }

    pub fn exponent(&self, x: &str) -> u32 {
        self.0.iter().find(|(y, _)| y == x).map_or(0, |(_, k)| *k)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<String, u32> = self.0.iter().cloned().collect();
        for (x, k) in &other.0 {
            *map.entry(x.clone()).or_insert(0) += k;
        }
        Monomial(map.into_iter().collect())
    }

    fn without(&self, x: &str) -> Monomial {
        Monomial(self.0.iter().filter(|(y, _)| y != x).cloned().collect())
    }

    fn to_expr(&self) -> Option<Expr> {
        let mut out: Option<Expr> = None;
        for (x, k) in &self.0 {
            for _ in 0..*k {
                let v = Expr::var(x.as_str());
                out = Some(match out {
                    None => v,
                    Some(acc) => acc * v,
                });
            }
        }
        out
    }
}

// Graded order: lower total degree first, then lexicographic on the factor list.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial with rational coefficients; no zero coefficients are stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn int(n: Int) -> Poly {
        Poly::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn var(x: &str) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::var(x), BigRational::one());
        p
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(x, _)| x.clone()))
            .collect()
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        let mut out = Poly::zero();
        for (m, k) in &self.terms {
            out.add_term(m.clone(), k * c);
        }
        out
    }

    /// Writes `self = coeff * x + rest` when `x` occurs at most linearly.
    pub fn split_linear(&self, x: &str) -> Option<(Poly, Poly)> {
        let mut coeff = Poly::zero();
        let mut rest = Poly::zero();
        for (m, k) in &self.terms {
            match m.exponent(x) {
                0 => rest.add_term(m.clone(), k.clone()),
                1 => coeff.add_term(m.without(x), k.clone()),
                _ => return None,
            }
        }
        Some((coeff, rest))
    }

    /// Replaces variables by polynomials.
    pub fn compose(&self, map: &BTreeMap<String, Poly>) -> Poly {
        let mut out = Poly::zero();
        for (m, k) in &self.terms {
            let mut term = Poly::constant(k.clone());
            for (x, e) in &m.0 {
                let base = map.get(x).cloned().unwrap_or_else(|| Poly::var(x));
                for _ in 0..*e {
                    term = &term * &base;
                }
            }
            out = out + term;
        }
        out
    }

    pub fn eval_rational(&self, env: &dyn Fn(&str) -> Option<BigRational>) -> Option<BigRational> {
        let mut total = BigRational::zero();
        for (m, k) in &self.terms {
            let mut v = k.clone();
            for (x, e) in &m.0 {
                let base = env(x)?;
                for _ in 0..*e {
                    v *= &base;
                }
            }
            total += v;
        }
        Some(total)
    }

    /// Least common multiple of coefficient denominators (always positive).
    pub fn denominator_lcm(&self) -> BigInt {
        self.terms
            .values()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }

    /// Integer coefficients of `d * self` where `d = denominator_lcm()`.
    pub fn integer_terms(&self) -> Vec<(BigInt, Monomial)> {
        let d = BigRational::from_integer(self.denominator_lcm());
        self.terms
            .iter()
            .map(|(m, c)| ((c * &d).to_integer(), m.clone()))
            .collect()
    }

    /// Canonical expression: highest monomials first, divided by the common denominator.
    pub fn to_expr(&self) -> Expr {
        if self.terms.is_empty() {
            return Expr::Int(0);
        }
        let d = self.denominator_lcm();
        let dr = BigRational::from_integer(d.clone());
        let mut out: Option<Expr> = None;
        for (m, c) in self.terms.iter().rev() {
            let c = (c * &dr).to_integer();
            let magnitude = big_to_int(&c.abs());
            let term = match m.to_expr() {
                None => Expr::Int(magnitude),
                Some(v) if magnitude == 1 => v,
                Some(v) => Expr::Int(magnitude) * v,
            };
            out = Some(match out {
                None if c.is_negative() => match term {
                    Expr::Int(n) => Expr::Int(-n),
                    t => -t,
                },
                None => term,
                Some(acc) if c.is_negative() => acc - term,
                Some(acc) => acc + term,
            });
        }
        let body = out.expect("nonempty polynomial");
        if d.is_one() {
            body
        } else {
            Expr::Div(Box::new(body), big_to_int(&d))
        }
    }
}

fn big_to_int(n: &BigInt) -> Int {
    n.to_i128()
        .expect("polynomial coefficient exceeds the 128-bit literal range")
}

impl ops::Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl ops::Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl ops::Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &str) -> Expr {
        Expr::var(x)
    }

    #[test]
    fn partial_sum_step_normalizes_to_shifted_closed_form() {
        // (2N - m + 1)m/2 + (N - m)  vs  (2N - (m+1) + 1)(m+1)/2
        let lhs = Expr::div((Expr::int(2) * v("N") - v("m") + Expr::int(1)) * v("m"), 2).unwrap()
            + (v("N") - v("m"));
        let m1 = v("m") + Expr::int(1);
        let rhs =
            Expr::div((Expr::int(2) * v("N") - m1.clone() + Expr::int(1)) * m1, 2).unwrap();
        assert_eq!(lhs.normalize(), rhs.normalize());
    }

    #[test]
    fn additive_identity_drops() {
        assert_eq!((v("x") + Expr::int(0)).normalize(), v("x"));
    }

    #[test]
    fn difference_of_squares() {
        let a = (v("x") + Expr::int(1)) * (v("x") - Expr::int(1));
        let b = v("x") * v("x") - Expr::int(1);
        assert_eq!(a.normalize(), b.normalize());
    }

    #[test]
    fn exact_division_evaluation() {
        let e = Expr::div((Expr::int(2) * v("N") - v("m") + Expr::int(1)) * v("m"), 2).unwrap();
        let env: BTreeMap<String, Int> = [("N".into(), 4), ("m".into(), 4)].into();
        assert_eq!(e.eval(&env), Ok(10));
        let half = Expr::div(v("x"), 2).unwrap();
        let env: BTreeMap<String, Int> = [("x".into(), 3)].into();
        assert!(matches!(half.eval(&env), Err(EvalError::NonIntegralDivision { .. })));
        let env: BTreeMap<String, Int> = [("x".into(), 7)].into();
        assert_eq!(v("x").eval(&env), Ok(7));
    }

    #[test]
    fn zero_divisor_is_rejected() {
        assert_eq!(Expr::div(v("x"), 0), Err(DivisionByZero));
    }

    #[test]
    fn normal_form_with_fraction_is_a_single_division() {
        let e = Expr::div((v("N") + Expr::int(1)) * v("N"), 2).unwrap();
        let n = e.normalize();
        assert!(matches!(n, Expr::Div(_, 2)));
        assert_eq!(n.normalize(), n);
    }

    #[test]
    fn split_linear_extracts_coefficient() {
        let p = (Expr::int(3) * v("u") + v("a") * v("u") - Expr::int(2)).to_poly();
        let (c, r) = p.split_linear("u").unwrap();
        assert_eq!(c.to_expr(), (v("a") + Expr::int(3)).normalize());
        assert_eq!(r.to_expr(), Expr::int(-2));
        assert!((v("u") * v("u")).to_poly().split_linear("u").is_none());
    }
}
