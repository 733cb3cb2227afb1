use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::complex::Complex64;

use super::{GaussianRational, PolyError};

/// Exponent vector of a monomial. Ordered graded-lex: total degree first,
/// then lexicographic on exponents. This is the canonical term order used for
/// deterministic tie-breaking everywhere in the crate.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub Vec<u16>);

impl Monomial {
    pub fn constant(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for (z, &e) in point.iter().zip(&self.0) {
            acc *= z.powu(e as u32);
        }
        acc
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial over `Q(i)`. Zero coefficients are never
/// stored; the zero polynomial has an empty term map.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, GaussianRational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, GaussianRational::one())
    }

    pub fn constant(nvars: usize, c: GaussianRational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::constant(nvars), c);
        p
    }

    /// The coordinate polynomial `z_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), GaussianRational::one());
        p
    }

    /// Monomial `c * z^exp`.
    pub fn monomial(nvars: usize, exp: &[u16], c: GaussianRational) -> Self {
        assert_eq!(exp.len(), nvars);
        let mut p = Self::zero(nvars);
        p.add_term(Monomial(exp.to_vec()), c);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &GaussianRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<usize> {
        self.terms.keys().map(|m| m.total_degree()).max()
    }

    pub fn coefficient(&self, m: &Monomial) -> GaussianRational {
        self.terms.get(m).cloned().unwrap_or_else(GaussianRational::zero)
    }

    /// Adds `c * m`, pruning the entry if the sum cancels.
    pub fn add_term(&mut self, m: Monomial, c: GaussianRational) {
        debug_assert_eq!(m.0.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get() + &c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn scale(&self, c: &GaussianRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        let mut out = Polynomial::zero(self.nvars);
        for (m, a) in &self.terms {
            out.terms.insert(m.clone(), a * c);
        }
        out
    }

    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        debug_assert_eq!(point.len(), self.nvars);
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            acc += c.to_complex() * m.eval(point);
        }
        acc
    }

    /// Exact partial derivative with respect to `z_i`.
    pub fn derivative(&self, i: usize) -> Polynomial {
        assert!(i < self.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut exp = m.0.clone();
            exp[i] = e - 1;
            out.add_term(
                Monomial(exp),
                c * &GaussianRational::from_integers(e as i64, 0),
            );
        }
        out
    }

    pub fn check_nvars(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::VarMismatch(self.nvars, other.nvars));
        }
        Ok(())
    }
}

impl Add<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Mul<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.nvars, rhs.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), -c);
        }
        out
    }
}

macro_rules! poly_owned_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
    };
}
poly_owned_binop!(Add, add);
poly_owned_binop!(Sub, sub);
poly_owned_binop!(Mul, mul);

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", c)?;
            for (i, &e) in m.0.iter().enumerate() {
                if e == 1 {
                    write!(f, "*z{}", i + 1)?;
                } else if e > 1 {
                    write!(f, "*z{}^{}", i + 1, e)?;
                }
            }
        }
        Ok(())
    }
}

/// All monomials in `nvars` variables of total degree at most `d`, in the
/// canonical term order.
pub fn monomials_up_to(nvars: usize, d: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut current = vec![0u16; nvars];
    fn rec(out: &mut Vec<Monomial>, current: &mut Vec<u16>, pos: usize, left: usize) {
        if pos == current.len() {
            out.push(Monomial(current.clone()));
            return;
        }
        for e in 0..=left {
            current[pos] = e as u16;
            rec(out, current, pos + 1, left - e);
        }
        current[pos] = 0;
    }
    rec(&mut out, &mut current, 0, d);
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grlex_orders_by_degree_then_lex() {
        let m = |e: &[u16]| Monomial(e.to_vec());
        assert!(m(&[0, 0]) < m(&[0, 1]));
        assert!(m(&[0, 1]) < m(&[1, 0]));
        assert!(m(&[1, 0]) < m(&[0, 2]));
        assert!(m(&[1, 1]) < m(&[2, 0]));
    }

    #[test]
    fn square_of_binomial() {
        let z1 = Polynomial::var(2, 0);
        let z2 = Polynomial::var(2, 1);
        let s = &z1 + &z2;
        let sq = &s * &s;
        assert_eq!(sq.num_terms(), 3);
        assert_eq!(
            sq.coefficient(&Monomial(vec![1, 1])),
            GaussianRational::from_integers(2, 0)
        );
        let p = [c64(0.3, 0.1), c64(-0.2, 0.5)];
        let direct = (p[0] + p[1]).powu(2);
        assert!((sq.eval(&p) - direct).norm() < 1e-14);
    }

    #[test]
    fn cancellation_prunes_terms() {
        let z1 = Polynomial::var(2, 0);
        let diff = &z1 - &z1;
        assert!(diff.is_zero());
        assert_eq!(diff.num_terms(), 0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let z1 = Polynomial::var(2, 0);
        let z2 = Polynomial::var(2, 1);
        let p = &(&z1 * &z1) * &z2; // z1^2 z2
        let d = p.derivative(0); // 2 z1 z2
        let at = [c64(0.7, -0.2), c64(0.4, 0.9)];
        let expect = 2.0 * at[0] * at[1];
        assert!((d.eval(&at) - expect).norm() < 1e-13);
        assert!(p.derivative(1).eval(&at).norm() > 0.0);
    }

    #[test]
    fn monomial_enumeration_counts() {
        // C(d + n, n) monomials of degree <= d.
        assert_eq!(monomials_up_to(2, 2).len(), 6);
        assert_eq!(monomials_up_to(3, 2).len(), 10);
        let ms = monomials_up_to(2, 1);
        assert_eq!(
            ms,
            vec![
                Monomial(vec![0, 0]),
                Monomial(vec![0, 1]),
                Monomial(vec![1, 0])
            ]
        );
    }
}
