//! Dense univariate polynomials over the Gaussian rationals, plus the real
//! polynomials used by the root-isolation machinery.

use crate::rational::{rational_to_f64, Gq};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Polynomial with Gaussian-rational coefficients, ascending degree.
/// The zero polynomial is the empty coefficient list.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<Gq>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Gq>) -> Self {
        while coeffs.last().map_or(false, Gq::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn one() -> Self {
        Poly {
            coeffs: vec![Gq::one()],
        }
    }

    pub fn constant(c: Gq) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `lambda`.
    pub fn var() -> Self {
        Poly::new(vec![Gq::zero(), Gq::one()])
    }

    /// `lambda - c`.
    pub fn linear_root(c: &Gq) -> Self {
        Poly::new(vec![-c, Gq::one()])
    }

    pub fn coeffs(&self) -> &[Gq] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Gq {
        self.coeffs.get(k).cloned().unwrap_or_else(Gq::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn deg(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn leading(&self) -> Option<&Gq> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &BigRational) -> Gq {
        let mut acc = Gq::zero();
        for c in self.coeffs.iter().rev() {
            acc = Gq::new(&acc.re * x, &acc.im * x);
            acc += c;
        }
        acc
    }

    pub fn eval_gq(&self, x: &Gq) -> Gq {
        let mut acc = Gq::zero();
        for c in self.coeffs.iter().rev() {
            acc = &acc * x;
            acc += c;
        }
        acc
    }

    pub fn eval_c64(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_c64();
        }
        acc
    }

    pub fn scale(&self, c: &Gq) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * &Gq::from_int(k as i64))
                .collect(),
        )
    }

    /// Coefficient-wise complex conjugate.
    pub fn conj(&self) -> Poly {
        Poly::new(self.coeffs.iter().map(Gq::conj).collect())
    }

    pub fn real_part(&self) -> RPoly {
        RPoly::new(self.coeffs.iter().map(|c| c.re.clone()).collect())
    }

    pub fn imag_part(&self) -> RPoly {
        RPoly::new(self.coeffs.iter().map(|c| c.im.clone()).collect())
    }

    pub fn from_real(p: &RPoly) -> Poly {
        Poly::new(
            p.coeffs()
                .iter()
                .map(|c| Gq::from_rational(c.clone()))
                .collect(),
        )
    }

    pub fn has_real_coeffs(&self) -> bool {
        self.coeffs.iter().all(Gq::is_real)
    }

    /// Quotient and remainder; panics on zero divisor.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let dd = d.degree().unwrap();
        if self.degree().map_or(true, |n| n < dd) {
            return (Poly::zero(), self.clone());
        }
        let lead_inv = d.leading().unwrap().inv().unwrap();
        let mut rem = self.coeffs.clone();
        let nq = rem.len() - dd;
        let mut q = vec![Gq::zero(); nq];
        for k in (0..nq).rev() {
            let c = &rem[k + dd] * &lead_inv;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                let t = dc * &c;
                rem[k + j] -= &t;
            }
            q[k] = c;
        }
        (Poly::new(q), Poly::new(rem))
    }

    /// Exact division; `None` when the remainder is nonzero.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        let (q, r) = self.div_rem(d);
        if r.is_zero() {
            Some(q)
        } else {
            None
        }
    }

    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some(l) => self.scale(&l.inv().unwrap()),
        }
    }

    /// Monic gcd by the Euclidean algorithm with per-step normalization.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.monic();
        let mut b = other.monic();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a
    }

    /// Substitute `lambda -> lambda + shift`.
    pub fn shift(&self, shift: &BigRational) -> Poly {
        let s = Gq::from_rational(shift.clone());
        let lin = Poly::new(vec![s, Gq::one()]);
        let mut acc = Poly::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * &lin) + &Poly::constant(c.clone());
        }
        acc
    }

    pub fn pow(&self, mut e: usize) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// `p * conj(p)`: real-coefficient polynomial equal to `|p(lambda)|^2`
    /// for real `lambda`.
    pub fn norm_sq(&self) -> RPoly {
        let prod = self * &self.conj();
        debug_assert!(prod.has_real_coeffs());
        prod.real_part()
    }

    /// Multiplicity of the root `lambda = p` (0 if not a root).
    pub fn root_multiplicity(&self, p: &BigRational) -> usize {
        let mut f = self.clone();
        let lin = Poly::linear_root(&Gq::from_rational(p.clone()));
        let mut m = 0;
        while !f.is_zero() && f.eval(p).is_zero() {
            f = f.exact_div(&lin).expect("root divides");
            m += 1;
        }
        m
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({})", c)?,
                1 => write!(f, "({})x", c)?,
                _ => write!(f, "({})x^{}", c, k)?,
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(&self.coeff(k) + &rhs.coeff(k));
        }
        Poly::new(out)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(&self.coeff(k) - &rhs.coeff(k));
        }
        Poly::new(out)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Gq::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                let t = a * b;
                out[i + j] += &t;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

/// Real-rational polynomial, used for sign analysis on the real line.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RPoly {
    coeffs: Vec<BigRational>,
}

impl RPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        RPoly { coeffs }
    }

    pub fn zero() -> Self {
        RPoly { coeffs: vec![] }
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + rational_to_f64(c);
        }
        acc
    }

    pub fn sign_at(&self, x: &BigRational) -> i32 {
        let v = self.eval(x);
        if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn derivative(&self) -> RPoly {
        if self.coeffs.len() <= 1 {
            return RPoly::zero();
        }
        RPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * BigRational::from_integer(k.into()))
                .collect(),
        )
    }

    pub fn div_rem(&self, d: &RPoly) -> (RPoly, RPoly) {
        assert!(!d.is_zero());
        let dd = d.degree().unwrap();
        if self.degree().map_or(true, |n| n < dd) {
            return (RPoly::zero(), self.clone());
        }
        let lead_inv = d.coeffs.last().unwrap().recip();
        let mut rem = self.coeffs.clone();
        let nq = rem.len() - dd;
        let mut q = vec![BigRational::zero(); nq];
        for k in (0..nq).rev() {
            let c = &rem[k + dd] * &lead_inv;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                let t = dc * &c;
                rem[k + j] -= t;
            }
            q[k] = c;
        }
        (RPoly::new(q), RPoly::new(rem))
    }

    pub fn monic(&self) -> RPoly {
        match self.coeffs.last() {
            None => RPoly::zero(),
            Some(l) => {
                let inv = l.recip();
                RPoly::new(self.coeffs.iter().map(|c| c * &inv).collect())
            }
        }
    }

    pub fn gcd(&self, other: &RPoly) -> RPoly {
        let mut a = self.monic();
        let mut b = other.monic();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a
    }

    /// Square-free part `p / gcd(p, p')`, monic.
    pub fn square_free(&self) -> RPoly {
        if self.is_zero() {
            return RPoly::zero();
        }
        let g = self.gcd(&self.derivative());
        if g.degree() == Some(0) {
            return self.monic();
        }
        let (q, r) = self.div_rem(&g);
        debug_assert!(r.is_zero());
        q.monic()
    }

    pub fn exact_div(&self, d: &RPoly) -> Option<RPoly> {
        let (q, r) = self.div_rem(d);
        if r.is_zero() {
            Some(q)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn p(cs: &[i64]) -> Poly {
        Poly::new(cs.iter().map(|&c| Gq::from_int(c)).collect())
    }

    #[test]
    fn arith_and_div() {
        let a = p(&[-1, 0, 1]); // x^2 - 1
        let b = p(&[1, 1]); // x + 1
        let (q, r) = a.div_rem(&b);
        assert!(r.is_zero());
        assert_eq!(q, p(&[-1, 1]));
        assert_eq!(&q * &b, a);
    }

    #[test]
    fn gcd_monic() {
        let a = &p(&[-1, 1]) * &p(&[2, 1]); // (x-1)(x+2)
        let b = &p(&[-1, 1]) * &p(&[5, 3]); // (x-1)(3x+5)
        let g = a.gcd(&b);
        assert_eq!(g, p(&[-1, 1]));
    }

    #[test]
    fn eval_shift() {
        let a = p(&[1, 2, 3]);
        let s = a.shift(&ratio(1, 2));
        assert_eq!(s.eval(&ratio(0, 1)), a.eval(&ratio(1, 2)));
        assert_eq!(s.eval(&ratio(1, 3)), a.eval(&(ratio(1, 3) + ratio(1, 2))));
    }

    #[test]
    fn norm_sq_real() {
        let a = Poly::new(vec![Gq::new(ratio(1, 2), ratio(1, 3)), Gq::i()]);
        let n = a.norm_sq();
        let x = ratio(2, 5);
        let v = a.eval(&x);
        assert_eq!(n.eval(&x), v.abs_sq());
    }

    #[test]
    fn square_free() {
        let a = RPoly::new(vec![ratio(0, 1), ratio(0, 1), ratio(1, 1)]); // x^2
        assert_eq!(a.square_free(), RPoly::new(vec![ratio(0, 1), ratio(1, 1)]));
    }
}
