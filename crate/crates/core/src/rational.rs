//! Gaussian-rational scalars: complex numbers with exact rational parts.

use num_bigint::{BigInt, ToBigInt};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// A Gaussian rational `re + im*i`. Both parts are kept in canonical reduced
/// form by `BigRational` itself (coprime, positive denominator).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gq {
    pub re: BigRational,
    pub im: BigRational,
}

impl Gq {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Gq { re, im }
    }

    pub fn from_rational(re: BigRational) -> Self {
        Gq {
            re,
            im: BigRational::zero(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Gq::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `p/q` as a real rational scalar.
    pub fn from_ratio(p: i64, q: i64) -> Self {
        Gq::from_rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn zero() -> Self {
        Gq::from_int(0)
    }

    pub fn one() -> Self {
        Gq::from_int(1)
    }

    pub fn i() -> Self {
        Gq {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Gq {
        Gq {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// `|z|^2` as an exact rational.
    pub fn abs_sq(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn inv(&self) -> Option<Gq> {
        if self.is_zero() {
            return None;
        }
        let n = self.abs_sq();
        Some(Gq {
            re: &self.re / &n,
            im: -&self.im / &n,
        })
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }
}

impl fmt::Debug for Gq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Gq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}i", self.im)
        } else if self.im.is_negative() {
            write!(f, "{}{}i", self.re, self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

impl Add for &Gq {
    type Output = Gq;
    fn add(self, rhs: &Gq) -> Gq {
        Gq {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }
}

impl Sub for &Gq {
    type Output = Gq;
    fn sub(self, rhs: &Gq) -> Gq {
        Gq {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }
}

impl Mul for &Gq {
    type Output = Gq;
    fn mul(self, rhs: &Gq) -> Gq {
        Gq {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Div for &Gq {
    type Output = Gq;
    fn div(self, rhs: &Gq) -> Gq {
        let inv = rhs.inv().expect("division by zero Gaussian rational");
        self * &inv
    }
}

impl Neg for &Gq {
    type Output = Gq;
    fn neg(self) -> Gq {
        Gq {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Gq {
            type Output = Gq;
            fn $m(self, rhs: Gq) -> Gq {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Gq {
    type Output = Gq;
    fn neg(self) -> Gq {
        -(&self)
    }
}

impl AddAssign<&Gq> for Gq {
    fn add_assign(&mut self, rhs: &Gq) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&Gq> for Gq {
    fn sub_assign(&mut self, rhs: &Gq) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&Gq> for Gq {
    fn mul_assign(&mut self, rhs: &Gq) {
        *self = &*self * rhs;
    }
}

/// Exact-to-float conversion that survives numerators far beyond `f64` range
/// by cancelling magnitudes first.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // fall back to scaled division for extreme magnitudes
    let scale = r.denom().bits().max(r.numer().bits()) as i64 - 52;
    if scale > 0 {
        let n = r.numer() >> scale;
        let d = r.denom() >> scale;
        n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
    } else {
        f64::NAN
    }
}

pub fn rational_from_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// via continued fractions. Returns `None` for non-finite input.
pub fn rationalize(x: f64, max_den: u64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let sign = if x < 0.0 { -1 } else { 1 };
    let mut x = x.abs();
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    let max_den_big = max_den.to_bigint().unwrap();
    for _ in 0..64 {
        let a = x.floor();
        if a >= 9.2e18 {
            break;
        }
        let a_big = BigInt::from(a as i64);
        let p2 = &a_big * &p1 + &p0;
        let q2 = &a_big * &q1 + &q0;
        if q2 > max_den_big {
            break;
        }
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let frac = x - a;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    if q1.is_zero() {
        return None;
    }
    Some(BigRational::new(p1 * BigInt::from(sign), q1))
}

/// Rationalize both parts of a complex float.
pub fn rationalize_complex(z: Complex64, max_den: u64) -> Option<Gq> {
    Some(Gq::new(
        rationalize(z.re, max_den)?,
        rationalize(z.im, max_den)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_ops() {
        let a = Gq::new(ratio(1, 2), ratio(3, 1));
        let b = Gq::new(ratio(-2, 3), ratio(1, 5));
        let prod = &a * &b;
        let back = &prod / &b;
        assert_eq!(back, a);
        assert!((&a - &a).is_zero());
        assert_eq!(&a * &a.inv().unwrap(), Gq::one());
    }

    #[test]
    fn conj_abs() {
        let a = Gq::new(ratio(3, 4), ratio(-1, 2));
        assert_eq!(&a * &a.conj(), Gq::from_rational(a.abs_sq()));
    }

    #[test]
    fn rationalize_recovers_simple_fractions() {
        let x = 5.0 / 7.0;
        assert_eq!(rationalize(x, 1000).unwrap(), ratio(5, 7));
        assert_eq!(rationalize(-0.25, 1000).unwrap(), ratio(-1, 4));
        assert_eq!(rationalize(3.0, 10).unwrap(), ratio(3, 1));
    }
}
