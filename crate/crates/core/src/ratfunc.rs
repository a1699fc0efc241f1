//! Rational functions in one variable over the Gaussian rationals, kept in
//! canonical form: coprime numerator/denominator, monic denominator.

use crate::poly::{Poly, RPoly};
use crate::rational::Gq;
use crate::realroots::{self, RootLoc};
use num_complex::Complex64;
use num_rational::BigRational;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, PartialEq, Eq)]
pub struct RatFunc {
    num: Poly,
    den: Poly,
}

impl RatFunc {
    /// Canonicalize `num/den`: divide by the gcd, make the denominator monic.
    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "rational function with zero denominator");
        if num.is_zero() {
            return RatFunc {
                num: Poly::zero(),
                den: Poly::one(),
            };
        }
        let g = num.gcd(&den);
        let (num, den) = if g.degree().map_or(false, |d| d > 0) {
            (num.exact_div(&g).unwrap(), den.exact_div(&g).unwrap())
        } else {
            (num, den)
        };
        let lead_inv = den.leading().unwrap().inv().unwrap();
        RatFunc {
            num: num.scale(&lead_inv),
            den: den.scale(&lead_inv),
        }
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFunc {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn constant(c: Gq) -> Self {
        RatFunc::from_poly(Poly::constant(c))
    }

    pub fn from_int(n: i64) -> Self {
        RatFunc::constant(Gq::from_int(n))
    }

    pub fn zero() -> Self {
        RatFunc {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        RatFunc {
            num: Poly::one(),
            den: Poly::one(),
        }
    }

    /// The coordinate function `lambda`.
    pub fn var() -> Self {
        RatFunc::from_poly(Poly::var())
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    pub fn as_constant(&self) -> Option<Gq> {
        if self.is_constant() {
            Some(self.num.coeff(0))
        } else {
            None
        }
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_polynomial(&self) -> Option<&Poly> {
        if self.den.is_one() {
            Some(&self.num)
        } else {
            None
        }
    }

    pub fn inv(&self) -> Option<RatFunc> {
        if self.is_zero() {
            return None;
        }
        Some(RatFunc::new(self.den.clone(), self.num.clone()))
    }

    pub fn conj(&self) -> RatFunc {
        RatFunc::new(self.num.conj(), self.den.conj())
    }

    /// `|f|^2` as a real-coefficient rational function of a real variable.
    pub fn norm_sq(&self) -> RatFunc {
        self * &self.conj()
    }

    /// Exact evaluation; `None` at a pole.
    pub fn eval(&self, x: &BigRational) -> Option<Gq> {
        let d = self.den.eval(x);
        if d.is_zero() {
            return None;
        }
        Some(&self.num.eval(x) / &d)
    }

    pub fn eval_c64(&self, x: f64) -> Complex64 {
        self.num.eval_c64(x) / self.den.eval_c64(x)
    }

    /// Real zeros of the function in the closed interval: common real roots
    /// of the numerator's real and imaginary parts.
    pub fn real_zeros_in(&self, lo: &BigRational, hi: &BigRational) -> Vec<RootLoc> {
        real_locus_roots(&self.num, lo, hi)
    }

    /// Real poles in the closed interval (after canonical cancellation).
    pub fn real_poles_in(&self, lo: &BigRational, hi: &BigRational) -> Vec<RootLoc> {
        real_locus_roots(&self.den, lo, hi)
    }

    /// Pole-free on the closed interval?
    pub fn is_bounded_on(&self, lo: &BigRational, hi: &BigRational) -> bool {
        if self.den.is_one() {
            return true;
        }
        let g = real_locus_poly(&self.den);
        match g {
            None => true,
            Some(g) => !realroots::has_root_in_closed(&g, lo, hi),
        }
    }

    /// Nonzero a.e. on the interval? (A nonzero rational function has only
    /// finitely many zeros.)
    pub fn is_supported_ae(&self) -> bool {
        !self.is_zero()
    }

    /// Order of vanishing at `p`: positive for zeros, negative for poles.
    pub fn order_at(&self, p: &BigRational) -> i64 {
        if self.is_zero() {
            return i64::MAX;
        }
        self.num.root_multiplicity(p) as i64 - self.den.root_multiplicity(p) as i64
    }

    /// Laurent coefficients at `lambda = p`: returns `(ord, coeffs)` where the
    /// expansion is `sum_{k>=0} coeffs[k] * (lambda - p)^(ord + k)` up to
    /// `n_terms` terms. `ord` is the order at `p` (negative at a pole).
    pub fn series_at(&self, p: &BigRational, n_terms: usize) -> (i64, Vec<Gq>) {
        assert!(!self.is_zero(), "series of zero function");
        let num_s = self.num.shift(p);
        let den_s = self.den.shift(p);
        let vn = trailing_order(&num_s);
        let vd = trailing_order(&den_s);
        let ord = vn as i64 - vd as i64;
        let nu: Vec<Gq> = num_s.coeffs()[vn..].to_vec();
        let de: Vec<Gq> = den_s.coeffs()[vd..].to_vec();
        // power-series division nu / de to n_terms
        let d0_inv = de[0].inv().expect("unit constant term");
        let mut out = Vec::with_capacity(n_terms);
        let mut rem = nu;
        for k in 0..n_terms {
            let c = if k < rem.len() {
                &rem[k] * &d0_inv
            } else {
                Gq::zero()
            };
            if !c.is_zero() {
                for (j, dj) in de.iter().enumerate() {
                    let idx = k + j;
                    if idx >= rem.len() {
                        rem.resize(idx + 1, Gq::zero());
                    }
                    let t = dj * &c;
                    rem[idx] -= &t;
                }
            }
            out.push(c);
        }
        (ord, out)
    }

    /// Maximum denominator pole order over a set of rational points.
    pub fn pole_order_at(&self, p: &BigRational) -> usize {
        self.den.root_multiplicity(p)
    }
}

fn trailing_order(p: &Poly) -> usize {
    p.coeffs().iter().position(|c| !c.is_zero()).unwrap_or(0)
}

/// The real polynomial whose roots in the real line are exactly the real
/// points where `p` vanishes: gcd of real and imaginary parts.
/// Returns `None` when `p` has no real zeros (gcd is a nonzero constant).
pub fn real_locus_poly(p: &Poly) -> Option<RPoly> {
    if p.is_zero() {
        return Some(RPoly::zero());
    }
    let re = p.real_part();
    let im = p.imag_part();
    let g = if im.is_zero() {
        re
    } else if re.is_zero() {
        im
    } else {
        re.gcd(&im)
    };
    if g.degree().map_or(true, |d| d == 0) {
        None
    } else {
        Some(g)
    }
}

/// Real roots of a complex-coefficient polynomial in a closed interval.
pub fn real_locus_roots(p: &Poly, lo: &BigRational, hi: &BigRational) -> Vec<RootLoc> {
    match real_locus_poly(p) {
        None => vec![],
        Some(g) => {
            if g.is_zero() {
                vec![]
            } else {
                realroots::isolate_roots(&g, lo, hi)
            }
        }
    }
}

impl fmt::Debug for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{:?}", self.num)
        } else {
            write!(f, "({:?})/({:?})", self.num, self.den)
        }
    }
}

impl Add for &RatFunc {
    type Output = RatFunc;
    fn add(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::new(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Sub for &RatFunc {
    type Output = RatFunc;
    fn sub(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::new(
            &(&self.num * &rhs.den) - &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Mul for &RatFunc {
    type Output = RatFunc;
    fn mul(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::new(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Div for &RatFunc {
    type Output = RatFunc;
    fn div(self, rhs: &RatFunc) -> RatFunc {
        assert!(!rhs.is_zero(), "division by zero rational function");
        RatFunc::new(&self.num * &rhs.den, &self.den * &rhs.num)
    }
}

impl Neg for &RatFunc {
    type Output = RatFunc;
    fn neg(self) -> RatFunc {
        RatFunc {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn lam() -> RatFunc {
        RatFunc::var()
    }

    #[test]
    fn canonical_cancellation() {
        // lambda / lambda == 1
        let f = &lam() / &lam();
        assert!(f.is_one());
    }

    #[test]
    fn field_identities() {
        let f = RatFunc::new(
            Poly::one(),
            Poly::new(vec![Gq::from_int(1), Gq::from_int(1)]),
        );
        let g = RatFunc::new(
            Poly::var(),
            Poly::new(vec![Gq::from_int(1), Gq::from_int(1)]),
        );
        // 1/(l+1) + l/(l+1) = 1
        assert!((&f + &g).is_one());
        let inv = f.inv().unwrap();
        assert!((&f * &inv).is_one());
    }

    #[test]
    fn boundedness_closed_cell() {
        // 1/(3 lambda) on [0,1]: pole at the closed endpoint 0
        let f = RatFunc::new(Poly::one(), Poly::new(vec![Gq::zero(), Gq::from_int(3)]));
        assert!(!f.is_bounded_on(&ratio(0, 1), &ratio(1, 1)));
        assert!(f.is_bounded_on(&ratio(1, 4), &ratio(1, 1)));
        // 1/(lambda+1) is pole-free on [0,1]
        let g = RatFunc::new(
            Poly::one(),
            Poly::new(vec![Gq::from_int(1), Gq::from_int(1)]),
        );
        assert!(g.is_bounded_on(&ratio(0, 1), &ratio(1, 1)));
        // complex pole does not hurt real boundedness
        let h = RatFunc::new(
            Poly::one(),
            Poly::new(vec![Gq::from_int(1), Gq::zero(), Gq::from_int(1)]),
        );
        assert!(h.is_bounded_on(&ratio(-1, 1), &ratio(1, 1)));
    }

    #[test]
    fn series_expansion() {
        // f = 1/(1 - lambda) at 0: 1 + l + l^2 + ...
        let f = RatFunc::new(
            Poly::one(),
            Poly::new(vec![Gq::from_int(1), Gq::from_int(-1)]),
        );
        let (ord, cs) = f.series_at(&ratio(0, 1), 4);
        assert_eq!(ord, 0);
        assert!(cs.iter().all(|c| c.is_one()));
        // pole order: 1/lambda^2
        let g = RatFunc::new(
            Poly::one(),
            Poly::new(vec![Gq::zero(), Gq::zero(), Gq::from_int(1)]),
        );
        let (ord2, cs2) = g.series_at(&ratio(0, 1), 2);
        assert_eq!(ord2, -2);
        assert!(cs2[0].is_one());
        assert!(cs2[1].is_zero());
    }

    #[test]
    fn order_at_points() {
        let f = RatFunc::new(
            Poly::new(vec![Gq::zero(), Gq::from_int(1)]),
            Poly::new(vec![Gq::from_int(-1), Gq::from_int(1)]),
        ); // l/(l-1)
        assert_eq!(f.order_at(&ratio(0, 1)), 1);
        assert_eq!(f.order_at(&ratio(1, 1)), -1);
        assert_eq!(f.order_at(&ratio(2, 1)), 0);
    }
}
