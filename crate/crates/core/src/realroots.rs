//! Exact real-root isolation on closed intervals via Sturm sequences, with
//! rational-root extraction. No floating point in any decision path.

use crate::poly::RPoly;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// An isolated real root: either an exact rational value or an open isolating
/// interval with rational endpoints containing exactly one (irrational) root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RootLoc {
    Rational(BigRational),
    Interval(BigRational, BigRational),
}

impl RootLoc {
    pub fn lo(&self) -> BigRational {
        match self {
            RootLoc::Rational(r) => r.clone(),
            RootLoc::Interval(l, _) => l.clone(),
        }
    }

    pub fn hi(&self) -> BigRational {
        match self {
            RootLoc::Rational(r) => r.clone(),
            RootLoc::Interval(_, h) => h.clone(),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            RootLoc::Rational(r) => Some(r),
            RootLoc::Interval(..) => None,
        }
    }

    /// A rational point inside (or equal to) the root location.
    pub fn witness(&self) -> BigRational {
        match self {
            RootLoc::Rational(r) => r.clone(),
            RootLoc::Interval(l, h) => (l + h) / BigRational::from_integer(2.into()),
        }
    }
}

/// Scale by a positive constant so the leading coefficient has absolute
/// value 1; Sturm chains must not flip signs.
fn positive_normalize(p: &RPoly) -> RPoly {
    match p.coeffs().last() {
        None => RPoly::zero(),
        Some(l) => {
            let scale = l.abs().recip();
            RPoly::new(p.coeffs().iter().map(|c| c * &scale).collect())
        }
    }
}

/// Sturm chain of a square-free polynomial.
fn sturm_chain(p: &RPoly) -> Vec<RPoly> {
    let mut chain = vec![p.clone(), p.derivative()];
    while !chain.last().unwrap().is_zero() {
        let n = chain.len();
        let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
        if r.is_zero() {
            break;
        }
        let neg = RPoly::new(r.coeffs().iter().map(|c| -c.clone()).collect());
        chain.push(positive_normalize(&neg));
    }
    chain
}

fn sign_variations(chain: &[RPoly], x: &BigRational) -> usize {
    let mut count = 0;
    let mut last = 0;
    for p in chain {
        let s = p.sign_at(x);
        if s == 0 {
            continue;
        }
        if last != 0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

/// Number of roots of the square-free `p` in the half-open interval `(lo, hi]`.
fn roots_in_half_open(chain: &[RPoly], lo: &BigRational, hi: &BigRational) -> usize {
    sign_variations(chain, lo) - sign_variations(chain, hi)
}

fn two() -> BigRational {
    BigRational::from_integer(2.into())
}

/// All rational roots of `p`, found by divisor enumeration on the primitive
/// integer form. Trial division is capped; extremely composite coefficients
/// degrade to an empty result (callers fall back to interval isolation).
pub fn rational_roots(p: &RPoly) -> Vec<BigRational> {
    if p.is_zero() || p.degree() == Some(0) {
        return vec![];
    }
    let mut f = p.clone();
    let mut roots = Vec::new();
    // strip roots at zero
    while f.coeff(0).is_zero() && !f.is_zero() {
        let shifted = RPoly::new(f.coeffs()[1..].to_vec());
        f = shifted;
        if !roots.contains(&BigRational::zero()) {
            roots.push(BigRational::zero());
        }
        if f.is_zero() || f.degree() == Some(0) {
            return roots;
        }
    }
    // clear denominators to an integer polynomial
    let mut den = BigInt::one();
    for c in f.coeffs() {
        den = den.lcm(c.denom());
    }
    let ints: Vec<BigInt> = f
        .coeffs()
        .iter()
        .map(|c| c.numer() * (&den / c.denom()))
        .collect();
    let c0 = ints[0].clone();
    let lc = ints.last().unwrap().clone();
    let div0 = bounded_divisors(&c0.abs());
    let divl = bounded_divisors(&lc.abs());
    let (div0, divl) = match (div0, divl) {
        (Some(a), Some(b)) => (a, b),
        _ => return roots, // factorization cap exceeded; report none
    };
    for p_num in &div0 {
        for q_den in &divl {
            for sign in [1i64, -1] {
                let cand = BigRational::new(p_num * BigInt::from(sign), q_den.clone());
                let cand = cand.reduced();
                if roots.contains(&cand) {
                    continue;
                }
                if f.eval(&cand).is_zero() {
                    roots.push(cand);
                }
            }
        }
    }
    roots.sort();
    roots
}

/// All positive divisors of `n` via trial division, or `None` if `n` is too
/// composite to enumerate within the cap.
fn bounded_divisors(n: &BigInt) -> Option<Vec<BigInt>> {
    if n.is_zero() {
        // zero constant term was stripped earlier; treat as (1)
        return Some(vec![BigInt::one()]);
    }
    let mut factors: Vec<(BigInt, u32)> = Vec::new();
    let mut m = n.clone();
    let mut d = BigInt::from(2);
    let cap = BigInt::from(1_000_000u64);
    while &d * &d <= m {
        if d > cap {
            return None;
        }
        let mut e = 0u32;
        while (&m % &d).is_zero() {
            m /= &d;
            e += 1;
        }
        if e > 0 {
            factors.push((d.clone(), e));
        }
        d += 1;
    }
    if m > BigInt::one() {
        factors.push((m, 1));
    }
    let mut divs = vec![BigInt::one()];
    for (p, e) in factors {
        let mut next = Vec::with_capacity(divs.len() * (e as usize + 1));
        for d0 in &divs {
            let mut pk = BigInt::one();
            for _ in 0..=e {
                next.push(d0 * &pk);
                pk *= &p;
            }
        }
        divs = next;
        if divs.len() > 4096 {
            return None;
        }
    }
    Some(divs)
}

/// Isolate all real roots of `p` in the closed interval `[lo, hi]`.
/// Rational roots are reported exactly; the rest as isolating open intervals
/// with rational endpoints, each containing exactly one root. Multiplicities
/// are dropped (the square-free part is isolated).
pub fn isolate_roots(p: &RPoly, lo: &BigRational, hi: &BigRational) -> Vec<RootLoc> {
    assert!(lo < hi, "empty isolation interval");
    if p.is_zero() {
        panic!("cannot isolate roots of the zero polynomial");
    }
    if p.degree() == Some(0) {
        return vec![];
    }
    let sf = p.square_free();
    // Pull out rational roots first so the Sturm stage only sees the
    // (square-free) irrational part.
    let mut out: Vec<RootLoc> = Vec::new();
    let mut rest = sf.clone();
    for r in rational_roots(&sf) {
        if &r >= lo && &r <= hi {
            out.push(RootLoc::Rational(r.clone()));
        }
        let lin = RPoly::new(vec![-r.clone(), BigRational::one()]);
        if let Some(q) = rest.exact_div(&lin) {
            rest = q;
        }
    }
    if rest.degree().map_or(true, |d| d == 0) {
        out.sort_by(|a, b| a.lo().cmp(&b.lo()));
        return out;
    }
    let chain = sturm_chain(&rest);
    // `rest` has no rational roots, so endpoints are never roots of `rest`.
    let mut stack = vec![(lo.clone(), hi.clone(), roots_in_half_open(&chain, lo, hi))];
    while let Some((a, b, count)) = stack.pop() {
        match count {
            0 => {}
            1 => out.push(RootLoc::Interval(a, b)),
            _ => {
                let mut mid = (&a + &b) / two();
                // never split at a root of `rest` (mid is rational, rest has
                // no rational roots, so this cannot happen; keep the guard
                // for the composed callers that pass non-square-free input)
                if rest.eval(&mid).is_zero() {
                    mid = (&a + &mid) / two();
                }
                let cl = roots_in_half_open(&chain, &a, &mid);
                stack.push((a, mid.clone(), cl));
                stack.push((mid, b, count - cl));
            }
        }
    }
    out.sort_by(|a, b| a.lo().cmp(&b.lo()));
    out
}

/// Shrink an isolating interval for the unique root of square-free `p` until
/// its width is below `width`.
pub fn refine_interval(
    p: &RPoly,
    mut lo: BigRational,
    mut hi: BigRational,
    width: &BigRational,
) -> (BigRational, BigRational) {
    let slo = p.sign_at(&lo);
    debug_assert!(slo != 0 && p.sign_at(&hi) != 0 && slo != p.sign_at(&hi));
    while &(&hi - &lo) > width {
        let mid = (&lo + &hi) / two();
        let sm = p.sign_at(&mid);
        if sm == 0 {
            // rational root hit mid-refinement; collapse around it
            let eps = width / two();
            return (&mid - &eps, &mid + &eps);
        }
        if sm == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Does `p` have any real root in the closed interval `[lo, hi]`?
pub fn has_root_in_closed(p: &RPoly, lo: &BigRational, hi: &BigRational) -> bool {
    if p.is_zero() {
        return true;
    }
    if p.degree() == Some(0) {
        return false;
    }
    if p.eval(lo).is_zero() || p.eval(hi).is_zero() {
        return true;
    }
    let sf = p.square_free();
    if sf.eval(lo).is_zero() || sf.eval(hi).is_zero() {
        return true;
    }
    let chain = sturm_chain(&sf);
    roots_in_half_open(&chain, lo, hi) > 0
}

/// Exact number of distinct real roots in the closed interval.
pub fn count_roots_in_closed(p: &RPoly, lo: &BigRational, hi: &BigRational) -> usize {
    if p.is_zero() || p.degree() == Some(0) {
        return 0;
    }
    let sf = p.square_free();
    let chain = sturm_chain(&sf);
    let mut n = roots_in_half_open(&chain, lo, hi);
    if sf.eval(lo).is_zero() {
        n += 1;
    }
    n
}

/// True iff `p(x) >= 0` for every `x` in the closed interval. Decided by
/// isolating the roots of `p` and checking signs between them.
pub fn nonnegative_on_closed(p: &RPoly, lo: &BigRational, hi: &BigRational) -> bool {
    if p.is_zero() {
        return true;
    }
    let slo = p.sign_at(lo);
    let shi = p.sign_at(hi);
    if slo < 0 || shi < 0 {
        return false;
    }
    let roots = isolate_roots(p, lo, hi);
    // check sign at points interleaved between consecutive root locations
    let mut marks: Vec<BigRational> = vec![lo.clone()];
    for r in &roots {
        marks.push(r.lo());
        marks.push(r.hi());
    }
    marks.push(hi.clone());
    marks.sort();
    marks.dedup();
    for w in marks.windows(2) {
        let mid = (&w[0] + &w[1]) / two();
        if p.sign_at(&mid) < 0 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn rp(cs: &[(i64, i64)]) -> RPoly {
        RPoly::new(cs.iter().map(|&(p, q)| ratio(p, q)).collect())
    }

    #[test]
    fn isolates_rational_roots_exactly() {
        // lambda * (lambda - 1/2) on [0,1]
        let p = rp(&[(0, 1), (-1, 2), (1, 1)]);
        let roots = isolate_roots(&p, &ratio(0, 1), &ratio(1, 1));
        assert_eq!(
            roots,
            vec![
                RootLoc::Rational(ratio(0, 1)),
                RootLoc::Rational(ratio(1, 2))
            ]
        );
    }

    #[test]
    fn isolates_irrational_roots() {
        // lambda^2 - 2 on [0,2]: one root at sqrt(2)
        let p = rp(&[(-2, 1), (0, 1), (1, 1)]);
        let roots = isolate_roots(&p, &ratio(0, 1), &ratio(2, 1));
        assert_eq!(roots.len(), 1);
        match &roots[0] {
            RootLoc::Interval(l, h) => {
                assert!(p.sign_at(l) * p.sign_at(h) < 0);
            }
            _ => panic!("expected interval"),
        }
    }

    #[test]
    fn counts_and_membership() {
        let p = rp(&[(-2, 1), (0, 1), (1, 1)]);
        assert!(has_root_in_closed(&p, &ratio(1, 1), &ratio(2, 1)));
        assert!(!has_root_in_closed(&p, &ratio(0, 1), &ratio(1, 1)));
        assert_eq!(count_roots_in_closed(&p, &ratio(-2, 1), &ratio(2, 1)), 2);
        // root at the left endpoint counts
        assert!(has_root_in_closed(
            &rp(&[(0, 1), (1, 1)]),
            &ratio(0, 1),
            &ratio(1, 1)
        ));
    }

    #[test]
    fn nonnegative_check() {
        // (lambda - 1/2)^2 >= 0
        let p = rp(&[(1, 4), (-1, 1), (1, 1)]);
        assert!(nonnegative_on_closed(&p, &ratio(0, 1), &ratio(1, 1)));
        // lambda - 1/2 changes sign
        let q = rp(&[(-1, 2), (1, 1)]);
        assert!(!nonnegative_on_closed(&q, &ratio(0, 1), &ratio(1, 1)));
    }

    #[test]
    fn rational_root_enumeration() {
        // (2x - 3)(x + 5) = 2x^2 + 7x - 15
        let p = rp(&[(-15, 1), (7, 1), (2, 1)]);
        let roots = rational_roots(&p);
        assert!(roots.contains(&ratio(3, 2)));
        assert!(roots.contains(&ratio(-5, 1)));
    }
}
