//! Exact eigenvalue-function extraction for cell matrices.
//!
//! The characteristic polynomial is computed exactly (Faddeev-LeVerrier),
//! split into square-free factors (Yun), and factored into linear pieces
//! over the rational-function field. Degree-one factors are read off
//! directly; higher-degree square-free factors are attacked by lifting an
//! exact rational starting root (guessed from a floating-point solve and
//! verified exactly before use) into a truncated power series, then
//! reconstructing the polynomial eigenvalue. Only exact division gates
//! acceptance; when a factor refuses to split, the caller gets the factor
//! back as a witness.

use crate::error::EngineError;
use crate::linalg::CellMat;
use crate::poly::Poly;
use crate::ratfunc::RatFunc;
use crate::rational::{rationalize_complex, Gq};
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;

/// Polynomial in `y` with rational-function coefficients, ascending degree.
#[derive(Clone, Debug, PartialEq)]
pub struct YPoly {
    pub coeffs: Vec<RatFunc>,
}

impl YPoly {
    pub fn new(mut coeffs: Vec<RatFunc>) -> Self {
        while coeffs.last().map_or(false, RatFunc::is_zero) {
            coeffs.pop();
        }
        YPoly { coeffs }
    }

    pub fn zero() -> Self {
        YPoly { coeffs: vec![] }
    }

    pub fn one() -> Self {
        YPoly {
            coeffs: vec![RatFunc::one()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn deg(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn coeff(&self, k: usize) -> RatFunc {
        self.coeffs.get(k).cloned().unwrap_or_else(RatFunc::zero)
    }

    pub fn leading(&self) -> Option<&RatFunc> {
        self.coeffs.last()
    }

    pub fn add(&self, other: &YPoly) -> YPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        YPoly::new((0..n).map(|k| &self.coeff(k) + &other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &YPoly) -> YPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        YPoly::new((0..n).map(|k| &self.coeff(k) - &other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &YPoly) -> YPoly {
        if self.is_zero() || other.is_zero() {
            return YPoly::zero();
        }
        let mut out = vec![RatFunc::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        YPoly::new(out)
    }

    pub fn div_rem(&self, d: &YPoly) -> (YPoly, YPoly) {
        assert!(!d.is_zero());
        let dd = d.degree().unwrap();
        if self.degree().map_or(true, |n| n < dd) {
            return (YPoly::zero(), self.clone());
        }
        let lead_inv = d.leading().unwrap().inv().unwrap();
        let mut rem = self.coeffs.clone();
        let nq = rem.len() - dd;
        let mut q = vec![RatFunc::zero(); nq];
        for k in (0..nq).rev() {
            let c = &rem[k + dd] * &lead_inv;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[k + j] = &rem[k + j] - &(dc * &c);
            }
            q[k] = c;
        }
        (YPoly::new(q), YPoly::new(rem))
    }

    pub fn monic(&self) -> YPoly {
        match self.leading() {
            None => YPoly::zero(),
            Some(l) => {
                let inv = l.inv().unwrap();
                YPoly::new(self.coeffs.iter().map(|c| c * &inv).collect())
            }
        }
    }

    pub fn gcd(&self, other: &YPoly) -> YPoly {
        let mut a = self.monic();
        let mut b = other.monic();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a
    }

    pub fn derivative(&self) -> YPoly {
        if self.coeffs.len() <= 1 {
            return YPoly::zero();
        }
        YPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * &RatFunc::from_int(k as i64))
                .collect(),
        )
    }

    /// Evaluate at a rational-function argument.
    pub fn eval_rf(&self, x: &RatFunc) -> RatFunc {
        let mut acc = RatFunc::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * x) + c;
        }
        acc
    }

    /// Evaluate the coefficients at a rational point, producing a scalar
    /// polynomial in `y`. `None` at a pole of any coefficient.
    pub fn eval_coeffs(&self, x: &BigRational) -> Option<Poly> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            out.push(c.eval(x)?);
        }
        Some(Poly::new(out))
    }

    pub fn display_compact(&self) -> String {
        format!("{:?}", self)
    }
}

/// Characteristic polynomial `det(y I - m)` by Faddeev-LeVerrier.
pub fn charpoly(m: &CellMat) -> YPoly {
    let n = m.rows();
    let mut coeffs = vec![RatFunc::zero(); n + 1];
    coeffs[n] = RatFunc::one();
    let mut work = m.clone();
    let mut c = -&work.trace();
    coeffs[n - 1] = c.clone();
    for k in 2..=n {
        let mut shifted = work.clone();
        for i in 0..n {
            shifted.set(i, i, &(shifted.at(i, i).clone()) + &c);
        }
        work = m.mul(&shifted);
        c = -&(&work.trace() * &RatFunc::constant(Gq::from_ratio(1, k as i64)));
        coeffs[n - k] = c.clone();
    }
    YPoly::new(coeffs)
}

/// Yun square-free decomposition: returns `(factor, multiplicity)` with the
/// factors monic in `y`, square-free and pairwise coprime.
pub fn square_free_decomposition(f: &YPoly) -> Vec<(YPoly, usize)> {
    let f = f.monic();
    if f.deg() == 0 {
        return vec![];
    }
    let df = f.derivative();
    let g0 = f.gcd(&df);
    let mut w = f.div_rem(&g0).0;
    let mut y = df.div_rem(&g0).0;
    let mut out = Vec::new();
    let mut i = 1;
    loop {
        let z = y.sub(&w.derivative());
        if z.is_zero() {
            if w.deg() > 0 {
                out.push((w.monic(), i));
            }
            break;
        }
        let g = w.gcd(&z);
        if g.deg() > 0 {
            out.push((g.monic(), i));
        }
        w = w.div_rem(&g).0;
        y = z.div_rem(&g).0;
        if w.deg() == 0 {
            break;
        }
        i += 1;
    }
    out
}

/// Truncated power-series helpers over the Gaussian rationals.
#[derive(Clone, Debug)]
struct Series {
    c: Vec<Gq>, // length = precision
}

impl Series {
    fn constant(v: Gq, prec: usize) -> Self {
        let mut c = vec![Gq::zero(); prec];
        c[0] = v;
        Series { c }
    }

    fn add(&self, o: &Series) -> Series {
        Series {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }

    fn sub(&self, o: &Series) -> Series {
        Series {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
        }
    }

    fn mul(&self, o: &Series) -> Series {
        let prec = self.c.len();
        let mut out = vec![Gq::zero(); prec];
        for i in 0..prec {
            if self.c[i].is_zero() {
                continue;
            }
            for j in 0..prec - i {
                if o.c[j].is_zero() {
                    continue;
                }
                let t = &self.c[i] * &o.c[j];
                out[i + j] += &t;
            }
        }
        Series { c: out }
    }

    /// Multiplicative inverse; requires a unit constant term.
    fn inv(&self) -> Option<Series> {
        let prec = self.c.len();
        let a0_inv = self.c[0].inv()?;
        let mut out = vec![Gq::zero(); prec];
        out[0] = a0_inv.clone();
        for k in 1..prec {
            let mut acc = Gq::zero();
            for j in 1..=k {
                if self.c[j].is_zero() || out[k - j].is_zero() {
                    continue;
                }
                acc += &(&self.c[j] * &out[k - j]);
            }
            out[k] = -&(&acc * &a0_inv);
        }
        Some(Series { c: out })
    }
}

/// Taylor series of a rational function at a rational point (must be finite
/// there).
fn taylor(f: &RatFunc, at: &BigRational, prec: usize) -> Option<Series> {
    if f.is_zero() {
        return Some(Series {
            c: vec![Gq::zero(); prec],
        });
    }
    let (ord, cs) = f.series_at(at, prec);
    if ord < 0 {
        return None;
    }
    let mut c = vec![Gq::zero(); prec];
    for (k, v) in cs.into_iter().enumerate() {
        let idx = k + ord as usize;
        if idx < prec {
            c[idx] = v;
        }
    }
    Some(Series { c })
}

fn eval_series_poly(coeffs: &[Series], x: &Series) -> Series {
    let prec = x.c.len();
    let mut acc = Series::constant(Gq::zero(), prec);
    for c in coeffs.iter().rev() {
        acc = acc.mul(x).add(c);
    }
    acc
}

/// One eigenvalue function extracted from a square-free factor.
fn lift_root(g: &YPoly, base: &BigRational, start: &Gq, deg_bound: usize) -> Option<RatFunc> {
    let prec = deg_bound + 3;
    let coeffs: Vec<Series> = g
        .coeffs
        .iter()
        .map(|c| taylor(c, base, prec))
        .collect::<Option<Vec<_>>>()?;
    let dcoeffs: Vec<Series> = g
        .derivative()
        .coeffs
        .iter()
        .map(|c| taylor(c, base, prec))
        .collect::<Option<Vec<_>>>()?;
    let mut e = Series::constant(start.clone(), prec);
    // Newton iteration converges quadratically in the t-adic metric
    let mut steps = 0usize;
    loop {
        let val = eval_series_poly(&coeffs, &e);
        if val.c.iter().all(Gq::is_zero) {
            break;
        }
        let dval = eval_series_poly(&dcoeffs, &e);
        let corr = val.mul(&dval.inv()?);
        e = e.sub(&corr);
        steps += 1;
        if steps > prec + 2 {
            return None;
        }
    }
    // reconstruct the polynomial eigenvalue: terms beyond the bound must die
    if e.c[deg_bound + 1..].iter().any(|c| !c.is_zero()) {
        return None;
    }
    // unshift: eta(lambda) = sum e_k (lambda - base)^k
    let lin = Poly::linear_root(&Gq::from_rational(base.clone()));
    let mut eta = Poly::zero();
    let mut pw = Poly::one();
    for k in 0..=deg_bound {
        if !e.c[k].is_zero() {
            eta = &eta + &pw.scale(&e.c[k]);
        }
        if k < deg_bound {
            pw = &pw * &lin;
        }
    }
    let cand = RatFunc::from_poly(eta);
    // exact gate
    if g.eval_rf(&cand).is_zero() {
        Some(cand)
    } else {
        None
    }
}

/// Numeric roots of a scalar polynomial via the companion matrix.
pub fn numeric_roots(p: &Poly) -> Vec<Complex64> {
    let d = match p.degree() {
        None | Some(0) => return vec![],
        Some(d) => d,
    };
    let lead_inv = p.leading().unwrap().inv().unwrap();
    let mut comp = DMatrix::<Complex64>::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..d {
        let c = (&p.coeff(i) * &lead_inv).to_c64();
        comp[(i, d - 1)] = -c;
    }
    let (_q, t) = comp.schur().unpack();
    (0..d).map(|i| t[(i, i)]).collect()
}

/// Eigenvalue functions of a cell matrix over the field, with multiplicity,
/// sorted deterministically (constants first, then lexicographic).
///
/// Denominators are cleared first: eigenvalues of `D * A` (for `D` the
/// least common denominator of the entries) are integral over the
/// polynomial ring, so the lifting stage only ever reconstructs
/// polynomials; dividing back by `D` restores the rational eigenvalues.
pub fn eigenvalue_functions(
    a: &CellMat,
    lo: &BigRational,
    hi: &BigRational,
    cell_index: usize,
) -> Result<Vec<(RatFunc, usize)>, EngineError> {
    let n = a.rows();
    let mut den = Poly::one();
    for e in a.entries() {
        if e.is_zero() {
            continue;
        }
        let g = den.gcd(e.den());
        den = &den * &e.den().exact_div(&g).unwrap();
    }
    let scale = RatFunc::from_poly(den.clone());
    let cleared = if den.is_one() { a.clone() } else { a.scale(&scale) };
    let chi = charpoly(&cleared);
    let mut out: Vec<(RatFunc, usize)> = Vec::new();
    for (g, mult) in square_free_decomposition(&chi) {
        let roots =
            roots_of_square_free(&g, lo, hi).map_err(|factor| EngineError::SpectrumNotSplit {
                cell: cell_index,
                factor,
            })?;
        for r in roots {
            out.push((&r / &scale, mult));
        }
    }
    let total: usize = out.iter().map(|(_, m)| m).sum();
    if total != n {
        return Err(EngineError::SpectrumNotSplit {
            cell: cell_index,
            factor: "defective splitting".into(),
        });
    }
    out.sort_by(|a, b| eig_cmp(&a.0, &b.0));
    Ok(out)
}

/// All roots of a square-free `g` in the field; `Err(factor)` with a display
/// of the stubborn factor when it does not fully split.
fn roots_of_square_free(
    g: &YPoly,
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Vec<RatFunc>, String> {
    let mut g = g.monic();
    let mut roots = Vec::new();
    // linear factors read off directly
    while g.deg() == 1 {
        let root = -&(&g.coeff(0) / &g.coeff(1));
        roots.push(root.clone());
        g = YPoly::one();
        break;
    }
    if g.deg() == 0 {
        return Ok(roots);
    }
    // degree bound for polynomial roots of the monic factor
    let deg_bound = g
        .coeffs
        .iter()
        .map(|c| c.num().deg() + c.den().deg())
        .max()
        .unwrap_or(0);
    // base points: deterministic sweep through the open cell
    let denoms: [i64; 6] = [3, 5, 7, 11, 13, 17];
    'outer: while g.deg() >= 1 {
        if g.deg() == 1 {
            let root = -&(&g.coeff(0) / &g.coeff(1));
            roots.push(root);
            break;
        }
        for d in denoms {
            for k in 1..d {
                let base = lo + (hi - lo) * BigRational::new(k.into(), d.into());
                let Some(ghat) = g.eval_coeffs(&base) else {
                    continue;
                };
                if ghat.degree() != g.degree() {
                    continue;
                }
                // distinct numeric roots required for a clean lift
                let nroots = numeric_roots(&ghat);
                let mut found = None;
                for z in &nroots {
                    for max_den in [1_000u64, 1_000_000, 1_000_000_000, 1_000_000_000_000] {
                        let Some(cand) = rationalize_complex(*z, max_den) else {
                            continue;
                        };
                        if !ghat.eval_gq(&cand).is_zero() {
                            continue;
                        }
                        if let Some(root) = lift_root(&g, &base, &cand, deg_bound) {
                            found = Some(root);
                            break;
                        }
                    }
                    if found.is_some() {
                        break;
                    }
                }
                if let Some(root) = found {
                    // deflate and continue
                    let lin = YPoly::new(vec![-&root, RatFunc::one()]);
                    let (q, r) = g.div_rem(&lin);
                    if !r.is_zero() {
                        return Err(g.display_compact());
                    }
                    roots.push(root);
                    g = q.monic();
                    continue 'outer;
                }
            }
        }
        return Err(g.display_compact());
    }
    Ok(roots)
}

/// Deterministic ordering of eigenvalue functions: constants first, then by
/// numerator/denominator degree, then coefficient-lexicographic.
pub fn eig_cmp(a: &RatFunc, b: &RatFunc) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let ka = (!a.is_constant()) as u8;
    let kb = (!b.is_constant()) as u8;
    ka.cmp(&kb)
        .then_with(|| a.num().deg().cmp(&b.num().deg()))
        .then_with(|| a.den().deg().cmp(&b.den().deg()))
        .then_with(|| {
            for k in 0..=a.num().deg().max(b.num().deg()) {
                let ca = a.num().coeff(k);
                let cb = b.num().coeff(k);
                let o = ca.re.cmp(&cb.re).then(ca.im.cmp(&cb.im));
                if o != Ordering::Equal {
                    return o;
                }
            }
            for k in 0..=a.den().deg().max(b.den().deg()) {
                let ca = a.den().coeff(k);
                let cb = b.den().coeff(k);
                let o = ca.re.cmp(&cb.re).then(ca.im.cmp(&cb.im));
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
}
