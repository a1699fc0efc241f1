//! Exact linear algebra over the rational-function field, per cell.
//!
//! `CellMat` is an n-by-m matrix of rational functions living on a single
//! cell. Everything here is exact: Gaussian elimination with fraction
//! arithmetic, polynomial kernels, unimodular completions, and the
//! pole-correction search used by the splitting machinery.

use crate::poly::Poly;
use crate::ratfunc::RatFunc;
use crate::rational::Gq;
use crate::realroots::RootLoc;
use num_rational::BigRational;

#[derive(Clone, PartialEq)]
pub struct CellMat {
    rows: usize,
    cols: usize,
    data: Vec<RatFunc>,
}

impl std::fmt::Debug for CellMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CellMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:?}  ", self.at(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CellMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CellMat {
            rows,
            cols,
            data: vec![RatFunc::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CellMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, RatFunc::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> RatFunc) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CellMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &RatFunc {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: RatFunc) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(RatFunc::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    if i == j {
                        self.at(i, j).is_one()
                    } else {
                        self.at(i, j).is_zero()
                    }
                })
            })
    }

    pub fn add(&self, other: &CellMat) -> CellMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CellMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CellMat) -> CellMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CellMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn neg(&self) -> CellMat {
        CellMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| -a).collect(),
        }
    }

    pub fn scale(&self, c: &RatFunc) -> CellMat {
        CellMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn mul(&self, other: &CellMat) -> CellMat {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = CellMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let t = a * b;
                    let cur = &(out.at(i, j).clone()) + &t;
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> CellMat {
        CellMat::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn trace(&self) -> RatFunc {
        assert_eq!(self.rows, self.cols);
        let mut t = RatFunc::zero();
        for i in 0..self.rows {
            t = &t + self.at(i, i);
        }
        t
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CellMat {
        CellMat::from_fn(rows, cols, |i, j| self.at(r0 + i, c0 + j).clone())
    }

    pub fn paste(&mut self, r0: usize, c0: usize, block: &CellMat) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(r0 + i, c0 + j, block.at(i, j).clone());
            }
        }
    }

    pub fn direct_sum(&self, other: &CellMat) -> CellMat {
        let mut out = CellMat::zeros(self.rows + other.rows, self.cols + other.cols);
        out.paste(0, 0, self);
        out.paste(self.rows, self.cols, other);
        out
    }

    /// Embed an (r x r) block into the identity at diagonal offset `at`.
    pub fn embed_block(n: usize, at: usize, block: &CellMat) -> CellMat {
        let mut out = CellMat::identity(n);
        out.paste(at, at, block);
        out
    }

    /// Permutation matrix P with `P e_j = e_{perm[j]}`.
    pub fn permutation(perm: &[usize]) -> CellMat {
        let n = perm.len();
        let mut out = CellMat::zeros(n, n);
        for (j, &i) in perm.iter().enumerate() {
            out.set(i, j, RatFunc::one());
        }
        out
    }

    /// Gaussian-elimination determinant.
    pub fn det(&self) -> RatFunc {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut det = RatFunc::one();
        for col in 0..n {
            let pivot = (col..n)
                .filter(|&r| !m.at(r, col).is_zero())
                .min_by_key(|&r| complexity(m.at(r, col)));
            let Some(p) = pivot else {
                return RatFunc::zero();
            };
            if p != col {
                m.swap_rows(p, col);
                det = &det * &RatFunc::from_int(-1);
            }
            let pv = m.at(col, col).clone();
            det = &det * &pv;
            let pv_inv = pv.inv().unwrap();
            for r in (col + 1)..n {
                if m.at(r, col).is_zero() {
                    continue;
                }
                let factor = m.at(r, col) * &pv_inv;
                for c in col..n {
                    let v = m.at(col, c) * &factor;
                    m.set(r, c, &(m.at(r, c).clone()) - &v);
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Exact inverse over the field; `None` if singular.
    pub fn inverse(&self) -> Option<CellMat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut inv = CellMat::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .filter(|&r| !m.at(r, col).is_zero())
                .min_by_key(|&r| complexity(m.at(r, col)))?;
            m.swap_rows(pivot, col);
            inv.swap_rows(pivot, col);
            let pv_inv = m.at(col, col).inv().unwrap();
            for c in 0..n {
                m.set(col, c, &(m.at(col, c).clone()) * &pv_inv);
                inv.set(col, c, &(inv.at(col, c).clone()) * &pv_inv);
            }
            for r in 0..n {
                if r == col || m.at(r, col).is_zero() {
                    continue;
                }
                let factor = m.at(r, col).clone();
                for c in 0..n {
                    let vm = m.at(col, c) * &factor;
                    m.set(r, c, &(m.at(r, c).clone()) - &vm);
                    let vi = inv.at(col, c) * &factor;
                    inv.set(r, c, &(inv.at(r, c).clone()) - &vi);
                }
            }
        }
        Some(inv)
    }

    /// Reduced row echelon form; returns (rref, pivot column per pivot row).
    pub fn rref(&self) -> (CellMat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row >= m.rows {
                break;
            }
            let pivot = (row..m.rows)
                .filter(|&r| !m.at(r, col).is_zero())
                .min_by_key(|&r| complexity(m.at(r, col)));
            let Some(p) = pivot else { continue };
            m.swap_rows(p, row);
            let pv_inv = m.at(row, col).inv().unwrap();
            for c in col..m.cols {
                m.set(row, c, &(m.at(row, c).clone()) * &pv_inv);
            }
            for r in 0..m.rows {
                if r == row || m.at(r, col).is_zero() {
                    continue;
                }
                let factor = m.at(r, col).clone();
                for c in col..m.cols {
                    let v = m.at(row, c) * &factor;
                    m.set(r, c, &(m.at(r, c).clone()) - &v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel.
    pub fn nullspace(&self) -> Vec<Vec<RatFunc>> {
        let (r, pivots) = self.rref();
        let mut basis = Vec::new();
        let pivot_set: std::collections::HashSet<usize> = pivots.iter().copied().collect();
        for free in 0..self.cols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut v = vec![RatFunc::zero(); self.cols];
            v[free] = RatFunc::one();
            for (prow, &pcol) in pivots.iter().enumerate() {
                v[pcol] = -r.at(prow, free);
            }
            basis.push(v);
        }
        basis
    }

    /// One solution of `self * x = b`, or `None` if inconsistent.
    pub fn solve(&self, b: &[RatFunc]) -> Option<Vec<RatFunc>> {
        assert_eq!(b.len(), self.rows);
        let aug0 = CellMat::from_fn(self.rows, self.cols + 1, |i, j| {
            if j < self.cols {
                self.at(i, j).clone()
            } else {
                b[i].clone()
            }
        });
        let (aug, pivots) = aug0.rref();
        if pivots.last().copied() == Some(self.cols) {
            return None;
        }
        let mut x = vec![RatFunc::zero(); self.cols];
        for (prow, &pcol) in pivots.iter().enumerate() {
            x[pcol] = aug.at(prow, self.cols).clone();
        }
        Some(x)
    }

    pub fn apply(&self, v: &[RatFunc]) -> Vec<RatFunc> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = RatFunc::zero();
                for j in 0..self.cols {
                    if self.at(i, j).is_zero() || v[j].is_zero() {
                        continue;
                    }
                    acc = &acc + &(self.at(i, j) * &v[j]);
                }
                acc
            })
            .collect()
    }

    pub fn is_bounded_on(&self, lo: &BigRational, hi: &BigRational) -> bool {
        self.data.iter().all(|f| f.is_bounded_on(lo, hi))
    }

    pub fn is_polynomial(&self) -> bool {
        self.data.iter().all(RatFunc::is_polynomial)
    }

    pub fn entries(&self) -> &[RatFunc] {
        &self.data
    }
}

/// Structural size of a rational function, used for pivot selection.
fn complexity(f: &RatFunc) -> usize {
    f.num().deg() + f.den().deg()
}

/// Content (monic gcd) of a set of polynomials.
pub fn poly_content(polys: &[Poly]) -> Poly {
    let mut g = Poly::zero();
    for p in polys {
        if p.is_zero() {
            continue;
        }
        g = if g.is_zero() { p.monic() } else { g.gcd(p) };
        if g.is_one() {
            break;
        }
    }
    if g.is_zero() {
        Poly::one()
    } else {
        g
    }
}

/// Clear denominators and divide out the content: the primitive polynomial
/// vector spanning the same line, first nonzero entry monic.
pub fn primitive_vector(v: &[RatFunc]) -> Vec<Poly> {
    let mut den = Poly::one();
    for f in v {
        if f.is_zero() {
            continue;
        }
        let g = den.gcd(f.den());
        den = &den * &f.den().exact_div(&g).unwrap();
    }
    let polys: Vec<Poly> = v
        .iter()
        .map(|f| {
            if f.is_zero() {
                Poly::zero()
            } else {
                let extra = den.exact_div(f.den()).unwrap();
                &f.num().clone() * &extra
            }
        })
        .collect();
    let content = poly_content(&polys);
    let polys: Vec<Poly> = polys
        .iter()
        .map(|p| p.exact_div(&content).unwrap_or_else(Poly::zero))
        .collect();
    if let Some(first) = polys.iter().find(|p| !p.is_zero()) {
        let scale = first.leading().unwrap().inv().unwrap();
        return polys.iter().map(|p| p.scale(&scale)).collect();
    }
    polys
}

/// Unimodular completion: for a primitive polynomial vector `v`, build
/// `(u, u_inv)` with polynomial entries, constant nonzero determinant, and
/// `u * v = e_1`.
pub fn unimodular_complete(v: &[Poly]) -> (CellMat, CellMat) {
    let n = v.len();
    let mut work: Vec<Poly> = v.to_vec();
    let mut u = CellMat::identity(n);
    let mut u_inv = CellMat::identity(n);

    fn row_op(
        n: usize,
        work: &mut [Poly],
        u: &mut CellMat,
        u_inv: &mut CellMat,
        i: usize,
        j: usize,
        q: &Poly,
    ) {
        work[i] = &work[i] - &(q * &work[j]);
        let qr = RatFunc::from_poly(q.clone());
        for c in 0..n {
            let t = u.at(j, c) * &qr;
            u.set(i, c, &(u.at(i, c).clone()) - &t);
        }
        for r in 0..n {
            let t = u_inv.at(r, i) * &qr;
            u_inv.set(r, j, &(u_inv.at(r, j).clone()) + &t);
        }
    }

    loop {
        let nonzero: Vec<usize> = (0..n).filter(|&i| !work[i].is_zero()).collect();
        assert!(!nonzero.is_empty(), "primitive vector cannot be zero");
        if nonzero.len() == 1 {
            let i = nonzero[0];
            if i != 0 {
                work.swap(0, i);
                u.swap_rows(0, i);
                for r in 0..n {
                    let a = u_inv.at(r, 0).clone();
                    let b = u_inv.at(r, i).clone();
                    u_inv.set(r, 0, b);
                    u_inv.set(r, i, a);
                }
            }
            let c = work[0].clone();
            debug_assert!(
                c.is_constant() && !c.is_zero(),
                "content of a primitive vector reduces to a nonzero constant"
            );
            let c0 = c.coeff(0);
            let c_inv = c0.inv().unwrap();
            for col in 0..n {
                u.set(
                    0,
                    col,
                    &(u.at(0, col).clone()) * &RatFunc::constant(c_inv.clone()),
                );
                u_inv.set(
                    col,
                    0,
                    &(u_inv.at(col, 0).clone()) * &RatFunc::constant(c0.clone()),
                );
            }
            return (u, u_inv);
        }
        let &jmin = nonzero.iter().min_by_key(|&&i| work[i].deg()).unwrap();
        let &imax = nonzero
            .iter()
            .filter(|&&i| i != jmin)
            .max_by_key(|&&i| work[i].deg())
            .unwrap();
        let (q, _r) = work[imax].div_rem(&work[jmin]);
        if q.is_zero() {
            let lc =
                &work[imax].leading().unwrap().clone() / &work[jmin].leading().unwrap().clone();
            let shift = work[imax].deg() - work[jmin].deg();
            let mut mono = vec![Gq::zero(); shift + 1];
            mono[shift] = lc;
            row_op(
                n,
                &mut work,
                &mut u,
                &mut u_inv,
                imax,
                jmin,
                &Poly::new(mono),
            );
        } else {
            row_op(n, &mut work, &mut u, &mut u_inv, imax, jmin, &q);
        }
    }
}

/// Rational real poles of a vector of functions inside a closed cell, split
/// into (rational points, irrational root locations).
pub fn rational_poles(
    v: &[RatFunc],
    lo: &BigRational,
    hi: &BigRational,
) -> (Vec<BigRational>, Vec<RootLoc>) {
    let mut rats = Vec::new();
    let mut irr = Vec::new();
    for f in v {
        for loc in f.real_poles_in(lo, hi) {
            match loc {
                RootLoc::Rational(p) => {
                    if !rats.contains(&p) {
                        rats.push(p);
                    }
                }
                other => irr.push(other),
            }
        }
    }
    rats.sort();
    (rats, irr)
}

/// Make the basis vectors polynomial (clearing all denominators) and
/// saturated at each given rational point: the evaluation fibers have full
/// column rank.
pub fn saturate_lattice(basis: &[Vec<RatFunc>], points: &[BigRational]) -> Vec<Vec<RatFunc>> {
    let mut lat: Vec<Vec<Poly>> = basis.iter().map(|v| primitive_vector(v)).collect();
    if lat.is_empty() {
        return vec![];
    }
    let m = lat[0].len();
    loop {
        let mut changed = false;
        for p in points {
            loop {
                let k = lat.len();
                let fiber = CellMat::from_fn(m, k, |i, j| RatFunc::constant(lat[j][i].eval(p)));
                let null = fiber.nullspace();
                if null.is_empty() {
                    break;
                }
                let combo = &null[0];
                let mut new_vec = vec![Poly::zero(); m];
                for (j, c) in combo.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let cc = c.as_constant().expect("constant fiber kernel");
                    for (i, nv) in new_vec.iter_mut().enumerate() {
                        *nv = &*nv + &lat[j][i].scale(&cc);
                    }
                }
                let lin = Poly::linear_root(&Gq::from_rational(p.clone()));
                let divided: Vec<Poly> = new_vec
                    .iter()
                    .map(|q| q.exact_div(&lin).expect("fiber kernel divides"))
                    .collect();
                let last = combo
                    .iter()
                    .rposition(|c| !c.is_zero())
                    .expect("nonzero kernel vector");
                lat[last] = primitive_vector(
                    &divided
                        .iter()
                        .map(|q| RatFunc::from_poly(q.clone()))
                        .collect::<Vec<_>>(),
                );
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    lat.into_iter()
        .map(|v| v.into_iter().map(RatFunc::from_poly).collect())
        .collect()
}

/// Search the affine space `z0 + span(homog)` for a representative with no
/// poles at rational points of the closed cell. Complete at rational points;
/// the caller must still verify full boundedness (irrational poles).
pub fn make_pole_free(
    z0: &[RatFunc],
    homog: &[Vec<RatFunc>],
    lo: &BigRational,
    hi: &BigRational,
) -> Option<Vec<RatFunc>> {
    let (bad, _irr) = rational_poles(z0, lo, hi);
    if bad.is_empty() {
        return Some(z0.to_vec());
    }
    if homog.is_empty() {
        return None;
    }
    let sat = saturate_lattice(homog, &bad);
    let m = z0.len();
    let mut z = z0.to_vec();
    for p in &bad {
        loop {
            let ord = z.iter().map(|f| f.pole_order_at(p)).max().unwrap_or(0);
            if ord == 0 {
                break;
            }
            let tail: Vec<Gq> = z
                .iter()
                .map(|f| {
                    if f.is_zero() {
                        return Gq::zero();
                    }
                    let (o, cs) = f.series_at(p, 1);
                    if o == -(ord as i64) {
                        cs[0].clone()
                    } else {
                        Gq::zero()
                    }
                })
                .collect();
            let k = sat.len();
            let fiber = CellMat::from_fn(m, k, |i, j| {
                RatFunc::constant(sat[j][i].eval(p).unwrap_or_else(Gq::zero))
            });
            let rhs: Vec<RatFunc> = tail.iter().map(|c| RatFunc::constant(c.clone())).collect();
            let x = fiber.solve(&rhs)?;
            let lin = RatFunc::new(
                Poly::one(),
                Poly::linear_root(&Gq::from_rational(p.clone())),
            );
            let mut shift = RatFunc::one();
            for _ in 0..ord {
                shift = &shift * &lin;
            }
            for i in 0..m {
                let mut corr = RatFunc::zero();
                for (j, xj) in x.iter().enumerate() {
                    if xj.is_zero() {
                        continue;
                    }
                    corr = &corr + &(xj * &sat[j][i]);
                }
                z[i] = &z[i] - &(&corr * &shift);
            }
        }
    }
    Some(z)
}
