//! The relative commutant: exact solving, splitting idempotents and shears,
//! diagonalization of idempotents inside the commutant, and conjugation of
//! maximal abelian idempotent sets.

use crate::certificate::SimilarityCertificate;
use crate::error::EngineError;
use crate::linalg::{self, CellMat};
use crate::opmatrix::OpMatrix;
use crate::partition::Partition;
use crate::ratfunc::RatFunc;
use crate::rational::Gq;
use crate::realroots::RootLoc;
use crate::structure::{FrameObstruction, WitnessPoint};
use num_rational::BigRational;

/// Exact basis of `{A}'` per cell, with the structural summaries the block
/// block-structure analysis predicts.
#[derive(Clone, Debug)]
pub struct CommutantModule {
    pub partition: Partition,
    /// Per cell: basis matrices of the solution space of `AB = BA`.
    pub basis: Vec<Vec<CellMat>>,
    /// Per cell: which (i, j) entries are forced to zero across the basis.
    pub zero_pattern: Vec<Vec<Vec<bool>>>,
    /// Per cell, per basis element: entrywise pole-free on the closed cell.
    pub bounded: Vec<Vec<bool>>,
}

impl CommutantModule {
    pub fn dim(&self, cell: usize) -> usize {
        self.basis[cell].len()
    }
}

/// Vectorize the Sylvester operator `M -> A1 M - M A2` acting on p x q
/// matrices (rows of the operand indexed by A1, columns by A2).
fn sylvester_matrix(a1: &CellMat, a2: &CellMat) -> CellMat {
    let p = a1.rows();
    let q = a2.rows();
    let dim = p * q;
    let mut s = CellMat::zeros(dim, dim);
    // row index (i, j) of vec(M) is i*q + j
    for i in 0..p {
        for j in 0..q {
            let row = i * q + j;
            for k in 0..p {
                // A1[i,k] * M[k,j]
                let v = a1.at(i, k);
                if !v.is_zero() {
                    let col = k * q + j;
                    s.set(row, col, &(s.at(row, col).clone()) + v);
                }
            }
            for k in 0..q {
                // - M[i,k] * A2[k,j]
                let v = a2.at(k, j);
                if !v.is_zero() {
                    let col = i * q + k;
                    s.set(row, col, &(s.at(row, col).clone()) - v);
                }
            }
        }
    }
    s
}

fn unvec(v: &[RatFunc], rows: usize, cols: usize) -> CellMat {
    CellMat::from_fn(rows, cols, |i, j| v[i * cols + j].clone())
}

fn vec_of(m: &CellMat) -> Vec<RatFunc> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out.push(m.at(i, j).clone());
        }
    }
    out
}

/// Unique solution of `A1 Z - Z A2 = C` when the spectra are disjoint a.e.;
/// `None` when the operator is singular.
pub fn sylvester_unique(a1: &CellMat, a2: &CellMat, c: &CellMat) -> Option<CellMat> {
    let s = sylvester_matrix(a1, a2);
    if !s.nullspace().is_empty() {
        return None;
    }
    let sol = s.solve(&vec_of(c))?;
    Some(unvec(&sol, a1.rows(), a2.rows()))
}

/// Affine solution set of `A1 Z - Z A2 = C`: a particular solution (if the
/// system is consistent) together with a basis of the homogeneous space.
pub fn sylvester_affine(
    a1: &CellMat,
    a2: &CellMat,
    c: &CellMat,
) -> (Option<CellMat>, Vec<CellMat>) {
    let s = sylvester_matrix(a1, a2);
    let homog = s
        .nullspace()
        .into_iter()
        .map(|v| unvec(&v, a1.rows(), a2.rows()))
        .collect();
    let part = s.solve(&vec_of(c)).map(|v| unvec(&v, a1.rows(), a2.rows()));
    (part, homog)
}

/// The intertwiner space `{Z : A1 Z = Z A2}` per cell.
pub fn intertwiner_basis(a1: &CellMat, a2: &CellMat) -> Vec<CellMat> {
    sylvester_matrix(a1, a2)
        .nullspace()
        .into_iter()
        .map(|v| unvec(&v, a1.rows(), a2.rows()))
        .collect()
}

/// Solve `{A}'` exactly on every cell.
pub fn solve_commutant(a: &OpMatrix) -> Result<CommutantModule, EngineError> {
    if !a.is_bounded_matrix() {
        return Err(EngineError::UnboundedInput);
    }
    let n = a.n();
    let mut basis = Vec::new();
    let mut zero_pattern = Vec::new();
    let mut bounded = Vec::new();
    for ci in 0..a.partition().cell_count() {
        let (lo, hi) = a.partition().cell(ci);
        let m = a.cell_matrix(ci);
        let cell_basis: Vec<CellMat> = intertwiner_basis(&m, &m);
        let mut zp = vec![vec![true; n]; n];
        let mut bd = Vec::with_capacity(cell_basis.len());
        for b in &cell_basis {
            for i in 0..n {
                for j in 0..n {
                    if !b.at(i, j).is_zero() {
                        zp[i][j] = false;
                    }
                }
            }
            bd.push(b.is_bounded_on(lo, hi));
        }
        basis.push(cell_basis);
        zero_pattern.push(zp);
        bounded.push(bd);
    }
    Ok(CommutantModule {
        partition: a.partition().clone(),
        basis,
        zero_pattern,
        bounded,
    })
}

/// Outcome of a splitting attempt: either the bounded idempotent or the
/// obstruction witness explaining why none exists on this cell structure.
#[derive(Clone, Debug)]
pub enum SplitOutcome {
    Idempotent(OpMatrix),
    Obstruction(FrameObstruction),
}

/// Pick the leftmost real pole of the offending entries and package the
/// obstruction. Quotients are reported verbatim from the forced solve.
pub fn obstruction_from_entries(
    entries: &[(RatFunc, String)],
    lo: &BigRational,
    hi: &BigRational,
) -> Option<FrameObstruction> {
    let mut best: Option<(WitnessPoint, BigRational, RatFunc, String)> = None;
    for (q, narrative) in entries {
        for loc in q.real_poles_in(lo, hi) {
            let (wp, key) = match &loc {
                RootLoc::Rational(p) => (WitnessPoint::Rational(p.clone()), p.clone()),
                RootLoc::Interval(a, b) => (
                    WitnessPoint::Isolated {
                        lo: a.clone(),
                        hi: b.clone(),
                    },
                    a.clone(),
                ),
            };
            let better = match &best {
                None => true,
                Some((_, bk, _, _)) => key < *bk,
            };
            if better {
                best = Some((wp, key, q.clone(), narrative.clone()));
            }
        }
    }
    best.map(|(wp, _, q, narrative)| FrameObstruction {
        witness_point: wp,
        quotient: q,
        narrative,
    })
}

/// Build the splitting idempotent `P = [[I_r, R],[0, 0]]` for an upper
/// triangular operator whose first `r` diagonal entries agree and differ
/// a.e. from the rest, solving the coupling column-by-column by forward
/// substitution. Returns the obstruction when a solved entry has a pole.
pub fn build_splitting_idempotent(a: &OpMatrix, r: usize) -> Result<SplitOutcome, EngineError> {
    let n = a.n();
    if r == 0 || r >= n {
        return Err(EngineError::DimensionMismatch(r, n));
    }
    // preconditions: upper triangular; h_kk = h_11 for k <= r; h_kk != h_jj
    // a.e. for k <= r < j
    for ci in 0..a.partition().cell_count() {
        let m = a.cell_matrix(ci);
        for i in 0..n {
            for j in 0..i {
                if !m.at(i, j).is_zero() {
                    return Err(EngineError::Internal(
                        "operator is not upper triangular".into(),
                    ));
                }
            }
        }
        for k in 1..r {
            if m.at(k, k) != m.at(0, 0) {
                return Err(EngineError::DiagonalCollision(0, k));
            }
        }
        for k in 0..r {
            for j in r..n {
                if m.at(k, k) == m.at(j, j) {
                    return Err(EngineError::DiagonalCollision(k, j));
                }
            }
        }
    }

    let mut cells = Vec::new();
    let mut offending: Vec<(RatFunc, String)> = Vec::new();
    for ci in 0..a.partition().cell_count() {
        let (lo, hi) = a.partition().cell(ci);
        let h = a.cell_matrix(ci);
        let mut phi = CellMat::zeros(n, n); // only the (k<=r-1, j>=r) entries used
        for j in r..n {
            for k in (0..r).rev() {
                // h_kj + sum_{l=r..j-1} phi_kl h_lj - sum_{l=k+1..r-1} h_kl phi_lj
                let mut num = h.at(k, j).clone();
                for l in r..j {
                    if !phi.at(k, l).is_zero() && !h.at(l, j).is_zero() {
                        num = &num + &(phi.at(k, l) * h.at(l, j));
                    }
                }
                for l in (k + 1)..r {
                    if !h.at(k, l).is_zero() && !phi.at(l, j).is_zero() {
                        num = &num - &(h.at(k, l) * phi.at(l, j));
                    }
                }
                let den = &(h.at(k, k).clone()) - &(h.at(j, j).clone());
                let q = &num / &den;
                if !q.is_bounded_on(lo, hi) {
                    offending.push((
                        q.clone(),
                        format!(
                            "splitting entry ({}, {}) has a non-cancelling pole",
                            k + 1,
                            j + 1
                        ),
                    ));
                }
                phi.set(k, j, q);
            }
        }
        let mut p = CellMat::zeros(n, n);
        for i in 0..r {
            p.set(i, i, RatFunc::one());
        }
        for k in 0..r {
            for j in r..n {
                p.set(k, j, phi.at(k, j).clone());
            }
        }
        cells.push(p);
    }
    if !offending.is_empty() {
        let (lo, hi) = (a.partition().a().clone(), a.partition().b().clone());
        let ob = obstruction_from_entries(&offending, &lo, &hi)
            .ok_or_else(|| EngineError::Internal("offending entry lost its pole".into()))?;
        return Ok(SplitOutcome::Obstruction(ob));
    }
    let p = OpMatrix::from_cells(n, a.partition().clone(), cells);
    // exactness checks
    if !p.is_idempotent() {
        return Err(EngineError::Internal(
            "splitting candidate is not idempotent".into(),
        ));
    }
    if !a.commutes(&p)? {
        return Err(EngineError::Internal(
            "splitting candidate does not commute".into(),
        ));
    }
    Ok(SplitOutcome::Idempotent(p))
}

/// Shear split: `A` upper triangular with equal diagonals whose
/// `(r-1, r)` superdiagonal vanishes identically; returns a certificate `S`
/// with `S A S^{-1}` decoupling rows `1..r-1` from the rest.
pub fn split_block(a: &OpMatrix, r: usize) -> Result<SimilarityCertificate, EngineError> {
    let n = a.n();
    if r < 2 || r > n {
        return Err(EngineError::DimensionMismatch(r, n));
    }
    for ci in 0..a.partition().cell_count() {
        let m = a.cell_matrix(ci);
        for i in 0..n {
            for j in 0..i {
                if !m.at(i, j).is_zero() {
                    return Err(EngineError::Internal(
                        "operator is not upper triangular".into(),
                    ));
                }
            }
            if m.at(i, i) != m.at(0, 0) {
                return Err(EngineError::DiagonalCollision(0, i));
            }
        }
        if !m.at(r - 2, r - 1).is_zero() {
            return Err(EngineError::Internal(
                "superdiagonal at the split position does not vanish".into(),
            ));
        }
    }

    // Stage 1: kill column r-1 above, using the supported superdiagonals to
    // the left (forward substitution); poles mean the shear is unbounded.
    let mut stage1 = Vec::new();
    for ci in 0..a.partition().cell_count() {
        let (lo, hi) = a.partition().cell(ci);
        let m = a.cell_matrix(ci);
        let col = r - 1;
        // phi_{i, col} for i = 1..col-1 solved from rows col-2 down to 0;
        // phi entries are determined innermost-first.
        let mut phi = vec![RatFunc::zero(); r]; // phi[i] multiplies E_{i, col}
        for row in (0..col.saturating_sub(1)).rev() {
            // row equation for the conjugated (row, col) entry:
            //   m[row,col] = sum_{row<l<col} m[row,l] phi[l];
            // solve for phi[row+1] dividing by the supported superdiagonal
            let mut acc = m.at(row, col).clone();
            for l in (row + 2)..col {
                if !m.at(row, l).is_zero() && !phi[l].is_zero() {
                    acc = &acc - &(m.at(row, l) * &phi[l]);
                }
            }
            let sd = m.at(row, row + 1);
            if sd.is_zero() {
                return Err(EngineError::Internal(
                    "earlier superdiagonal vanishes; split index is not minimal".into(),
                ));
            }
            let q = &acc / sd;
            if !q.is_bounded_on(lo, hi) {
                return Err(EngineError::UnboundedShear);
            }
            phi[row + 1] = q;
        }
        let mut s = CellMat::identity(n);
        let mut s_inv = CellMat::identity(n);
        for (i, p) in phi.iter().enumerate() {
            if !p.is_zero() {
                s.set(i, col, p.clone());
                s_inv.set(i, col, -p);
            }
        }
        stage1.push((s, s_inv));
    }
    let s1 = OpMatrix::from_cells(
        n,
        a.partition().clone(),
        stage1.iter().map(|(s, _)| s.clone()).collect(),
    );
    let s1_inv = OpMatrix::from_cells(
        n,
        a.partition().clone(),
        stage1.iter().map(|(_, s)| s.clone()).collect(),
    );
    let cert1 = SimilarityCertificate::new(s1, s1_inv)?;
    let a1 = cert1.conjugate(a)?;

    // Stage 2: decouple {0..r-2} from {r-1..n-1} with a block shear solved
    // as a singular Sylvester system, corrected to be pole-free.
    let cut = r - 1;
    let mut stage2 = Vec::new();
    for ci in 0..a1.partition().cell_count() {
        let (lo, hi) = a1.partition().cell(ci);
        let m = a1.cell_matrix(ci);
        let b1 = m.submatrix(0, 0, cut, cut);
        let b2 = m.submatrix(cut, cut, n - cut, n - cut);
        let c = m.submatrix(0, cut, cut, n - cut);
        let (part, homog) = sylvester_affine(&b1, &b2, &c);
        let Some(z0) = part else {
            return Err(EngineError::UnboundedShear);
        };
        let z = linalg::make_pole_free(
            &vec_of(&z0),
            &homog.iter().map(vec_of).collect::<Vec<_>>(),
            lo,
            hi,
        )
        .ok_or(EngineError::UnboundedShear)?;
        let zm = unvec(&z, cut, n - cut);
        if !zm.is_bounded_on(lo, hi) {
            return Err(EngineError::UnboundedShear);
        }
        let mut s = CellMat::identity(n);
        let mut s_inv = CellMat::identity(n);
        for i in 0..cut {
            for j in 0..(n - cut) {
                let v = zm.at(i, j).clone();
                if !v.is_zero() {
                    s.set(i, cut + j, v.clone());
                    s_inv.set(i, cut + j, -&v);
                }
            }
        }
        stage2.push((s, s_inv));
    }
    let s2 = OpMatrix::from_cells(
        n,
        a1.partition().clone(),
        stage2.iter().map(|(s, _)| s.clone()).collect(),
    );
    let s2_inv = OpMatrix::from_cells(
        n,
        a1.partition().clone(),
        stage2.iter().map(|(_, s)| s.clone()).collect(),
    );
    let cert2 = SimilarityCertificate::new(s2, s2_inv)?;
    let total = cert1.then(&cert2)?;
    // verify the decoupling
    let out = total.conjugate(a)?;
    for i in 0..cut {
        for j in cut..n {
            if !out.entry(i, j).is_zero() || !out.entry(j, i).is_zero() {
                return Err(EngineError::Internal("split verification failed".into()));
            }
        }
    }
    if !total.bounded() {
        return Err(EngineError::UnboundedShear);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// diagonalization inside the commutant
// ---------------------------------------------------------------------------

/// Detect the block-diagonal layout of a canonical operator on one cell:
/// maximal consecutive diagonal blocks with no coupling outside them.
pub fn detect_blocks(m: &CellMat) -> Vec<(usize, usize)> {
    let n = m.rows();
    let mut boundaries = vec![0usize];
    for b in 1..n {
        let mut clean = true;
        'scan: for i in 0..b {
            for j in b..n {
                if !m.at(i, j).is_zero() || !m.at(j, i).is_zero() {
                    clean = false;
                    break 'scan;
                }
            }
        }
        if clean {
            boundaries.push(b);
        }
    }
    boundaries.push(n);
    boundaries.windows(2).map(|w| (w[0], w[1] - w[0])).collect()
}

/// Verify the canonical-block shape of a cell matrix (upper triangular,
/// equal diagonals, supported superdiagonals) and return the block layout.
fn canonical_layout(m: &CellMat) -> Result<Vec<(usize, usize)>, EngineError> {
    let blocks = detect_blocks(m);
    for &(off, size) in &blocks {
        let d = m.at(off, off);
        for i in 0..size {
            for j in 0..i {
                if !m.at(off + i, off + j).is_zero() {
                    return Err(EngineError::NoCanonicalForm);
                }
            }
            if m.at(off + i, off + i) != d {
                return Err(EngineError::NoCanonicalForm);
            }
            if i > 0 && m.at(off + i - 1, off + i).is_zero() {
                return Err(EngineError::NoCanonicalForm);
            }
        }
    }
    Ok(blocks)
}

/// Block-level truncation of `p` to the given (block-row, block-col) set;
/// every block of a commutant element intertwines on its own, so any such
/// truncation stays in the commutant of the block-diagonal operator.
fn truncate_blocks(
    p: &CellMat,
    offs: &[(usize, usize)],
    keep: impl Fn(usize, usize) -> bool,
) -> CellMat {
    let n = p.rows();
    let mut out = CellMat::zeros(n, n);
    for (bi, &(oi, si)) in offs.iter().enumerate() {
        for (bj, &(oj, sj)) in offs.iter().enumerate() {
            if !keep(bi, bj) {
                continue;
            }
            for i in 0..si {
                for j in 0..sj {
                    out.set(oi + i, oj + j, p.at(oi + i, oj + j).clone());
                }
            }
        }
    }
    out
}

/// Threshold cover for pivot selection among per-block scalar functions:
/// split `[lo, hi]` so that on each subcell one candidate stays at or above
/// `thr` in modulus throughout.
fn scalar_pivot_cover(
    candidates: &[(usize, RatFunc)],
    thr: &BigRational,
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Vec<(BigRational, BigRational, usize)>, EngineError> {
    use crate::realroots::{self, RootLoc};
    let thr2 = Gq::from_rational(thr * thr);
    let gs: Vec<(usize, crate::poly::RPoly)> = candidates
        .iter()
        .map(|(k, f)| {
            let g = &f.norm_sq() - &RatFunc::constant(thr2.clone());
            (*k, g.num().real_part())
        })
        .collect();
    let mut marks = vec![lo.clone(), hi.clone()];
    for (_, g) in &gs {
        if g.is_zero() {
            continue;
        }
        for root in realroots::isolate_roots(g, lo, hi) {
            match root {
                RootLoc::Rational(q) => marks.push(q),
                RootLoc::Interval(a, b) => {
                    marks.push(a);
                    marks.push(b);
                }
            }
        }
    }
    marks.retain(|m| m >= lo && m <= hi);
    marks.sort();
    marks.dedup();
    // fall back to any pivot with a zero-free norm on the closed subcell;
    // pole-freeness is the boundedness this field tracks
    let norm_polys: Vec<(usize, crate::poly::RPoly)> = candidates
        .iter()
        .map(|(k, f)| (*k, f.norm_sq().num().real_part()))
        .collect();
    let mut out = Vec::new();
    let mut stack: Vec<(BigRational, BigRational, usize)> = marks
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone(), 0usize))
        .collect();
    stack.reverse();
    while let Some((a, b, depth)) = stack.pop() {
        let found = gs
            .iter()
            .find(|(_, g)| !g.is_zero() && realroots::nonnegative_on_closed(g, &a, &b))
            .map(|(k, _)| *k)
            .or_else(|| {
                norm_polys
                    .iter()
                    .find(|(_, g)| !g.is_zero() && !realroots::has_root_in_closed(g, &a, &b))
                    .map(|(k, _)| *k)
            });
        match found {
            Some(k) => out.push((a, b, k)),
            None => {
                if depth >= 48 {
                    return Err(EngineError::IrrationalStructurePoint(format!(
                        "no pivot dominates on [{}, {}]",
                        a, b
                    )));
                }
                let mid = (&a + &b) / BigRational::from_integer(2.into());
                stack.push((mid.clone(), b, depth + 1));
                stack.push((a, mid, depth + 1));
            }
        }
    }
    Ok(out)
}

/// Grade (depth within its block) of every index.
fn depths(blocks: &[(usize, usize)]) -> Vec<usize> {
    let n = blocks.iter().map(|&(o, s)| o + s).max().unwrap_or(0);
    let mut d = vec![0usize; n];
    for &(off, size) in blocks {
        for i in 0..size {
            d[off + i] = i;
        }
    }
    d
}

/// Constant integer value of a scalar function, if any.
fn constant_integer(f: &RatFunc) -> Option<i64> {
    let c = f.as_constant()?;
    if !c.is_real() || !c.re.is_integer() {
        return None;
    }
    c.re.numer().try_into().ok()
}

/// Diagonalize an idempotent of the commutant of one same-diagonal family on
/// one cell, staying inside the commutant. `blocks` are the family's block
/// layouts (offsets relative to the family submatrix), sizes descending.
/// Returns per-subcell transforms `z` with `z a z^{-1} = a` and
/// `z p z^{-1} = sum of whole-block projections`.
fn dic_family_cell(
    a: &CellMat,
    p: &CellMat,
    blocks: &[(usize, usize)],
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Vec<(BigRational, BigRational, CellMat, CellMat)>, EngineError> {
    let n = a.rows();
    let depth = depths(blocks);
    // graded-upper shape and block-constant diagonals of p
    for i in 0..n {
        for j in 0..n {
            if depth[i] > depth[j] && !p.at(i, j).is_zero() {
                return Err(EngineError::NotInCommutant);
            }
        }
    }
    for &(off, size) in blocks {
        for i in 1..size {
            if p.at(off + i, off + i) != p.at(off, off) {
                return Err(EngineError::NotInCommutant);
            }
        }
    }

    // recursion over pivots with subcell refinement
    struct Branch {
        lo: BigRational,
        hi: BigRational,
        z: CellMat,
        z_inv: CellMat,
        q: CellMat,
        resolved: Vec<usize>,
    }
    let mut work = vec![Branch {
        lo: lo.clone(),
        hi: hi.clone(),
        z: CellMat::identity(n),
        z_inv: CellMat::identity(n),
        q: p.clone(),
        resolved: vec![],
    }];
    let mut done: Vec<Branch> = Vec::new();
    while let Some(br) = work.pop() {
        let unresolved: Vec<usize> = (0..blocks.len())
            .filter(|k| !br.resolved.contains(k))
            .collect();
        let r_rem: i64 = {
            let mut tr = RatFunc::zero();
            for &k in &unresolved {
                tr = &tr + br.q.at(blocks[k].0, blocks[k].0);
            }
            constant_integer(&tr).ok_or(EngineError::NotIdempotent)?
        };
        if r_rem < 0 || r_rem as usize > unresolved.len() {
            return Err(EngineError::NotIdempotent);
        }
        if r_rem == 0 {
            done.push(br);
            continue;
        }
        // pivot cover over the unresolved grade-1 diagonal entries
        let thr = BigRational::new(r_rem.into(), (unresolved.len() as i64).into());
        let candidates: Vec<(usize, RatFunc)> = unresolved
            .iter()
            .map(|&k| (k, br.q.at(blocks[k].0, blocks[k].0).clone()))
            .collect();
        for (sa, sb, k0) in scalar_pivot_cover(&candidates, &thr, &br.lo, &br.hi)? {
            let pivot = br.q.at(blocks[k0].0, blocks[k0].0).clone();
            let pivot_inv = pivot.inv().ok_or_else(|| {
                EngineError::Internal("vanishing pivot survived the cover".into())
            })?;
            // y = I - (1/pivot) * (blocks (k, k0) of q, k != k0)
            let l = truncate_blocks(&br.q, blocks, |bi, bj| bj == k0 && bi != k0).scale(&pivot_inv);
            let y = CellMat::identity(n).sub(&l);
            let y_inv = CellMat::identity(n).add(&l);
            let q1 = y.mul(&br.q).mul(&y_inv);
            // the pivot block's diagonal is now 1 at every grade and the
            // grade-diagonal column entries of the other blocks vanish
            let (o0, s0) = blocks[k0];
            for i in 0..s0 {
                if !q1.at(o0 + i, o0 + i).is_one() {
                    return Err(EngineError::Internal("pivot failed to normalize".into()));
                }
            }
            for (&(ok, sk), k) in blocks.iter().zip(0..) {
                if k == k0 {
                    continue;
                }
                for i in 0..sk.min(s0) {
                    if !q1.at(ok + i, o0 + i).is_zero() {
                        return Err(EngineError::Internal("pivot column not cleared".into()));
                    }
                }
            }
            let mut resolved = br.resolved.clone();
            resolved.push(k0);
            work.push(Branch {
                lo: sa,
                hi: sb,
                z: y.mul(&br.z),
                z_inv: br.z_inv.mul(&y_inv),
                q: q1,
                resolved,
            });
        }
    }

    // finalize every branch: within-grade shear, then the nilpotent strip
    let mut out = Vec::new();
    for br in done {
        let res = br.resolved.clone();
        let shear_part = truncate_blocks(&br.q, blocks, |bi, bj| {
            res.contains(&bi) && !res.contains(&bj)
        });
        let yf = CellMat::identity(n).add(&shear_part);
        let yf_inv = CellMat::identity(n).sub(&shear_part);
        let q2 = yf.mul(&br.q).mul(&yf_inv);
        // target projection: resolved whole blocks
        let mut r1 = CellMat::zeros(n, n);
        for &k in &res {
            let (off, size) = blocks[k];
            for i in 0..size {
                r1.set(off + i, off + i, RatFunc::one());
            }
        }
        // residue must be strictly graded-upper
        let resid = q2.sub(&r1);
        for i in 0..n {
            for j in 0..n {
                if depth[i] >= depth[j] && !resid.at(i, j).is_zero() {
                    return Err(EngineError::Internal(
                        "residue is not strictly graded-upper".into(),
                    ));
                }
            }
        }
        if resid.is_zero() && yf.is_identity() && br.z.is_identity() {
            // already a diagonal projection; nothing to do
            out.push((br.lo, br.hi, CellMat::identity(n), CellMat::identity(n)));
            continue;
        }
        // strip: t = I - 2 q2 + resid; t q2 t^{-1} = r1
        let t = CellMat::identity(n)
            .sub(&q2.scale(&RatFunc::from_int(2)))
            .add(&resid);
        let i2q = CellMat::identity(n).sub(&q2.scale(&RatFunc::from_int(2)));
        let w = i2q.mul(&resid);
        // (I + w)^{-1} by the finite Neumann series
        let mut t_inv_left = CellMat::identity(n);
        let mut pw = w.clone();
        let mut sign = -1i64;
        while !pw.is_zero() {
            t_inv_left = t_inv_left.add(&pw.scale(&RatFunc::from_int(sign)));
            pw = pw.mul(&w);
            sign = -sign;
        }
        let t_inv = t_inv_left.mul(&i2q);
        if !t.mul(&t_inv).is_identity() {
            return Err(EngineError::Internal("strip inverse failed".into()));
        }
        let q3 = t.mul(&q2).mul(&t_inv);
        if q3 != r1 {
            return Err(EngineError::Internal(
                "strip did not reach the projection".into(),
            ));
        }
        let z = t.mul(&yf).mul(&br.z);
        let z_inv = br.z_inv.mul(&yf_inv).mul(&t_inv);
        // the transform must fix the family operator exactly
        let za = z.mul(a).mul(&z_inv);
        if za != *a {
            return Err(EngineError::Internal("transform left the commutant".into()));
        }
        out.push((br.lo, br.hi, z, z_inv));
    }
    Ok(out)
}

/// Diagonalize a bounded idempotent of `{A}'` by an invertible element of
/// `{A}'`, for `A` in canonical block-diagonal form.
pub fn diagonalize_idempotent_in_commutant(
    a: &OpMatrix,
    p: &OpMatrix,
) -> Result<SimilarityCertificate, EngineError> {
    let (a, p) = a.align(p)?;
    if !p.is_idempotent() {
        return Err(EngineError::NotIdempotent);
    }
    if !p.is_bounded_matrix() {
        return Err(EngineError::UnboundedInput);
    }
    if !a.commutes(&p)? {
        return Err(EngineError::NotInCommutant);
    }
    let n = a.n();
    let mut pieces: Vec<(BigRational, BigRational, CellMat, CellMat)> = Vec::new();
    for ci in 0..a.partition().cell_count() {
        let (lo, hi) = a.partition().cell(ci);
        let am = a.cell_matrix(ci);
        let pm = p.cell_matrix(ci);
        let blocks = canonical_layout(&am)?;
        // group blocks into same-diagonal families (kept in layout order)
        let mut fams: Vec<(RatFunc, Vec<usize>)> = Vec::new();
        for (bi, &(off, _)) in blocks.iter().enumerate() {
            let d = am.at(off, off).clone();
            match fams.iter_mut().find(|(e, _)| *e == d) {
                Some((_, v)) => v.push(bi),
                None => fams.push((d, vec![bi])),
            }
        }
        // cross-family parts of p must vanish
        for (_, fa) in &fams {
            for (_, fb) in &fams {
                if fa[0] == fb[0] {
                    continue;
                }
                for &bi in fa {
                    for &bj in fb {
                        let (oi, si) = blocks[bi];
                        let (oj, sj) = blocks[bj];
                        for i in 0..si {
                            for j in 0..sj {
                                if !pm.at(oi + i, oj + j).is_zero() {
                                    return Err(EngineError::NotInCommutant);
                                }
                            }
                        }
                    }
                }
            }
        }
        // gather each family contiguously (stable permutation, sizes desc)
        let mut order: Vec<usize> = Vec::new();
        for (_, fam) in &fams {
            let mut f = fam.clone();
            f.sort_by(|&x, &y| blocks[y].1.cmp(&blocks[x].1).then(x.cmp(&y)));
            order.extend(f);
        }
        let mut perm = vec![0usize; n];
        let mut pos = 0usize;
        let mut fam_ranges: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        {
            let mut idx = 0usize;
            for (_, fam) in &fams {
                let start = pos;
                let mut local = Vec::new();
                let mut f = fam.clone();
                f.sort_by(|&x, &y| blocks[y].1.cmp(&blocks[x].1).then(x.cmp(&y)));
                for &bi in &f {
                    let (off, size) = blocks[bi];
                    local.push((pos - start, size));
                    for k in 0..size {
                        perm[off + k] = pos + k;
                    }
                    pos += size;
                }
                fam_ranges.push((start, local));
                idx += 1;
                let _ = idx;
            }
        }
        let sigma = CellMat::permutation(&perm);
        let sigma_inv = sigma.transpose();
        let ag = sigma.mul(&am).mul(&sigma_inv);
        let pg = sigma.mul(&pm).mul(&sigma_inv);

        // per family, with subcell merging
        let mut branches: Vec<(BigRational, BigRational, CellMat, CellMat)> = vec![(
            lo.clone(),
            hi.clone(),
            CellMat::identity(n),
            CellMat::identity(n),
        )];
        for (start, local) in &fam_ranges {
            let fsize: usize = local.iter().map(|&(_, s)| s).sum();
            let fa = ag.submatrix(*start, *start, fsize, fsize);
            let mut next = Vec::new();
            for (blo, bhi, z, z_inv) in &branches {
                let pf = z
                    .mul(&pg)
                    .mul(z_inv)
                    .submatrix(*start, *start, fsize, fsize);
                for (sa, sb, w, w_inv) in dic_family_cell(&fa, &pf, local, blo, bhi)? {
                    let wl = CellMat::embed_block(n, *start, &w);
                    let wl_inv = CellMat::embed_block(n, *start, &w_inv);
                    next.push((sa, sb, wl.mul(z), z_inv.mul(&wl_inv)));
                }
            }
            branches = next;
        }
        for (sa, sb, z, z_inv) in branches {
            pieces.push((
                sa,
                sb,
                sigma_inv.mul(&z).mul(&sigma),
                sigma_inv.mul(&z_inv).mul(&sigma),
            ));
        }
    }
    // assemble
    let mut marks: Vec<BigRational> = Vec::new();
    for (a0, b0, _, _) in &pieces {
        marks.push(a0.clone());
        marks.push(b0.clone());
    }
    marks.sort();
    marks.dedup();
    let partition = Partition::new(marks)?;
    let mut zs = vec![CellMat::identity(n); partition.cell_count()];
    let mut zinvs = vec![CellMat::identity(n); partition.cell_count()];
    for (a0, b0, z, z_inv) in pieces {
        for ci in 0..partition.cell_count() {
            let (clo, chi) = partition.cell(ci);
            if clo >= &a0 && chi <= &b0 {
                zs[ci] = z.clone();
                zinvs[ci] = z_inv.clone();
            }
        }
    }
    let z = OpMatrix::from_cells(n, partition.clone(), zs);
    let z_inv = OpMatrix::from_cells(n, partition, zinvs);
    let cert = SimilarityCertificate::new(z, z_inv)?;
    // final exactness gates
    let a_back = cert.conjugate(&a.refine(cert.x().partition()))?;
    if !a_back.eq_fn(&a) {
        return Err(EngineError::Internal(
            "certificate does not commute with A".into(),
        ));
    }
    let d = cert.conjugate(&p.refine(cert.x().partition()))?;
    for i in 0..n {
        for j in 0..n {
            if i != j && !d.entry(i, j).is_zero() {
                return Err(EngineError::Internal(
                    "conjugated idempotent is not diagonal".into(),
                ));
            }
        }
    }
    if !cert.bounded() {
        return Err(EngineError::Internal(
            "in-commutant certificate is unbounded".into(),
        ));
    }
    Ok(cert)
}

/// Conjugation failure report for maximal abelian sets.
#[derive(Debug)]
pub enum MasiError {
    NotMaximal { witness: Box<OpMatrix> },
    Engine(EngineError),
}

impl From<EngineError> for MasiError {
    fn from(e: EngineError) -> Self {
        MasiError::Engine(e)
    }
}

/// Diagonalize a whole frame inside the commutant by staging: each element
/// is diagonalized in turn; later transforms are the identity on the ranges
/// already fixed, so earlier diagonal images stay diagonal.
pub fn diagonalize_set_in_commutant(
    a: &OpMatrix,
    elements: &[OpMatrix],
) -> Result<SimilarityCertificate, EngineError> {
    let mut cert = SimilarityCertificate::identity(a.n(), a.partition());
    let mut current: Vec<OpMatrix> = elements.to_vec();
    for k in 0..current.len() {
        let z = diagonalize_idempotent_in_commutant(a, &current[k])?;
        for item in current.iter_mut() {
            *item = z.conjugate(item)?;
        }
        cert = cert.then(&z)?;
    }
    // every element must now be diagonal
    for e in &current {
        for i in 0..a.n() {
            for j in 0..a.n() {
                if i != j && !e.entry(i, j).is_zero() {
                    return Err(EngineError::Internal(
                        "staged diagonalization failed".into(),
                    ));
                }
            }
        }
    }
    Ok(cert)
}

/// Membership of an idempotent in the boolean algebra generated by the
/// given atoms and central projections: per cell it must be a union of
/// atoms.
fn in_atom_algebra(q: &OpMatrix, atoms: &[OpMatrix]) -> Result<bool, EngineError> {
    let mut part = q.partition().clone();
    for a in atoms {
        part = part.common_refinement(a.partition())?;
    }
    let qr = q.refine(&part);
    let n = q.n();
    for ci in 0..part.cell_count() {
        let qm = qr.cell_matrix(ci);
        let mut sum = CellMat::zeros(n, n);
        for a in atoms {
            let am = a.refine(&part).cell_matrix(ci);
            let prod = qm.mul(&am);
            if prod == am {
                sum = sum.add(&am);
            } else if !prod.is_zero() {
                return Ok(false);
            }
        }
        if sum != qm {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Conjugate one bounded maximal abelian set of idempotents onto another
/// inside `{A}'`, for canonical `A`. Both sets are given by generators; the
/// element `X` returned maps the algebra of `gen_p` onto that of `gen_q`.
pub fn conjugate_masi(
    a: &OpMatrix,
    gen_p: &[OpMatrix],
    gen_q: &[OpMatrix],
) -> Result<SimilarityCertificate, MasiError> {
    use crate::structure::{extract_frame, FrameError, FrameViolation};
    // the generated set (central cuts of generator combinations, no
    // complements) must already join to the identity; otherwise the
    // complement of the join commutes with everything and lies outside
    for gens in [gen_p, gen_q] {
        if gens.is_empty() {
            return Err(MasiError::Engine(EngineError::SumNotIdentity));
        }
        let n = a.n();
        let mut co_join = OpMatrix::identity(n, gens[0].partition());
        for g in gens {
            let (cj, gr) = co_join.align(g)?;
            let i = OpMatrix::identity(n, cj.partition());
            co_join = cj.matmul(&i.sub(&gr)?)?;
        }
        if !co_join.is_zero() {
            return Err(MasiError::NotMaximal {
                witness: Box::new(co_join),
            });
        }
    }
    let frame_p = match extract_frame(a, gen_p) {
        Ok(f) => f,
        Err(FrameError::Violation(FrameViolation::NotMinimal { witness, .. })) => {
            return Err(MasiError::NotMaximal { witness });
        }
        Err(FrameError::Violation(v)) => return Err(MasiError::Engine(v.as_engine_error())),
        Err(FrameError::Engine(e)) => return Err(MasiError::Engine(e)),
    };
    let frame_q = match extract_frame(a, gen_q) {
        Ok(f) => f,
        Err(FrameError::Violation(FrameViolation::NotMinimal { witness, .. })) => {
            return Err(MasiError::NotMaximal { witness });
        }
        Err(FrameError::Violation(v)) => return Err(MasiError::Engine(v.as_engine_error())),
        Err(FrameError::Engine(e)) => return Err(MasiError::Engine(e)),
    };
    let xp = diagonalize_set_in_commutant(a, &frame_p.elements)?;
    let xq = diagonalize_set_in_commutant(a, &frame_q.elements)?;
    let x = xp.then(&xq.invert())?;
    // soundness: x in {A}', generators map into the opposite algebras
    let ar = a.refine(x.x().partition());
    if !x.conjugate(&ar)?.eq_fn(&ar) {
        return Err(MasiError::Engine(EngineError::Internal(
            "masi conjugation left the commutant".into(),
        )));
    }
    if !x.bounded() {
        return Err(MasiError::Engine(EngineError::Internal(
            "masi conjugation is unbounded".into(),
        )));
    }
    for p in gen_p {
        let image = x.conjugate(p)?;
        if !in_atom_algebra(&image, &frame_q.elements)? {
            return Err(MasiError::Engine(EngineError::Internal(
                "generator image escapes the target algebra".into(),
            )));
        }
    }
    for q in gen_q {
        let image = x.invert().conjugate(q)?;
        if !in_atom_algebra(&image, &frame_p.elements)? {
            return Err(MasiError::Engine(EngineError::Internal(
                "inverse image escapes the source algebra".into(),
            )));
        }
    }
    Ok(x)
}

pub(crate) fn vec_of_pub(m: &CellMat) -> Vec<RatFunc> {
    vec_of(m)
}

pub(crate) fn unvec_pub(v: &[RatFunc], rows: usize, cols: usize) -> CellMat {
    unvec(v, rows, cols)
}

/// A bounded idempotent in the commutant of a triangular cell matrix whose
/// diagonal groups are given, with prescribed 0/1 diagonal pattern per
/// group: solved greedily block-by-block, unique when diagonals of distinct
/// groups differ a.e. Returns the assembled matrix (possibly unbounded; the
/// caller tests).
pub(crate) fn pattern_idempotent(
    b: &CellMat,
    group_sizes: &[usize],
    pattern: &[bool],
) -> Option<CellMat> {
    let g = group_sizes.len();
    let n = b.rows();
    let mut offs = vec![0usize; g + 1];
    for i in 0..g {
        offs[i + 1] = offs[i] + group_sizes[i];
    }
    let mut p = CellMat::zeros(n, n);
    for gi in 0..g {
        if pattern[gi] {
            for i in offs[gi]..offs[gi + 1] {
                p.set(i, i, RatFunc::one());
            }
        }
    }
    // solve off-diagonal blocks in order of increasing gap
    for gap in 1..g {
        for gi in 0..(g - gap) {
            let gj = gi + gap;
            let bi = b.submatrix(offs[gi], offs[gi], group_sizes[gi], group_sizes[gi]);
            let bj = b.submatrix(offs[gj], offs[gj], group_sizes[gj], group_sizes[gj]);
            // rhs = P_ii B_ij + sum_{i<k<j} (P_ik B_kj - B_ik P_kj) - B_ij P_jj
            let bij = b.submatrix(offs[gi], offs[gj], group_sizes[gi], group_sizes[gj]);
            let mut rhs = CellMat::zeros(group_sizes[gi], group_sizes[gj]);
            if pattern[gi] {
                rhs = rhs.add(&bij);
            }
            if pattern[gj] {
                rhs = rhs.sub(&bij);
            }
            for k in (gi + 1)..gj {
                let pik = p_sub(&p, &offs, gi, k, group_sizes);
                let bkj = b.submatrix(offs[k], offs[gj], group_sizes[k], group_sizes[gj]);
                rhs = rhs.add(&pik.mul(&bkj));
                let bik = b.submatrix(offs[gi], offs[k], group_sizes[gi], group_sizes[k]);
                let pkj = p_sub(&p, &offs, k, gj, group_sizes);
                rhs = rhs.sub(&bik.mul(&pkj));
            }
            let z = sylvester_unique(&bi, &bj, &rhs)?;
            for i in 0..group_sizes[gi] {
                for j in 0..group_sizes[gj] {
                    p.set(offs[gi] + i, offs[gj] + j, z.at(i, j).clone());
                }
            }
        }
    }
    Some(p)
}

fn p_sub(p: &CellMat, offs: &[usize], gi: usize, gj: usize, sizes: &[usize]) -> CellMat {
    p.submatrix(offs[gi], offs[gj], sizes[gi], sizes[gj])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piecewise::PiecewiseRational;
    use crate::rational::ratio;

    fn const_fn(c: i64) -> PiecewiseRational {
        PiecewiseRational::constant(ratio(0, 1), ratio(1, 1), Gq::from_int(c))
    }

    fn lam_fn() -> PiecewiseRational {
        PiecewiseRational::var(ratio(0, 1), ratio(1, 1))
    }

    #[test]
    fn commutant_of_jordan_cell() {
        // A = [[lam, 1],[0, lam]]: basis {I, E12}; upper triangular with
        // equal diagonals
        let a = OpMatrix::new(2, vec![lam_fn(), const_fn(1), const_fn(0), lam_fn()]).unwrap();
        let cm = solve_commutant(&a).unwrap();
        assert_eq!(cm.dim(0), 2);
        for b in &cm.basis[0] {
            assert!(b.at(1, 0).is_zero());
            assert_eq!(b.at(0, 0), b.at(1, 1));
        }
        assert!(cm.zero_pattern[0][1][0]);
    }

    #[test]
    fn commutant_of_distinct_diagonal() {
        // A = diag(lam, lam+1): off-diagonals forced zero
        let lp1 = lam_fn().add(&const_fn(1)).unwrap();
        let a = OpMatrix::diagonal(&[lam_fn(), lp1]).unwrap();
        let cm = solve_commutant(&a).unwrap();
        assert_eq!(cm.dim(0), 2);
        assert!(cm.zero_pattern[0][0][1]);
        assert!(cm.zero_pattern[0][1][0]);
    }

    #[test]
    fn splitting_idempotent_bounded_case() {
        // A = [[lam, 1],[0, lam+1]]: P = [[1, -1],[0, 0]]
        let lp1 = lam_fn().add(&const_fn(1)).unwrap();
        let a = OpMatrix::new(2, vec![lam_fn(), const_fn(1), const_fn(0), lp1]).unwrap();
        match build_splitting_idempotent(&a, 1).unwrap() {
            SplitOutcome::Idempotent(p) => {
                assert_eq!(p.entry(0, 1).eval(&ratio(1, 2)).unwrap(), Gq::from_int(-1));
                assert!(p.is_idempotent());
                assert!(a.commutes(&p).unwrap());
            }
            SplitOutcome::Obstruction(_) => panic!("expected a bounded idempotent"),
        }
    }

    #[test]
    fn splitting_idempotent_diagonal_case() {
        // A = diag(lam, lam+1): R = 0
        let lp1 = lam_fn().add(&const_fn(1)).unwrap();
        let a = OpMatrix::diagonal(&[lam_fn(), lp1]).unwrap();
        match build_splitting_idempotent(&a, 1).unwrap() {
            SplitOutcome::Idempotent(p) => {
                let d = OpMatrix::diagonal(&[const_fn(1), const_fn(0)]).unwrap();
                assert!(p.eq_fn(&d));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn splitting_idempotent_obstruction() {
        // A = [[lam, 1],[0, -2 lam]]: quotient 1/(3 lam), pole at 0
        let m2l = lam_fn().mul(&const_fn(-2)).unwrap();
        let a = OpMatrix::new(2, vec![lam_fn(), const_fn(1), const_fn(0), m2l]).unwrap();
        match build_splitting_idempotent(&a, 1).unwrap() {
            SplitOutcome::Obstruction(ob) => {
                assert_eq!(ob.witness_point, WitnessPoint::Rational(ratio(0, 1)));
                // quotient = 1/(3 lam)
                let expected = RatFunc::new(
                    crate::poly::Poly::one(),
                    crate::poly::Poly::new(vec![Gq::zero(), Gq::from_int(3)]),
                );
                assert_eq!(ob.quotient, expected);
            }
            _ => panic!("expected obstruction"),
        }
    }

    #[test]
    fn diagonal_collision_detected() {
        let a = OpMatrix::new(2, vec![lam_fn(), const_fn(1), const_fn(0), lam_fn()]).unwrap();
        assert!(matches!(
            build_splitting_idempotent(&a, 1),
            Err(EngineError::DiagonalCollision(..))
        ));
    }

    #[test]
    fn split_block_examples() {
        // A = [[lam,1,0],[0,lam,0],[0,0,lam]]: already split at r = 3
        let z = const_fn(0);
        let a = OpMatrix::new(
            3,
            vec![
                lam_fn(),
                const_fn(1),
                z.clone(),
                z.clone(),
                lam_fn(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
            ],
        )
        .unwrap();
        let cert = split_block(&a, 3).unwrap();
        assert!(cert.x().is_identity());

        // A = [[lam,1,1],[0,lam,0],[0,0,lam]] with f_23 = 0: phi_23 = -1
        let a2 = OpMatrix::new(
            3,
            vec![
                lam_fn(),
                const_fn(1),
                const_fn(1),
                z.clone(),
                lam_fn(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
            ],
        )
        .unwrap();
        let cert2 = split_block(&a2, 3).unwrap();
        let out = cert2.conjugate(&a2).unwrap();
        for i in 0..2 {
            assert!(out.entry(i, 2).is_zero());
            assert!(out.entry(2, i).is_zero());
        }
        // the inverse factor carries the solved shear entry -1
        assert_eq!(
            cert2.x_inv().entry(1, 2).eval(&ratio(1, 2)).unwrap(),
            Gq::from_int(-1)
        );
    }

    #[test]
    fn split_block_via_stage2() {
        // A = [[lam,0,1],[0,lam,1],[0,0,lam]] with f_12 = 0, r = 2: the
        // stage-2 Sylvester shear decouples row 0 from rows 1-2.
        let z = const_fn(0);
        let a = OpMatrix::new(
            3,
            vec![
                lam_fn(),
                z.clone(),
                const_fn(1),
                z.clone(),
                lam_fn(),
                const_fn(1),
                z.clone(),
                z.clone(),
                lam_fn(),
            ],
        )
        .unwrap();
        let cert = split_block(&a, 2).unwrap();
        let out = cert.conjugate(&a).unwrap();
        for j in 1..3 {
            assert!(out.entry(0, j).is_zero());
            assert!(out.entry(j, 0).is_zero());
        }
        // remaining 2x2 block is the Jordan cell
        assert!(out.entry(1, 2).is_one());
    }

    #[test]
    fn unbounded_shear_detected() {
        // A = [[lam, 0, 1],[0, lam, lam],[0,0,lam]] actually make a pole:
        // f_12 = lam (supported, vanishing at 0), f_23 = 0:
        // phi_{23} = -A_{13}/A_{12} = -1/lam: unbounded at 0.
        let z = const_fn(0);
        let a = OpMatrix::new(
            3,
            vec![
                lam_fn(),
                lam_fn(),
                const_fn(1),
                z.clone(),
                lam_fn(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
            ],
        )
        .unwrap();
        assert!(matches!(
            split_block(&a, 3),
            Err(EngineError::UnboundedShear)
        ));
    }
}

#[cfg(test)]
mod dic_tests {
    use super::*;
    use crate::piecewise::PiecewiseRational;
    use crate::rational::{ratio, Gq};

    fn const_fn(c: i64) -> PiecewiseRational {
        PiecewiseRational::constant(ratio(0, 1), ratio(1, 1), Gq::from_int(c))
    }

    fn lam_fn() -> PiecewiseRational {
        PiecewiseRational::var(ratio(0, 1), ratio(1, 1))
    }

    /// A1 (+) A2 with same diagonal f = lam, superdiagonals lam and 1.
    fn pair_blocks() -> OpMatrix {
        let z = const_fn(0);
        OpMatrix::new(
            4,
            vec![
                lam_fn(),
                lam_fn(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
                const_fn(1),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dic_diagonal_is_fixed() {
        let a = pair_blocks();
        let p = OpMatrix::diagonal(&[const_fn(1), const_fn(1), const_fn(0), const_fn(0)]).unwrap();
        let cert = diagonalize_idempotent_in_commutant(&a, &p).unwrap();
        let d = cert.conjugate(&p).unwrap();
        assert!(d.eq_fn(&p.refine(d.partition())));
        let back = cert.conjugate(&a).unwrap();
        assert!(back.eq_fn(&a.refine(back.partition())));
    }

    #[test]
    fn dic_nondiagonal_idempotent_equal_sizes() {
        // P = [[I2, -B],[0, 0]] with B = [[lam, 0],[0, 1]] an intertwiner
        let a = pair_blocks();
        let z = const_fn(0);
        let p = OpMatrix::new(
            4,
            vec![
                const_fn(1),
                z.clone(),
                lam_fn().neg(),
                z.clone(),
                z.clone(),
                const_fn(1),
                z.clone(),
                const_fn(-1),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
            ],
        )
        .unwrap();
        assert!(p.is_idempotent());
        assert!(a.commutes(&p).unwrap());
        let cert = diagonalize_idempotent_in_commutant(&a, &p).unwrap();
        let d = cert.conjugate(&p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(d.entry(i, j).is_zero());
                }
            }
        }
        assert!(cert.bounded());
        let back = cert.conjugate(&a).unwrap();
        assert!(back.eq_fn(&a.refine(back.partition())));
    }

    #[test]
    fn dic_unequal_sizes() {
        // J3(lam) (+) J2(lam), P = [[I3, -C],[0,0]] with C = [[1,0],[0,1],[0,0]]
        let z = const_fn(0);
        let one = const_fn(1);
        let a = OpMatrix::new(
            5,
            vec![
                lam_fn(),
                one.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
                one.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
                one.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                lam_fn(),
            ],
        )
        .unwrap();
        let p = OpMatrix::new(
            5,
            vec![
                one.clone(),
                z.clone(),
                z.clone(),
                const_fn(-1),
                z.clone(),
                z.clone(),
                one.clone(),
                z.clone(),
                z.clone(),
                const_fn(-1),
                z.clone(),
                z.clone(),
                one.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
            ],
        )
        .unwrap();
        assert!(p.is_idempotent());
        assert!(a.commutes(&p).unwrap());
        let cert = diagonalize_idempotent_in_commutant(&a, &p).unwrap();
        let d = cert.conjugate(&p).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!(d.entry(i, j).is_zero());
                }
            }
        }
        let back = cert.conjugate(&a).unwrap();
        assert!(back.eq_fn(&a.refine(back.partition())));
    }

    #[test]
    fn masi_identity_case() {
        let a = pair_blocks();
        let one = const_fn(1);
        let z = const_fn(0);
        let e1 = OpMatrix::diagonal(&[one.clone(), one.clone(), z.clone(), z.clone()]).unwrap();
        let e2 = OpMatrix::diagonal(&[z.clone(), z.clone(), one.clone(), one.clone()]).unwrap();
        let x = conjugate_masi(&a, &[e1.clone(), e2.clone()], &[e1.clone(), e2.clone()]).unwrap();
        // generators map into the target algebra
        let img = x.conjugate(&e1).unwrap();
        assert!(in_atom_algebra(&img, &[e1, e2]).unwrap());
    }

    #[test]
    fn masi_conjugated_target() {
        let a = pair_blocks();
        let one = const_fn(1);
        let z = const_fn(0);
        let e1 = OpMatrix::diagonal(&[one.clone(), one.clone(), z.clone(), z.clone()]).unwrap();
        let e2 = OpMatrix::diagonal(&[z.clone(), z.clone(), one.clone(), one.clone()]).unwrap();
        // S in {A}' invertible-bounded: S = I + [[0, B],[0,0]]
        let s = OpMatrix::new(
            4,
            vec![
                one.clone(),
                z.clone(),
                lam_fn(),
                z.clone(),
                z.clone(),
                one.clone(),
                z.clone(),
                one.clone(),
                z.clone(),
                z.clone(),
                one.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                one.clone(),
            ],
        )
        .unwrap();
        assert!(a.commutes(&s).unwrap());
        let s_inv = s.inverse().unwrap();
        let q1 = s.matmul(&e1).unwrap().matmul(&s_inv).unwrap();
        let q2 = s.matmul(&e2).unwrap().matmul(&s_inv).unwrap();
        let x = conjugate_masi(&a, &[e1.clone(), e2.clone()], &[q1.clone(), q2.clone()]).unwrap();
        let img = x.conjugate(&e1).unwrap();
        assert!(in_atom_algebra(&img, &[q1.clone(), q2.clone()]).unwrap());
        let img2 = x.conjugate(&e2).unwrap();
        assert!(in_atom_algebra(&img2, &[q1, q2]).unwrap());
    }

    #[test]
    fn masi_rejects_non_maximal() {
        // {I} is not maximal for a two-block operator
        let a = pair_blocks();
        let i4 = OpMatrix::identity(4, a.partition());
        let one = const_fn(1);
        let z = const_fn(0);
        let e1 = OpMatrix::diagonal(&[one.clone(), one.clone(), z.clone(), z.clone()]).unwrap();
        let e2 = OpMatrix::diagonal(&[z.clone(), z.clone(), one, z.clone()]).unwrap();
        let _ = e2;
        match conjugate_masi(&a, &[i4.clone()], &[e1.clone(), i4.sub(&e1).unwrap()]) {
            Err(MasiError::NotMaximal { witness }) => {
                assert!(witness.is_idempotent());
                assert!(a.commutes(&witness).unwrap());
            }
            other => panic!("expected NotMaximal, got {:?}", other.map(|_| ())),
        }
    }
}
