//! Constructive diagonalization of idempotents over the scalar field, and
//! simultaneous diagonalization of commuting frames.
//!
//! The pipeline per cell: partition the cell so that a diagonal entry clears
//! the `r/n` modulus threshold throughout (exact root isolation, no floats),
//! swap it to the pivot position, eliminate the pivot column with a unit
//! lower-triangular conjugation, recurse on the complementary block, and
//! finish with a block shear. Certificates are composed exactly and verified
//! before return.

use crate::certificate::SimilarityCertificate;
use crate::error::EngineError;
use crate::linalg::CellMat;
use crate::opmatrix::OpMatrix;
use crate::partition::Partition;
use crate::poly::RPoly;
use crate::ratfunc::RatFunc;
use crate::rational::Gq;
use crate::realroots::{self, RootLoc};
use num_rational::BigRational;

/// Per-cell pivot choice for the first elimination step of an idempotent.
#[derive(Clone, Debug)]
pub struct CellPivot {
    /// Diagonal index whose modulus clears the `r/n` threshold on the cell.
    pub pivot_index: usize,
    /// Row permutation bringing the pivot to position (1,1).
    pub permutation: Vec<usize>,
}

/// Refined partition plus a verified pivot per rank-positive cell.
#[derive(Clone, Debug)]
pub struct PivotPlan {
    pub partition: Partition,
    /// `None` on rank-0 and rank-n cells (no elimination needed).
    pub pivots: Vec<Option<CellPivot>>,
}

const BISECT_CAP: usize = 48;

/// Numerator of `|f|^2 - thr^2` as a real polynomial; on cells where the
/// denominator of `f` has no real roots its sign agrees with the difference.
fn threshold_poly(f: &RatFunc, thr: &BigRational) -> RPoly {
    let nsq = f.norm_sq();
    let t2 = thr * thr;
    let shifted = &nsq - &RatFunc::constant(Gq::from_rational(t2));
    debug_assert!(shifted.num().has_real_coeffs());
    shifted.num().real_part()
}

/// Split `[lo, hi]` into subcells, each with a diagonal index whose modulus
/// stays at or above `r/n` on the whole closed subcell.
fn pivot_cover(
    p: &CellMat,
    r: u32,
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Vec<(BigRational, BigRational, usize)>, EngineError> {
    let n = p.rows();
    let thr = BigRational::new((r as i64).into(), (n as i64).into());
    let gs: Vec<RPoly> = (0..n).map(|i| threshold_poly(p.at(i, i), &thr)).collect();

    // candidate breakpoints: roots (or isolating endpoints) of each g_i
    let mut marks = vec![lo.clone(), hi.clone()];
    for g in &gs {
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

    // a pivot that stays at or above the r/n threshold reproduces the
    // classical norm bound; when the crossing conspires exactly at the
    // threshold, any pivot with no zero on the closed subcell still yields
    // pole-free quotients, which is the boundedness this field tracks
    let norm_polys: Vec<RPoly> = (0..n)
        .map(|i| p.at(i, i).norm_sq().num().real_part())
        .collect();
    let mut out = Vec::new();
    let mut stack: Vec<(BigRational, BigRational, usize)> = marks
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone(), 0usize))
        .collect();
    stack.reverse();
    while let Some((a, b, depth)) = stack.pop() {
        let found =
            (0..n).find(|&i| !gs[i].is_zero() && realroots::nonnegative_on_closed(&gs[i], &a, &b));
        let found = found.or_else(|| {
            (0..n).find(|&i| {
                !norm_polys[i].is_zero() && !realroots::has_root_in_closed(&norm_polys[i], &a, &b)
            })
        });
        match found {
            Some(i) => out.push((a, b, i)),
            None => {
                if depth >= BISECT_CAP {
                    return Err(EngineError::IrrationalStructurePoint(format!(
                        "no single pivot index dominates on [{}, {}]",
                        a, b
                    )));
                }
                let mid = (&a + &b) / BigRational::from_integer(2.into());
                stack.push((mid.clone(), b, depth + 1));
                stack.push((a, mid, depth + 1));
            }
        }
    }
    // merge neighbours that agree on the pivot
    let mut merged: Vec<(BigRational, BigRational, usize)> = Vec::new();
    for (a, b, i) in out {
        match merged.last_mut() {
            Some((_, pb, pi)) if *pi == i && *pb == a => *pb = b,
            _ => merged.push((a, b, i)),
        }
    }
    Ok(merged)
}

/// Diagonalize one idempotent cell matrix on `[lo, hi]`; returns per-subcell
/// `(lo, hi, x, x_inv)` with `x * p * x_inv = diag(1,...,1,0,...,0)`.
fn diag_cell(
    p: &CellMat,
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Vec<(BigRational, BigRational, CellMat, CellMat)>, EngineError> {
    let n = p.rows();
    let tr = p.trace();
    let r = match tr.as_constant() {
        Some(c) if c.is_real() && c.re.is_integer() => {
            let v: i64 =
                c.re.numer()
                    .try_into()
                    .map_err(|_| EngineError::NotIdempotent)?;
            if v < 0 || v as usize > n {
                return Err(EngineError::NotIdempotent);
            }
            v as u32
        }
        _ => return Err(EngineError::NotIdempotent),
    };
    let id = CellMat::identity(n);
    if r == 0 || r as usize == n {
        // trace forces p = 0 or p = I for an exact idempotent
        if r == 0 && !p.is_zero() {
            return Err(EngineError::NotIdempotent);
        }
        if r as usize == n && !p.is_identity() {
            return Err(EngineError::NotIdempotent);
        }
        return Ok(vec![(lo.clone(), hi.clone(), id.clone(), id)]);
    }

    let mut results = Vec::new();
    for (a, b, pivot) in pivot_cover(p, r, lo, hi)? {
        // swap pivot row/column to the front
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(0, pivot);
        let u = CellMat::permutation(&perm);
        let q = u.mul(p).mul(&u.transpose());

        // unit lower-triangular elimination of column 0
        let pivot_inv = q
            .at(0, 0)
            .inv()
            .ok_or_else(|| EngineError::Internal("pivot vanished identically".into()))?;
        let mut x1 = CellMat::identity(n);
        let mut x1_inv = CellMat::identity(n);
        for k in 1..n {
            let c = q.at(k, 0) * &pivot_inv;
            x1.set(k, 0, -&c);
            x1_inv.set(k, 0, c);
        }
        let q1 = x1.mul(&q).mul(&x1_inv);
        // q1 = [[1, v],[0, Q]] exactly, by the rank argument
        if !q1.at(0, 0).is_one() {
            return Err(EngineError::Internal(
                "elimination failed to normalize pivot".into(),
            ));
        }
        for k in 1..n {
            if !q1.at(k, 0).is_zero() {
                return Err(EngineError::Internal(
                    "elimination left a nonzero column entry".into(),
                ));
            }
        }

        let sub = q1.submatrix(1, 1, n - 1, n - 1);
        for (sa, sb, y, y_inv) in diag_cell(&sub, &a, &b)? {
            let x2 = CellMat::identity(1).direct_sum(&y);
            let x2_inv = CellMat::identity(1).direct_sum(&y_inv);
            let q2 = x2.mul(&q1).mul(&x2_inv);
            // q2 = [[I_r, R],[0,0]]; finish with the block shear
            let mut x3 = CellMat::identity(n);
            let mut x3_inv = CellMat::identity(n);
            for i in 0..r as usize {
                for j in r as usize..n {
                    let e = q2.at(i, j).clone();
                    if !e.is_zero() {
                        x3_inv.set(i, j, -&e);
                        x3.set(i, j, e);
                    }
                }
            }
            let x = x3.mul(&x2).mul(&x1).mul(&u);
            let x_inv = u.transpose().mul(&x1_inv).mul(&x2_inv).mul(&x3_inv);
            let d = x.mul(p).mul(&x_inv);
            for i in 0..n {
                for j in 0..n {
                    let e = d.at(i, j);
                    let ok = if i != j {
                        e.is_zero()
                    } else if i < r as usize {
                        e.is_one()
                    } else {
                        e.is_zero()
                    };
                    if !ok {
                        return Err(EngineError::Internal(
                            "conjugate is not the expected diagonal".into(),
                        ));
                    }
                }
            }
            results.push((sa, sb, x, x_inv));
        }
    }
    Ok(results)
}

/// Compute a verified pivot plan for the first elimination level.
pub fn pivot_plan(p: &OpMatrix) -> Result<PivotPlan, EngineError> {
    let trace = p.trace_function()?;
    if !p.is_bounded_matrix() {
        return Err(EngineError::UnboundedInput);
    }
    let n = p.n();
    let mut points: Vec<BigRational> = p.partition().points().to_vec();
    for ci in 0..p.partition().cell_count() {
        let (lo, hi) = p.partition().cell(ci);
        let r = trace.values[ci];
        if r == 0 || r as usize == n {
            continue;
        }
        for (a, b, _) in pivot_cover(&p.cell_matrix(ci), r, lo, hi)? {
            points.push(a);
            points.push(b);
        }
    }
    points.sort();
    points.dedup();
    let partition = Partition::new(points)?;
    let trace_r = trace.refine(&partition);
    let pr = p.refine(&partition);
    let mut pivots = Vec::with_capacity(partition.cell_count());
    for ci in 0..partition.cell_count() {
        let r = trace_r.values[ci];
        if r == 0 || r as usize == n {
            pivots.push(None);
            continue;
        }
        let (lo, hi) = partition.cell(ci);
        let cover = pivot_cover(&pr.cell_matrix(ci), r, lo, hi)?;
        let idx = cover[0].2;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(0, idx);
        pivots.push(Some(CellPivot {
            pivot_index: idx,
            permutation: perm,
        }));
    }
    Ok(PivotPlan { partition, pivots })
}

/// One step of column elimination (the (1,1)-pivot case): conjugate by the
/// unit lower-triangular matrix so the first column becomes `e_1`.
pub fn eliminate_column(p: &OpMatrix) -> Result<(SimilarityCertificate, OpMatrix), EngineError> {
    let trace = p.trace_function()?;
    let n = p.n();
    // verify the (1,1) pivot clears r/n on every rank-positive cell
    for ci in 0..p.partition().cell_count() {
        let r = trace.values[ci];
        if r == 0 {
            continue;
        }
        let (lo, hi) = p.partition().cell(ci);
        let thr = BigRational::new((r as i64).into(), (n as i64).into());
        let g = threshold_poly(p.entry(0, 0).cell(ci), &thr);
        if g.is_zero() || !realroots::nonnegative_on_closed(&g, lo, hi) {
            return Err(EngineError::PivotTooSmall {
                cell: ci,
                threshold: thr,
            });
        }
    }
    let mut xs = Vec::new();
    let mut xinvs = Vec::new();
    for ci in 0..p.partition().cell_count() {
        let m = p.cell_matrix(ci);
        let mut x = CellMat::identity(n);
        let mut x_inv = CellMat::identity(n);
        if trace.values[ci] > 0 {
            let inv = m.at(0, 0).inv().unwrap();
            for k in 1..n {
                let c = m.at(k, 0) * &inv;
                x.set(k, 0, -&c);
                x_inv.set(k, 0, c);
            }
        }
        xs.push(x);
        xinvs.push(x_inv);
    }
    let x = OpMatrix::from_cells(n, p.partition().clone(), xs);
    let x_inv = OpMatrix::from_cells(n, p.partition().clone(), xinvs);
    let cert = SimilarityCertificate::new(x, x_inv)?;
    let p1 = cert.conjugate(p)?;
    Ok((cert, p1))
}

/// Diagonalize a bounded idempotent: returns a certificate with bounded `x`
/// and `x_inv` and the exactly diagonal 0/1 conjugate.
pub fn diagonalize_idempotent(
    p: &OpMatrix,
) -> Result<(SimilarityCertificate, OpMatrix), EngineError> {
    if !p.is_idempotent() {
        return Err(EngineError::NotIdempotent);
    }
    if !p.is_bounded_matrix() {
        return Err(EngineError::UnboundedInput);
    }
    let n = p.n();
    let mut pieces: Vec<(BigRational, BigRational, CellMat, CellMat)> = Vec::new();
    for ci in 0..p.partition().cell_count() {
        let (lo, hi) = p.partition().cell(ci);
        pieces.extend(diag_cell(&p.cell_matrix(ci), lo, hi)?);
    }
    let (x, x_inv) = assemble(n, &pieces)?;
    let cert = SimilarityCertificate::new(x, x_inv)?;
    if !cert.bounded() {
        return Err(EngineError::Internal(
            "diagonalization certificate failed the boundedness guarantee".into(),
        ));
    }
    let d = cert.conjugate(p)?;
    let trace_before = p.trace_function()?;
    let trace_after = d.trace_function()?;
    if !trace_before.eq_fn(&trace_after) {
        return Err(EngineError::Internal("trace function not preserved".into()));
    }
    Ok((cert, d))
}

/// Stitch per-subcell transforms into a pair of matrices on the refined
/// partition.
fn assemble(
    n: usize,
    pieces: &[(BigRational, BigRational, CellMat, CellMat)],
) -> Result<(OpMatrix, OpMatrix), EngineError> {
    let mut breakpoints: Vec<BigRational> = Vec::new();
    for (a, b, _, _) in pieces {
        breakpoints.push(a.clone());
        breakpoints.push(b.clone());
    }
    breakpoints.sort();
    breakpoints.dedup();
    let partition = Partition::new(breakpoints)?;
    let mut xs = vec![CellMat::identity(n); partition.cell_count()];
    let mut xinvs = vec![CellMat::identity(n); partition.cell_count()];
    for (a, b, x, x_inv) in pieces {
        for ci in 0..partition.cell_count() {
            let (lo, hi) = partition.cell(ci);
            if lo >= a && hi <= b {
                xs[ci] = x.clone();
                xinvs[ci] = x_inv.clone();
            }
        }
    }
    Ok((
        OpMatrix::from_cells(n, partition.clone(), xs),
        OpMatrix::from_cells(n, partition, xinvs),
    ))
}

/// Simultaneously diagonalize a list of mutually annihilating idempotents
/// summing to the identity; ranges come out consecutive in list order.
pub fn diagonalize_frame(
    a: &OpMatrix,
    elements: &[OpMatrix],
) -> Result<SimilarityCertificate, EngineError> {
    if elements.is_empty() {
        return Err(EngineError::SumNotIdentity);
    }
    let mut part = a.partition().clone();
    for e in elements {
        part = part.common_refinement(e.partition())?;
    }
    let elems: Vec<OpMatrix> = elements.iter().map(|e| e.refine(&part)).collect();
    let a_r = a.refine(&part);
    let mut sum = OpMatrix::zero(a.n(), &part);
    for (k, e) in elems.iter().enumerate() {
        if !e.is_idempotent() {
            return Err(EngineError::NotIdempotent);
        }
        if !e.is_bounded_matrix() {
            return Err(EngineError::UnboundedInput);
        }
        if !a_r.commutes(e)? {
            return Err(EngineError::NotCommuting(k));
        }
        sum = sum.add(e)?;
    }
    if !sum.is_identity() {
        return Err(EngineError::SumNotIdentity);
    }

    let n = a.n();
    let mut pieces: Vec<(BigRational, BigRational, CellMat, CellMat)> = Vec::new();
    for ci in 0..part.cell_count() {
        let (lo, hi) = part.cell(ci);
        let mats: Vec<CellMat> = elems.iter().map(|e| e.cell_matrix(ci)).collect();
        pieces.extend(frame_diag_cell(&mats, lo, hi)?);
    }
    let (x, x_inv) = assemble(n, &pieces)?;
    let cert = SimilarityCertificate::new(x, x_inv)?;
    for e in &elems {
        let d = cert.conjugate(e)?;
        for i in 0..n {
            for j in 0..n {
                if i != j && !d.entry(i, j).is_zero() {
                    return Err(EngineError::Internal("frame conjugate not diagonal".into()));
                }
            }
        }
    }
    Ok(cert)
}

/// Per-cell staged frame diagonalization: diagonalize the first element,
/// restrict the rest to the complementary corner, recurse.
fn frame_diag_cell(
    elems: &[CellMat],
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Vec<(BigRational, BigRational, CellMat, CellMat)>, EngineError> {
    let n = elems[0].rows();
    if elems.len() == 1 {
        return Ok(vec![(
            lo.clone(),
            hi.clone(),
            CellMat::identity(n),
            CellMat::identity(n),
        )]);
    }
    let first = &elems[0];
    let mut out = Vec::new();
    for (a, b, x, x_inv) in diag_cell(first, lo, hi)? {
        let d = x.mul(first).mul(&x_inv);
        let r = (0..n).filter(|&i| d.at(i, i).is_one()).count();
        let rest: Vec<CellMat> = elems[1..].iter().map(|e| x.mul(e).mul(&x_inv)).collect();
        let mut tails = Vec::with_capacity(rest.len());
        for c in &rest {
            for i in 0..n {
                for j in 0..n {
                    if (i < r || j < r) && !c.at(i, j).is_zero() {
                        return Err(EngineError::NotAnnihilating(0, 1, 0));
                    }
                }
            }
            tails.push(c.submatrix(r, r, n - r, n - r));
        }
        if n == r {
            out.push((a, b, x, x_inv));
            continue;
        }
        for (sa, sb, y, y_inv) in frame_diag_cell(&tails, &a, &b)? {
            let lift = CellMat::identity(r).direct_sum(&y);
            let lift_inv = CellMat::identity(r).direct_sum(&y_inv);
            out.push((sa, sb, lift.mul(&x), x_inv.mul(&lift_inv)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piecewise::PiecewiseRational;
    use crate::rational::ratio;

    fn unit_part() -> Partition {
        Partition::whole(ratio(0, 1), ratio(1, 1))
    }

    fn const_fn(c: i64) -> PiecewiseRational {
        PiecewiseRational::constant(ratio(0, 1), ratio(1, 1), Gq::from_int(c))
    }

    fn lam_fn() -> PiecewiseRational {
        PiecewiseRational::var(ratio(0, 1), ratio(1, 1))
    }

    #[test]
    fn eliminate_constant_idempotent() {
        let p = OpMatrix::new(
            2,
            vec![const_fn(2), const_fn(-2), const_fn(1), const_fn(-1)],
        )
        .unwrap();
        assert!(p.is_idempotent());
        let (cert, p1) = eliminate_column(&p).unwrap();
        assert!(p1.entry(0, 0).is_one());
        assert!(p1.entry(1, 0).is_zero());
        assert_eq!(p1.entry(0, 1).eval(&ratio(1, 2)).unwrap(), Gq::from_int(-2));
        assert_eq!(
            cert.x().entry(1, 0).eval(&ratio(1, 2)).unwrap(),
            Gq::from_ratio(-1, 2)
        );
    }

    #[test]
    fn eliminate_already_clear() {
        let p = OpMatrix::diagonal(&[const_fn(1), const_fn(0)]).unwrap();
        let (cert, p1) = eliminate_column(&p).unwrap();
        assert!(cert.x().is_identity());
        assert!(p1.eq_fn(&p));
        let q = OpMatrix::new(2, vec![const_fn(1), lam_fn(), const_fn(0), const_fn(0)]).unwrap();
        let (cert2, q1) = eliminate_column(&q).unwrap();
        assert!(cert2.x().is_identity());
        assert!(q1.eq_fn(&q));
    }

    #[test]
    fn pivot_too_small() {
        // [[0,0],[lam,1]] has (1,1) entry 0: the first-column pivot fails
        let p = OpMatrix::new(2, vec![const_fn(0), const_fn(0), lam_fn(), const_fn(1)]).unwrap();
        assert!(matches!(
            eliminate_column(&p),
            Err(EngineError::PivotTooSmall { .. })
        ));
    }

    #[test]
    fn diagonalize_trivial() {
        let part = unit_part();
        let z = OpMatrix::zero(3, &part);
        let (cz, dz) = diagonalize_idempotent(&z).unwrap();
        assert!(cz.x().is_identity() && dz.is_zero());
        let i = OpMatrix::identity(3, &part);
        let (ci, di) = diagonalize_idempotent(&i).unwrap();
        assert!(ci.x().is_identity() && di.is_identity());
    }

    #[test]
    fn diagonalize_shear_case() {
        // P = [[1, lam],[0,0]] -> X = [[1, lam],[0,1]], D = diag(1,0)
        let p = OpMatrix::new(2, vec![const_fn(1), lam_fn(), const_fn(0), const_fn(0)]).unwrap();
        let (cert, d) = diagonalize_idempotent(&p).unwrap();
        let expected_d = OpMatrix::diagonal(&[const_fn(1), const_fn(0)]).unwrap();
        assert!(d.eq_fn(&expected_d));
        assert!(cert.x().entry(0, 1).eq_fn(&lam_fn()));
        assert!(cert.bounded());
    }

    #[test]
    fn diagonalize_rank_one_constant() {
        // P = [[2,-2],[1,-1]] -> X = [[2,-2],[-1/2,1]]
        let p = OpMatrix::new(
            2,
            vec![const_fn(2), const_fn(-2), const_fn(1), const_fn(-1)],
        )
        .unwrap();
        let (cert, d) = diagonalize_idempotent(&p).unwrap();
        let expected_d = OpMatrix::diagonal(&[const_fn(1), const_fn(0)]).unwrap();
        assert!(d.eq_fn(&expected_d));
        let x = cert.x();
        assert_eq!(x.entry(0, 0).eval(&ratio(1, 3)).unwrap(), Gq::from_int(2));
        assert_eq!(x.entry(0, 1).eval(&ratio(1, 3)).unwrap(), Gq::from_int(-2));
        assert_eq!(
            x.entry(1, 0).eval(&ratio(1, 3)).unwrap(),
            Gq::from_ratio(-1, 2)
        );
        assert_eq!(x.entry(1, 1).eval(&ratio(1, 3)).unwrap(), Gq::from_int(1));
    }

    #[test]
    fn diagonalize_pivot_switch() {
        let p = OpMatrix::new(2, vec![const_fn(0), const_fn(0), lam_fn(), const_fn(1)]).unwrap();
        assert!(p.is_idempotent());
        let (cert, d) = diagonalize_idempotent(&p).unwrap();
        assert!(cert.bounded());
        let expected_d = OpMatrix::diagonal(&[const_fn(1), const_fn(0)]).unwrap();
        assert!(d.eq_fn(&expected_d));
    }

    #[test]
    fn diagonalize_piecewise_rank() {
        let part = Partition::new(vec![ratio(0, 1), ratio(1, 2), ratio(1, 1)]).unwrap();
        let chi = PiecewiseRational::indicator(part.clone(), &[true, false]).unwrap();
        let p = OpMatrix::diagonal(&[chi.clone(), chi]).unwrap();
        let (cert, d) = diagonalize_idempotent(&p).unwrap();
        assert!(cert.x().is_identity());
        assert!(d.eq_fn(&p));
    }

    #[test]
    fn pivot_plan_refines_at_crossings() {
        // diag entries lam and 1-lam cross modulus 1/2 at 1/2 (r/n = 1/2):
        // P = diag-ish idempotent [[lam, c],[c, 1-lam]] with c^2 = lam - lam^2
        // is not rational; use instead the idempotent
        // P = [[lam, lam(1-lam)],[1, 1-lam]]: P^2 = P? rows: check trace 1 and
        // P^2 = P requires (entry (0,0)): lam^2 + lam(1-lam) = lam. yes.
        // (1,0): lam + (1-lam) = 1. yes. (0,1): lam*lam(1-lam)+lam(1-lam)(1-lam)
        // = lam(1-lam). yes. So P is idempotent with diagonal lam, 1-lam.
        let l = lam_fn();
        let one_minus = const_fn(1).sub(&l).unwrap();
        let p = OpMatrix::new(
            2,
            vec![
                l.clone(),
                l.mul(&one_minus).unwrap(),
                const_fn(1),
                one_minus,
            ],
        )
        .unwrap();
        assert!(p.is_idempotent());
        let plan = pivot_plan(&p).unwrap();
        // must have refined at the threshold crossings of |lam| = 1/2 and
        // |1-lam| = 1/2
        assert!(plan.partition.points().contains(&ratio(1, 2)));
        let (cert, d) = diagonalize_idempotent(&p).unwrap();
        assert!(cert.bounded());
        assert_eq!(d.trace_function().unwrap().values.iter().max(), Some(&1));
    }

    #[test]
    fn frame_diagonalization() {
        let p = OpMatrix::new(2, vec![const_fn(1), lam_fn(), const_fn(0), const_fn(0)]).unwrap();
        let i = OpMatrix::identity(2, &unit_part());
        let q = i.sub(&p).unwrap();
        let a = p.clone();
        let cert = diagonalize_frame(&a, &[p.clone(), q.clone()]).unwrap();
        let dp = cert.conjugate(&p).unwrap();
        let dq = cert.conjugate(&q).unwrap();
        let e11 = OpMatrix::diagonal(&[const_fn(1), const_fn(0)]).unwrap();
        let e22 = OpMatrix::diagonal(&[const_fn(0), const_fn(1)]).unwrap();
        assert!(dp.eq_fn(&e11));
        assert!(dq.eq_fn(&e22));
        assert_eq!(
            cert.x().entry(0, 1).eval(&ratio(1, 2)).unwrap(),
            Gq::from_ratio(1, 2)
        );
    }

    #[test]
    fn frame_identity_shortcut() {
        let i = OpMatrix::identity(3, &unit_part());
        let cert = diagonalize_frame(&i, &[i.clone()]).unwrap();
        assert!(cert.x().is_identity());
        let d1 = OpMatrix::diagonal(&[const_fn(1), const_fn(1), const_fn(0)]).unwrap();
        let d2 = OpMatrix::diagonal(&[const_fn(0), const_fn(0), const_fn(1)]).unwrap();
        let cert2 = diagonalize_frame(&d1, &[d1.clone(), d2]).unwrap();
        assert!(cert2.x().is_identity());
    }
}
