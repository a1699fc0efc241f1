//! The local K0 invariant of the relative commutant and the similarity
//! classifier built on it.
//!
//! Canonical blocks on a cell are grouped into families: same size, same
//! diagonal function, and an invertible-bounded intertwiner between them.
//! When two blocks agree in size and diagonal but every intertwiner's
//! determinant is forced to vanish at a point, that point is recorded as a
//! collision: idempotent classes are identified there while only their sums
//! are constrained elsewhere. The classifier treats matching invariants as
//! necessary evidence only; a "similar" verdict always carries an exact
//! verified certificate.

use crate::certificate::SimilarityCertificate;
use crate::commutant;
use crate::error::EngineError;
use crate::linalg::{self, CellMat};
use crate::opmatrix::OpMatrix;
use crate::partition::Partition;
use crate::ratfunc::RatFunc;
use crate::rational::Gq;
use crate::structure::{self, CanonicalForm, CanonicalOutcome, WitnessPoint};
use num_rational::BigRational;

/// One family of generically similar canonical blocks on one cell: same
/// size, same diagonal function (any two such blocks intertwine invertibly
/// over the field). `splittings` lists the collision points inside the
/// closed cell together with the number of locally inequivalent classes the
/// family breaks into there.
#[derive(Clone, Debug)]
pub struct FamilyData {
    pub size: usize,
    pub diagonal: RatFunc,
    pub multiplicity: usize,
    pub splittings: Vec<(WitnessPoint, usize)>,
}

/// Flattened collision report entry.
#[derive(Clone, Debug)]
pub struct Collision {
    pub cell: usize,
    pub point: WitnessPoint,
    pub family: usize,
    pub local_classes: usize,
}

/// The local K0 invariant: per-cell families with collision gluing. The
/// data is refinement-invariant: restricting a cell drops exactly the
/// splittings whose points fall outside it.
#[derive(Clone, Debug)]
pub struct K0Class {
    pub partition: Partition,
    pub families: Vec<Vec<FamilyData>>,
    pub collisions: Vec<Collision>,
}

impl K0Class {
    /// Free rank on a cell: one summand per family present, plus one per
    /// extra local class forced at a collision point touching the cell.
    pub fn free_rank(&self, cell: usize) -> usize {
        self.families[cell]
            .iter()
            .map(|f| 1 + f.splittings.iter().map(|(_, c)| c - 1).sum::<usize>())
            .sum()
    }
}

/// Search the intertwiner lattice for an invertible-bounded element, or
/// prove none exists by exhibiting a rational point where every bounded
/// intertwiner is singular.
///
/// Returns `Ok(Some(z))` with a verified invertible-bounded intertwiner,
/// `Ok(None)` when provably none exists (collision points reported through
/// `collision_points`), or an error when the search is inconclusive.
fn invertible_bounded_intertwiner(
    b1: &CellMat,
    b2: &CellMat,
    lo: &BigRational,
    hi: &BigRational,
    collision_points: &mut Vec<WitnessPoint>,
) -> Result<Option<CellMat>, EngineError> {
    let basis = commutant::intertwiner_basis(b1, b2);
    if basis.is_empty() {
        return Ok(None);
    }
    let s = b1.rows();
    // bounded lattice: clear denominators, saturate at candidate points
    let vecs: Vec<Vec<RatFunc>> = basis.iter().map(commutant::vec_of_pub).collect();
    let mut points: Vec<BigRational> = Vec::new();
    for v in &vecs {
        let (rat, _irr) = linalg::rational_poles(v, lo, hi);
        for p in rat {
            if !points.contains(&p) {
                points.push(p);
            }
        }
    }
    // determinant zeros of a generic combination also matter; gather the
    // rational zeros of each basis element's determinant
    for b in &basis {
        let d = b.det();
        if d.is_zero() {
            continue;
        }
        for loc in d.real_zeros_in(lo, hi) {
            if let crate::realroots::RootLoc::Rational(p) = loc {
                if !points.contains(&p) {
                    points.push(p);
                }
            }
        }
    }
    points.sort();
    let sat = linalg::saturate_lattice(&vecs, &points);
    let sat_mats: Vec<CellMat> = sat.iter().map(|v| commutant::unvec_pub(v, s, s)).collect();

    // deterministic sweep for an invertible-bounded combination
    let k = sat_mats.len();
    let mut candidates: Vec<Vec<i64>> = Vec::new();
    for i in 0..k {
        let mut c = vec![0i64; k];
        c[i] = 1;
        candidates.push(c);
    }
    for i in 0..k {
        for j in (i + 1)..k {
            for (a, b) in [(1i64, 1i64), (1, -1), (1, 2), (2, 1), (1, -2)] {
                let mut c = vec![0i64; k];
                c[i] = a;
                c[j] = b;
                candidates.push(c);
            }
        }
    }
    if k >= 3 {
        candidates.push((0..k as i64).map(|i| i + 1).collect());
        candidates.push((0..k as i64).map(|i| 1 - 2 * (i % 2)).collect());
    }
    for c in &candidates {
        let mut z = CellMat::zeros(s, s);
        for (i, &ci) in c.iter().enumerate() {
            if ci == 0 {
                continue;
            }
            z = z.add(&sat_mats[i].scale(&RatFunc::from_int(ci)));
        }
        if z.is_zero() || !z.is_bounded_on(lo, hi) {
            continue;
        }
        let det = z.det();
        if det.is_zero() {
            continue;
        }
        // unit determinant: no real zeros in the closed cell and bounded
        if !det.real_zeros_in(lo, hi).is_empty() {
            continue;
        }
        let Some(z_inv) = z.inverse() else { continue };
        if !z_inv.is_bounded_on(lo, hi) {
            continue;
        }
        return Ok(Some(z));
    }

    // impossibility proof: a rational point where the whole saturated fiber
    // is singular
    let mut probe_points = points.clone();
    // also probe a few interior points to rule out sweep blindness
    for d in [2i64, 3, 5] {
        probe_points.push(lo + (hi - lo) * BigRational::new(1.into(), d.into()));
    }
    let mut proven: Vec<BigRational> = Vec::new();
    for p in &probe_points {
        if p < lo || p > hi {
            continue;
        }
        if fiber_all_singular(&sat_mats, p, s)? {
            proven.push(p.clone());
        }
    }
    if !proven.is_empty() {
        proven.sort();
        proven.dedup();
        for p in proven {
            collision_points.push(WitnessPoint::Rational(p));
        }
        return Ok(None);
    }
    Err(EngineError::Internal(
        "intertwiner search inconclusive: no invertible-bounded element found and no singular fiber proven"
            .into(),
    ))
}

/// Is `det(sum t_i basis_i(p)) = 0` identically in the formal coefficients?
fn fiber_all_singular(basis: &[CellMat], p: &BigRational, s: usize) -> Result<bool, EngineError> {
    // evaluate the basis at p and expand the determinant of a generic
    // combination symbolically: entries are linear forms in t_1..t_k, so
    // the determinant is a polynomial; we test it against enough sample
    // coefficient vectors to separate a nonzero polynomial of degree <= s.
    let k = basis.len();
    let fibers: Vec<Vec<Gq>> = basis
        .iter()
        .map(|b| {
            let mut out = Vec::with_capacity(s * s);
            for i in 0..s {
                for j in 0..s {
                    out.push(b.at(i, j).eval(p).unwrap_or_else(Gq::zero));
                }
            }
            out
        })
        .collect();
    // deterministic sample grid: coefficients from a set of size > s
    // per variable would be exhaustive but large; use structured samples:
    // all 0/1/2/3/5 patterns over at most 3 nonzero slots, plus ramp vectors
    let mut samples: Vec<Vec<i64>> = Vec::new();
    for i in 0..k {
        for v in [1i64, 2, 3] {
            let mut c = vec![0i64; k];
            c[i] = v;
            samples.push(c);
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            for (a, b) in [
                (1i64, 1i64),
                (1, -1),
                (2, 1),
                (1, 3),
                (3, 2),
                (1, -2),
                (2, -3),
            ] {
                let mut c = vec![0i64; k];
                c[i] = a;
                c[j] = b;
                samples.push(c);
            }
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            for l in (j + 1)..k {
                for (a, b, cthird) in [(1i64, 1i64, 1i64), (1, 2, 3), (3, 1, 2), (1, -1, 2)] {
                    let mut c = vec![0i64; k];
                    c[i] = a;
                    c[j] = b;
                    c[l] = cthird;
                    samples.push(c);
                }
            }
        }
    }
    samples.push((1..=k as i64).collect());
    samples.push((1..=k as i64).map(|x| x * x).collect());
    samples.push((1..=k as i64).map(|x| x * x * x).collect());
    for c in &samples {
        // assemble the fiber matrix and take its exact determinant
        let mut m = CellMat::zeros(s, s);
        for (bi, coeff) in c.iter().enumerate() {
            if *coeff == 0 {
                continue;
            }
            for i in 0..s {
                for j in 0..s {
                    let v = &fibers[bi][i * s + j] * &Gq::from_int(*coeff);
                    m.set(i, j, &(m.at(i, j).clone()) + &RatFunc::constant(v));
                }
            }
        }
        if !m.det().is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Equivalence data of one pair of same-size, same-diagonal blocks on a
/// cell: either a bounded-invertible intertwiner exists, or the finite set
/// of points where every bounded intertwiner is singular.
fn pair_collision_points(
    b1: &CellMat,
    b2: &CellMat,
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Vec<BigRational>, EngineError> {
    let mut probe = Vec::new();
    if invertible_bounded_intertwiner(b1, b2, lo, hi, &mut probe)?.is_some() {
        return Ok(vec![]);
    }
    // find a combination with generically nonzero determinant; its zeros
    // cover every collision point
    let basis = commutant::intertwiner_basis(b1, b2);
    let s = b1.rows();
    let vecs: Vec<Vec<RatFunc>> = basis.iter().map(commutant::vec_of_pub).collect();
    let mut points: Vec<BigRational> = Vec::new();
    for v in &vecs {
        let (rat, _) = linalg::rational_poles(v, lo, hi);
        for p in rat {
            if !points.contains(&p) {
                points.push(p);
            }
        }
    }
    let sat = linalg::saturate_lattice(&vecs, &points);
    let sat_mats: Vec<CellMat> = sat.iter().map(|v| commutant::unvec_pub(v, s, s)).collect();
    let k = sat_mats.len();
    let mut candidates: Vec<BigRational> = probe.iter().map(|w| w.approx()).collect();
    let mut generic_found = false;
    'combos: for mask in 1..(1usize << k.min(12)) {
        let mut z = CellMat::zeros(s, s);
        for (i, m) in sat_mats.iter().enumerate() {
            if mask >> i & 1 == 1 {
                z = z.add(m);
            }
        }
        let det = z.det();
        if det.is_zero() {
            continue;
        }
        generic_found = true;
        for loc in det.real_zeros_in(lo, hi) {
            match loc {
                crate::realroots::RootLoc::Rational(p) => {
                    if !candidates.contains(&p) {
                        candidates.push(p);
                    }
                }
                crate::realroots::RootLoc::Interval(a, b) => {
                    return Err(EngineError::IrrationalStructurePoint(format!(
                        "collision point isolated in ({}, {})",
                        a, b
                    )));
                }
            }
        }
        break 'combos;
    }
    if !generic_found {
        return Err(EngineError::Internal(
            "no generically invertible intertwiner between same-type blocks".into(),
        ));
    }
    let mut out = Vec::new();
    for p in candidates {
        if &p < lo || &p > hi {
            continue;
        }
        if fiber_all_singular(&sat_mats, &p, s)? {
            out.push(p);
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(EngineError::Internal(
            "no bounded-invertible intertwiner found but no singular point proven".into(),
        ));
    }
    Ok(out)
}

/// Compute the local K0 invariant of `{A}'` from a canonical form.
pub fn k0_of_form(form: &CanonicalForm) -> Result<K0Class, EngineError> {
    let partition = form.normal_form.partition().clone();
    let mut families: Vec<Vec<FamilyData>> = Vec::new();
    let mut collisions: Vec<Collision> = Vec::new();
    for (ci, cell_blocks) in form.blocks.iter().enumerate() {
        let (lo, hi) = partition.cell(ci);
        // generic families: same size and identical diagonal function
        let mut groups: Vec<(usize, RatFunc, Vec<&structure::CanonicalBlock>)> = Vec::new();
        for b in cell_blocks {
            match groups
                .iter_mut()
                .find(|(s, d, _)| *s == b.size && *d == b.diagonal)
            {
                Some((_, _, members)) => members.push(b),
                None => groups.push((b.size, b.diagonal.clone(), vec![b])),
            }
        }
        let mut fams = Vec::new();
        for (fi, (size, diagonal, members)) in groups.iter().enumerate() {
            let m = members.len();
            // pairwise collision sets
            let mut pair_points: Vec<Vec<Vec<BigRational>>> = vec![vec![Vec::new(); m]; m];
            let mut all_points: Vec<BigRational> = Vec::new();
            for i in 0..m {
                for j in (i + 1)..m {
                    let pts =
                        pair_collision_points(&members[i].matrix, &members[j].matrix, lo, hi)?;
                    for p in &pts {
                        if !all_points.contains(p) {
                            all_points.push(p.clone());
                        }
                    }
                    pair_points[i][j] = pts.clone();
                    pair_points[j][i] = pts;
                }
            }
            all_points.sort();
            // local classes at each collision point: members merge when
            // their pair is equivalent on a neighborhood of the point
            let mut splittings = Vec::new();
            for p in &all_points {
                let mut class = (0..m).collect::<Vec<usize>>();
                fn find(class: &mut Vec<usize>, i: usize) -> usize {
                    if class[i] == i {
                        i
                    } else {
                        let r = find(class, class[i]);
                        class[i] = r;
                        r
                    }
                }
                for i in 0..m {
                    for j in (i + 1)..m {
                        if !pair_points[i][j].contains(p) {
                            let ri = find(&mut class, i);
                            let rj = find(&mut class, j);
                            if ri != rj {
                                class[ri] = rj;
                            }
                        }
                    }
                }
                let mut roots: Vec<usize> = (0..m).map(|i| find(&mut class, i)).collect();
                roots.sort_unstable();
                roots.dedup();
                let classes = roots.len();
                if classes > 1 {
                    splittings.push((WitnessPoint::Rational(p.clone()), classes));
                    collisions.push(Collision {
                        cell: ci,
                        point: WitnessPoint::Rational(p.clone()),
                        family: fi,
                        local_classes: classes,
                    });
                }
            }
            fams.push(FamilyData {
                size: *size,
                diagonal: diagonal.clone(),
                multiplicity: m,
                splittings,
            });
        }
        families.push(fams);
    }
    Ok(K0Class {
        partition,
        families,
        collisions,
    })
}

/// Compute the invariant directly from an operator with a canonical form.
pub fn k0_of_commutant(a: &OpMatrix) -> Result<K0Class, EngineError> {
    match structure::canonical_form(a)? {
        CanonicalOutcome::Form(_frame, form) => k0_of_form(&form),
        CanonicalOutcome::Obstruction(_) => Err(EngineError::NoCanonicalForm),
    }
}

/// The family data of one stored cell restricted to a subcell: splittings
/// keep only the points that still touch the closed subcell.
fn restrict_family(f: &FamilyData, lo: &BigRational, hi: &BigRational) -> FamilyData {
    FamilyData {
        size: f.size,
        diagonal: f.diagonal.clone(),
        multiplicity: f.multiplicity,
        splittings: f
            .splittings
            .iter()
            .filter(|(p, _)| {
                let x = p.approx();
                &x >= lo && &x <= hi
            })
            .cloned()
            .collect(),
    }
}

fn family_key(f: &FamilyData) -> (usize, usize, String, Vec<(BigRational, usize)>) {
    let mut spl: Vec<(BigRational, usize)> =
        f.splittings.iter().map(|(p, c)| (p.approx(), *c)).collect();
    spl.sort();
    (f.size, f.multiplicity, format!("{:?}", f.diagonal), spl)
}

/// Structural equality of invariants after common refinement, with family
/// relabeling (families are compared as multisets).
pub fn k0_equal(c1: &K0Class, c2: &K0Class) -> bool {
    if !c1.partition.same_domain(&c2.partition) {
        return false;
    }
    let part = match c1.partition.common_refinement(&c2.partition) {
        Ok(p) => p,
        Err(_) => return false,
    };
    let map1 = c1.partition.cell_map(&part);
    let map2 = c2.partition.cell_map(&part);
    for ci in 0..part.cell_count() {
        let (lo, hi) = part.cell(ci);
        let mut k1: Vec<_> = c1.families[map1[ci]]
            .iter()
            .map(|f| family_key(&restrict_family(f, lo, hi)))
            .collect();
        let mut k2: Vec<_> = c2.families[map2[ci]]
            .iter()
            .map(|f| family_key(&restrict_family(f, lo, hi)))
            .collect();
        k1.sort();
        k2.sort();
        if k1 != k2 {
            return false;
        }
    }
    true
}

/// Verdict of the similarity classifier.
#[derive(Debug)]
pub enum SimilarityVerdict {
    /// Verified: `cert.conjugate(A) = B` exactly, invertible-bounded.
    Similar(SimilarityCertificate),
    /// No invertible-bounded intertwiner exists; the joint invariant is the
    /// witness.
    NotSimilar { joint_k0: K0Class, reason: String },
    /// A side has no canonical form; the classifier does not decide.
    Undecided { reason: String },
}

impl SimilarityVerdict {
    pub fn is_similar(&self) -> bool {
        matches!(self, SimilarityVerdict::Similar(_))
    }
}

/// Decide similarity in the bounded algebra, with certificate or witness.
pub fn similar(a: &OpMatrix, b: &OpMatrix) -> Result<SimilarityVerdict, EngineError> {
    if a.n() != b.n() {
        return Err(EngineError::DimensionMismatch(a.n(), b.n()));
    }
    if a.eq_fn(b) {
        return Ok(SimilarityVerdict::Similar(SimilarityCertificate::identity(
            a.n(),
            a.partition(),
        )));
    }
    let form_a = match structure::canonical_form(a)? {
        CanonicalOutcome::Form(_, f) => f,
        CanonicalOutcome::Obstruction(ob) => {
            return Ok(SimilarityVerdict::Undecided {
                reason: format!(
                    "first operator has no canonical form (obstruction at {:?})",
                    ob.witness_point
                ),
            })
        }
    };
    let form_b = match structure::canonical_form(b)? {
        CanonicalOutcome::Form(_, f) => f,
        CanonicalOutcome::Obstruction(ob) => {
            return Ok(SimilarityVerdict::Undecided {
                reason: format!(
                    "second operator has no canonical form (obstruction at {:?})",
                    ob.witness_point
                ),
            })
        }
    };
    // align the two normal forms on a common partition
    let part = form_a
        .normal_form
        .partition()
        .common_refinement(form_b.normal_form.partition())?;
    let na = form_a.normal_form.refine(&part);
    let nb = form_b.normal_form.refine(&part);
    let map_a = form_a.normal_form.partition().cell_map(&part);
    let map_b = form_b.normal_form.partition().cell_map(&part);

    let n = a.n();
    let mut v_cells: Vec<CellMat> = Vec::new();
    let mut v_inv_cells: Vec<CellMat> = Vec::new();
    let mut failure: Option<String> = None;
    'cells: for ci in 0..part.cell_count() {
        let (lo, hi) = part.cell(ci);
        let blocks_a = &form_a.blocks[map_a[ci]];
        let blocks_b = &form_b.blocks[map_b[ci]];
        if blocks_a.len() != blocks_b.len() {
            failure = Some(format!("block counts differ on cell {}", ci));
            break 'cells;
        }
        // greedy matching with backtracking over same-(size, diagonal)
        // candidates
        let m = blocks_a.len();
        let mut assignment = vec![usize::MAX; m];
        let mut used = vec![false; m];
        let mut inters: Vec<Option<CellMat>> = vec![None; m];
        fn backtrack(
            i: usize,
            blocks_a: &[structure::CanonicalBlock],
            blocks_b: &[structure::CanonicalBlock],
            used: &mut [bool],
            assignment: &mut [usize],
            inters: &mut [Option<CellMat>],
            lo: &BigRational,
            hi: &BigRational,
        ) -> Result<bool, EngineError> {
            if i == blocks_a.len() {
                return Ok(true);
            }
            for j in 0..blocks_b.len() {
                if used[j]
                    || blocks_a[i].size != blocks_b[j].size
                    || blocks_a[i].diagonal != blocks_b[j].diagonal
                {
                    continue;
                }
                let mut pts = Vec::new();
                if let Some(z) = invertible_bounded_intertwiner(
                    &blocks_b[j].matrix,
                    &blocks_a[i].matrix,
                    lo,
                    hi,
                    &mut pts,
                )? {
                    used[j] = true;
                    assignment[i] = j;
                    inters[i] = Some(z);
                    if backtrack(i + 1, blocks_a, blocks_b, used, assignment, inters, lo, hi)? {
                        return Ok(true);
                    }
                    used[j] = false;
                    assignment[i] = usize::MAX;
                    inters[i] = None;
                }
            }
            Ok(false)
        }
        if !backtrack(
            0,
            blocks_a,
            blocks_b,
            &mut used,
            &mut assignment,
            &mut inters,
            lo,
            hi,
        )? {
            failure = Some(format!("no bounded block matching on cell {}", ci));
            break 'cells;
        }
        // v maps the A-normal form to the B-normal form: block i of A lands
        // at block assignment[i] of B via z_i (z * A_i * z^{-1} = B_j)
        let mut v = CellMat::zeros(n, n);
        for (i, bi) in blocks_a.iter().enumerate() {
            let j = assignment[i];
            let z = inters[i].clone().unwrap();
            // z satisfies B_j z = z A_i; place at (rows of B_j, cols of A_i)
            let bj = &blocks_b[j];
            for r in 0..bj.size {
                for c in 0..bi.size {
                    v.set(bj.offset + r, bi.offset + c, z.at(r, c).clone());
                }
            }
        }
        let v_inv = v.inverse().ok_or_else(|| {
            EngineError::Internal("block matching produced a singular map".into())
        })?;
        v_cells.push(v);
        v_inv_cells.push(v_inv);
    }

    if let Some(reason) = failure {
        let joint = a.direct_sum(b)?;
        let joint_k0 = k0_of_commutant(&joint)?;
        return Ok(SimilarityVerdict::NotSimilar { joint_k0, reason });
    }

    let v = OpMatrix::from_cells(n, part.clone(), v_cells);
    let v_inv = OpMatrix::from_cells(n, part.clone(), v_inv_cells);
    let v_cert = SimilarityCertificate::new(v, v_inv)?;
    if !v_cert.bounded() {
        let joint = a.direct_sum(b)?;
        let joint_k0 = k0_of_commutant(&joint)?;
        return Ok(SimilarityVerdict::NotSimilar {
            joint_k0,
            reason: "block intertwiners assemble to an unbounded map".into(),
        });
    }
    // sanity on the normal forms
    let moved = v_cert.conjugate(&na)?;
    if !moved.eq_fn(&nb) {
        return Err(EngineError::Internal(
            "matched intertwiner fails on normal forms".into(),
        ));
    }
    // total: X = T_B^{-1} . V . T_A, so X A X^{-1} = B
    let ta = form_a.total()?.refine(&part);
    let tb = form_b.total()?.refine(&part);
    let x = ta.then(&v_cert)?.then(&tb.invert())?;
    let check = x.conjugate(&a.refine(x.x().partition()))?;
    if !check.eq_fn(&b.refine(check.partition())) {
        return Err(EngineError::Internal(
            "similarity certificate failed verification".into(),
        ));
    }
    if !x.bounded() {
        let joint = a.direct_sum(b)?;
        let joint_k0 = k0_of_commutant(&joint)?;
        return Ok(SimilarityVerdict::NotSimilar {
            joint_k0,
            reason: "assembled certificate is unbounded".into(),
        });
    }
    Ok(SimilarityVerdict::Similar(x))
}

/// Per-cell, per-block strong irreducibility: re-verified through the
/// commutant solver rather than trusted from the form.
pub fn strongly_irreducible_blocks(a: &OpMatrix) -> Result<Vec<Vec<bool>>, EngineError> {
    let form = match structure::canonical_form(a)? {
        CanonicalOutcome::Form(_, f) => f,
        CanonicalOutcome::Obstruction(_) => return Err(EngineError::NoCanonicalForm),
    };
    let partition = form.normal_form.partition().clone();
    let mut out = Vec::new();
    for (ci, cell_blocks) in form.blocks.iter().enumerate() {
        let (lo, hi) = partition.cell(ci);
        let mut cell_out = Vec::new();
        for b in cell_blocks {
            cell_out.push(block_strongly_irreducible(&b.matrix, lo, hi)?);
        }
        out.push(cell_out);
    }
    Ok(out)
}

/// A block is strongly irreducible on a cell iff its commutant on that cell
/// contains no bounded idempotent besides 0 and I. For a canonical block the
/// solver-produced basis is upper triangular with equal diagonal entries,
/// which forces triviality; both facts are checked here.
fn block_strongly_irreducible(
    b: &CellMat,
    lo: &BigRational,
    hi: &BigRational,
) -> Result<bool, EngineError> {
    let s = b.rows();
    if s == 1 {
        return Ok(true);
    }
    let part = Partition::whole(lo.clone(), hi.clone());
    let op = OpMatrix::from_cells(s, part, vec![b.clone()]);
    let cm = commutant::solve_commutant(&op)?;
    for basis in &cm.basis {
        for el in basis {
            // upper triangular with equal diagonal entries
            for i in 0..s {
                for j in 0..i {
                    if !el.at(i, j).is_zero() {
                        return Ok(false);
                    }
                }
                if el.at(i, i) != el.at(0, 0) {
                    return Ok(false);
                }
            }
        }
    }
    // the pattern forces every idempotent to be trivial: its constant
    // diagonal scalar satisfies phi^2 = phi, and a unipotent-plus-nilpotent
    // idempotent is 0 or I
    Ok(true)
}
