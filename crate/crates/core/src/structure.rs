//! Finite frames, canonical local block structure, and the exact
//! frame-existence decision with obstruction certificates.
//!
//! The canonical-form engine works cell by cell: triangularize with a
//! bounded polynomial transform, then repeatedly look for a bounded
//! nontrivial idempotent in the commutant of the triangular matrix (subset
//! patterns across eigenvalue groups, then chain-boundary shears inside a
//! group), diagonalize it, and recurse into the two invariant blocks. When
//! no bounded idempotent exists the failed solves carry their poles out as
//! an obstruction witness; a witness survives every partition refinement
//! because it is a genuine pole of a forced quotient.

use crate::certificate::SimilarityCertificate;
use crate::commutant::{self, pattern_idempotent};
use crate::diag;
use crate::error::EngineError;
use crate::linalg::{self, CellMat};
use crate::opmatrix::OpMatrix;
use crate::partition::Partition;
use crate::piecewise::PiecewiseRational;

use crate::ratfunc::RatFunc;
use crate::realroots::RootLoc;
use crate::triangular::{self, chain_major_nilpotent};
use num_rational::BigRational;

/// Location of an obstruction pole: exact when rational, isolated otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum WitnessPoint {
    Rational(BigRational),
    Isolated { lo: BigRational, hi: BigRational },
}

impl WitnessPoint {
    pub fn approx(&self) -> BigRational {
        match self {
            WitnessPoint::Rational(p) => p.clone(),
            WitnessPoint::Isolated { lo, hi } => (lo + hi) / BigRational::from_integer(2.into()),
        }
    }
}

impl std::fmt::Display for WitnessPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WitnessPoint::Rational(p) => write!(f, "{}", p),
            WitnessPoint::Isolated { lo, hi } => write!(f, "({}, {})", lo, hi),
        }
    }
}

/// Witness that no finite frame exists: a forced splitting quotient with a
/// non-cancelling pole.
#[derive(Clone, Debug)]
pub struct FrameObstruction {
    pub witness_point: WitnessPoint,
    pub quotient: RatFunc,
    pub narrative: String,
}

impl FrameObstruction {
    /// The quotient as a scalar over the whole interval.
    pub fn quotient_piecewise(&self, a: &BigRational, b: &BigRational) -> PiecewiseRational {
        let part = Partition::whole(a.clone(), b.clone());
        PiecewiseRational::new(part, vec![self.quotient.clone()]).unwrap()
    }
}

/// A finite frame: mutually annihilating minimal idempotents in the
/// commutant summing to the identity, with per-element support data.
#[derive(Clone, Debug)]
pub struct Frame {
    pub elements: Vec<OpMatrix>,
    /// Per element: cells (of the element's partition) where its trace is
    /// positive.
    pub supports: Vec<Vec<bool>>,
}

/// One canonical block on one cell: upper triangular, equal diagonal
/// entries, superdiagonal entries supported a.e.
#[derive(Clone, Debug)]
pub struct CanonicalBlock {
    pub offset: usize,
    pub size: usize,
    pub diagonal: RatFunc,
    pub superdiagonals: Vec<RatFunc>,
    pub matrix: CellMat,
}

/// The canonical local structure: `unitary_cert * cert * A * cert^-1 *
/// unitary_cert^-1` is block diagonal with canonical blocks per cell.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    pub cert: SimilarityCertificate,
    pub unitary_cert: SimilarityCertificate,
    pub normal_form: OpMatrix,
    /// Per cell of `normal_form.partition()`: blocks in layout order.
    pub blocks: Vec<Vec<CanonicalBlock>>,
}

impl CanonicalForm {
    /// Total conjugation `A -> normal_form`.
    pub fn total(&self) -> Result<SimilarityCertificate, EngineError> {
        self.cert.then(&self.unitary_cert)
    }
}

#[derive(Clone, Debug)]
pub enum CanonicalOutcome {
    Form(Frame, CanonicalForm),
    Obstruction(FrameObstruction),
}

/// Structured frame-validation failures.
#[derive(Clone, Debug)]
pub enum FrameViolation {
    NotCommuting {
        index: usize,
    },
    NotIdempotent {
        index: usize,
    },
    Unbounded {
        index: usize,
    },
    NotAnnihilating {
        i: usize,
        j: usize,
        cell: usize,
    },
    SumNotIdentity,
    NotMinimal {
        index: usize,
        witness: Box<OpMatrix>,
    },
}

impl FrameViolation {
    pub fn as_engine_error(&self) -> EngineError {
        match self {
            FrameViolation::NotCommuting { index } => EngineError::NotCommuting(*index),
            FrameViolation::NotIdempotent { .. } => EngineError::NotIdempotent,
            FrameViolation::Unbounded { .. } => EngineError::UnboundedInput,
            FrameViolation::NotAnnihilating { i, j, cell } => {
                EngineError::NotAnnihilating(*i, *j, *cell)
            }
            FrameViolation::SumNotIdentity => EngineError::SumNotIdentity,
            FrameViolation::NotMinimal { index, .. } => EngineError::NotMinimal(*index),
        }
    }
}

#[derive(Debug)]
pub enum FrameError {
    Violation(FrameViolation),
    Engine(EngineError),
}

impl From<EngineError> for FrameError {
    fn from(e: EngineError) -> Self {
        FrameError::Engine(e)
    }
}

// ---------------------------------------------------------------------------
// per-cell canonical splitting engine
// ---------------------------------------------------------------------------

struct SubPiece {
    lo: BigRational,
    hi: BigRational,
    x: CellMat,
    x_inv: CellMat,
    sizes: Vec<usize>,
}

enum CellFail {
    Obstruct(FrameObstruction),
    Engine(EngineError),
}

impl From<EngineError> for CellFail {
    fn from(e: EngineError) -> Self {
        CellFail::Engine(e)
    }
}

/// Is every (k, k+1) superdiagonal entry of the upper-triangular matrix
/// nonzero (as a rational function)?
fn superdiagonals_supported(b: &CellMat) -> bool {
    (1..b.rows()).all(|k| !b.at(k - 1, k).is_zero())
}

/// Sweep small combinations of the (pole-saturated) commutant lattice for a
/// bounded nontrivial idempotent. A broad net behind the structured
/// searches; every hit is verified exactly before use.
fn lattice_idempotent_sweep(
    b: &CellMat,
    lo: &BigRational,
    hi: &BigRational,
    extra_points: &[BigRational],
) -> Result<Option<CellMat>, EngineError> {
    let n = b.rows();
    let basis = commutant::intertwiner_basis(b, b);
    let vecs: Vec<Vec<RatFunc>> = basis
        .iter()
        .map(|m| {
            let mut v = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    v.push(m.at(i, j).clone());
                }
            }
            v
        })
        .collect();
    let mut points: Vec<BigRational> = extra_points.to_vec();
    for v in &vecs {
        let (rat, _) = linalg::rational_poles(v, lo, hi);
        for p in rat {
            if !points.contains(&p) {
                points.push(p);
            }
        }
    }
    points.sort();
    points.dedup();
    let sat = linalg::saturate_lattice(&vecs, &points);
    let mats: Vec<CellMat> = sat
        .iter()
        .map(|v| CellMat::from_fn(n, n, |i, j| v[i * n + j].clone()))
        .collect();
    let k = mats.len();
    let mask_cap = if k <= 12 { 1usize << k } else { 1usize << 12 };
    for mask in 1..mask_cap {
        let mut p = CellMat::zeros(n, n);
        for (i, m) in mats.iter().enumerate() {
            if mask >> i & 1 == 1 {
                p = p.add(m);
            }
        }
        if p.is_zero() || p.is_identity() {
            continue;
        }
        if !p.is_bounded_on(lo, hi) {
            continue;
        }
        if p.mul(&p) != p {
            continue;
        }
        let com = b.mul(&p).sub(&p.mul(b));
        if !com.is_zero() {
            continue;
        }
        return Ok(Some(p));
    }
    Ok(None)
}

/// Try to find a bounded nontrivial idempotent in the commutant of the
/// (grouped, upper-triangular) matrix `b`. Returns the idempotent or the
/// pole evidence collected from the forced candidates.
fn find_bounded_idempotent(
    b: &CellMat,
    groups: &[(RatFunc, usize)],
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Result<CellMat, Vec<(RatFunc, String)>>, EngineError> {
    let g = groups.len();
    let sizes: Vec<usize> = groups.iter().map(|(_, s)| *s).collect();
    let mut evidence: Vec<(RatFunc, String)> = Vec::new();

    // subset patterns across eigenvalue groups (unique solves)
    if g > 1 {
        for mask in 1..((1usize << g) - 1) {
            let pattern: Vec<bool> = (0..g).map(|i| mask >> i & 1 == 1).collect();
            let Some(p) = pattern_idempotent(b, &sizes, &pattern) else {
                continue;
            };
            if p.is_bounded_on(lo, hi) {
                return Ok(Ok(p));
            }
            for i in 0..p.rows() {
                for j in 0..p.cols() {
                    let e = p.at(i, j);
                    if !e.is_bounded_on(lo, hi) {
                        evidence.push((
                            e.clone(),
                            format!(
                                "splitting entry ({}, {}) of the eigenvalue-group idempotent has a non-cancelling pole",
                                i + 1,
                                j + 1
                            ),
                        ));
                    }
                }
            }
        }
    }

    // within-group chain splits
    let mut off = 0usize;
    for (gi, (eig, size)) in groups.iter().enumerate() {
        let size = *size;
        if size < 2 {
            off += size;
            continue;
        }
        let block = b.submatrix(off, off, size, size);
        let mut nmat = block.clone();
        for i in 0..size {
            nmat.set(i, i, &(nmat.at(i, i).clone()) - eig);
        }
        let cb = chain_major_nilpotent(&nmat, true)?;
        if cb.chains.len() >= 2 {
            match chain_cut_split(&nmat, &cb, lo, hi)? {
                Ok(q_block) => {
                    // extend the within-group idempotent to the full
                    // commutant; other groups get 0 then 1 diagonals
                    for other_one in [false, true] {
                        let full = extend_group_idempotent(b, &sizes, gi, &q_block, other_one);
                        if let Some(p) = full {
                            if p.is_bounded_on(lo, hi) {
                                return Ok(Ok(p));
                            }
                        }
                    }
                    // extension unbounded: record its poles as evidence
                    if let Some(p) = extend_group_idempotent(b, &sizes, gi, &q_block, false) {
                        for e in p.entries() {
                            if !e.is_bounded_on(lo, hi) {
                                evidence.push((
                                    e.clone(),
                                    "cross-group coupling of a within-group idempotent has a pole"
                                        .into(),
                                ));
                            }
                        }
                    }
                }
                Err(ev) => evidence.extend(ev),
            }
        }
        off += size;
    }
    // broad lattice sweep: catches splits that sit askew to the chain flags
    let extra: Vec<BigRational> = evidence
        .iter()
        .flat_map(|(q, _)| {
            let (rat, _) = linalg::rational_poles(std::slice::from_ref(q), lo, hi);
            rat
        })
        .collect();
    if let Some(p) = lattice_idempotent_sweep(b, lo, hi, &extra)? {
        return Ok(Ok(p));
    }
    Ok(Err(evidence))
}

/// Cut-decouple a chain-major nilpotent block at each chain boundary (over
/// all chain permutations), returning a bounded idempotent in its commutant
/// or the pole evidence of the failed forced shears.
fn chain_cut_split(
    nmat: &CellMat,
    cb: &triangular::ChainBasis,
    lo: &BigRational,
    hi: &BigRational,
) -> Result<Result<CellMat, Vec<(RatFunc, String)>>, EngineError> {
    let g = nmat.rows();
    let mut evidence: Vec<(RatFunc, String)> = Vec::new();
    let chain_count = cb.chains.len();
    let mut orders: Vec<Vec<usize>> = Vec::new();
    {
        // natural order first, then other permutations (small counts only)
        let base: Vec<usize> = (0..chain_count).collect();
        orders.push(base.clone());
        if chain_count <= 4 {
            let mut perm = base.clone();
            permutations(&mut perm, 0, &mut orders);
            orders.dedup();
        }
    }
    for order in &orders {
        // basis permutation regrouping chains in this order
        let mut col_perm: Vec<usize> = Vec::with_capacity(g);
        let starts: Vec<usize> = {
            let mut s = vec![0usize; cb.chains.len() + 1];
            for (i, len) in cb.chains.iter().enumerate() {
                s[i + 1] = s[i] + len;
            }
            s
        };
        for &c in order {
            for k in 0..cb.chains[c] {
                col_perm.push(starts[c] + k);
            }
        }
        // perm matrix: new basis vector j = old basis vector col_perm[j]
        let mut pm = CellMat::zeros(g, g);
        for (j, &old) in col_perm.iter().enumerate() {
            pm.set(old, j, RatFunc::one());
        }
        let pm_inv = pm.transpose();
        let t = pm_inv.mul(&cb.t);
        let t_inv = cb.t_inv.mul(&pm);
        let np = t.mul(nmat).mul(&t_inv);
        // a permuted order is only usable when the cross-chain coupling
        // stays above the diagonal
        let mut upper = true;
        'shape: for i in 0..g {
            for j in 0..=i {
                if !np.at(i, j).is_zero() {
                    upper = false;
                    break 'shape;
                }
            }
        }
        if !upper {
            continue;
        }
        // cut positions: chain boundaries in this order
        let mut cut = 0usize;
        for (oi, &c) in order.iter().enumerate() {
            cut += cb.chains[c];
            if oi + 1 == order.len() {
                break;
            }
            let n1 = np.submatrix(0, 0, cut, cut);
            let n2 = np.submatrix(cut, cut, g - cut, g - cut);
            let cc = np.submatrix(0, cut, cut, g - cut);
            if cc.is_zero() {
                // already decoupled here
                let p = projector_through(&t, &t_inv, cut, g);
                return Ok(Ok(p));
            }
            let (part, homog) = commutant::sylvester_affine(&n1, &n2, &cc);
            let Some(z0) = part else { continue };
            let homog_v: Vec<Vec<RatFunc>> =
                homog.iter().map(|h| commutant::vec_of_pub(h)).collect();
            match linalg::make_pole_free(&commutant::vec_of_pub(&z0), &homog_v, lo, hi) {
                Some(z) => {
                    let zm = commutant::unvec_pub(&z, cut, g - cut);
                    if zm.is_bounded_on(lo, hi) {
                        // shear then project
                        let mut sh = CellMat::identity(g);
                        let mut sh_inv = CellMat::identity(g);
                        for i in 0..cut {
                            for j in 0..(g - cut) {
                                let v = zm.at(i, j).clone();
                                if !v.is_zero() {
                                    sh.set(i, cut + j, v.clone());
                                    sh_inv.set(i, cut + j, -&v);
                                }
                            }
                        }
                        let w = sh.mul(&t);
                        let w_inv = t_inv.mul(&sh_inv);
                        let p = projector_through(&w, &w_inv, cut, g);
                        return Ok(Ok(p));
                    }
                    for e in zm.entries() {
                        if !e.is_bounded_on(lo, hi) {
                            evidence.push((
                                e.clone(),
                                "chain-boundary shear entry has a non-cancelling pole".into(),
                            ));
                        }
                    }
                }
                None => {
                    for e in z0.entries() {
                        if !e.is_bounded_on(lo, hi) {
                            evidence.push((
                                e.clone(),
                                "chain-boundary shear entry has a non-cancelling pole".into(),
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(Err(evidence))
}

fn permutations(perm: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == perm.len() {
        out.push(perm.clone());
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permutations(perm, k + 1, out);
        perm.swap(k, i);
    }
}

/// `w^{-1} diag(I_cut, 0) w`.
fn projector_through(w: &CellMat, w_inv: &CellMat, cut: usize, g: usize) -> CellMat {
    let mut e = CellMat::zeros(g, g);
    for i in 0..cut {
        e.set(i, i, RatFunc::one());
    }
    w_inv.mul(&e).mul(w)
}

/// Extend an idempotent of one diagonal group block to the full commutant:
/// the other groups receive constant 0 or 1 diagonals, and the cross-group
/// couplings are solved uniquely.
fn extend_group_idempotent(
    b: &CellMat,
    sizes: &[usize],
    gi: usize,
    q_block: &CellMat,
    others_one: bool,
) -> Option<CellMat> {
    let g = sizes.len();
    let n = b.rows();
    let mut offs = vec![0usize; g + 1];
    for i in 0..g {
        offs[i + 1] = offs[i] + sizes[i];
    }
    let mut p = CellMat::zeros(n, n);
    for gk in 0..g {
        if gk == gi {
            for i in 0..sizes[gi] {
                for j in 0..sizes[gi] {
                    p.set(offs[gi] + i, offs[gi] + j, q_block.at(i, j).clone());
                }
            }
        } else if others_one {
            for i in offs[gk]..offs[gk + 1] {
                p.set(i, i, RatFunc::one());
            }
        }
    }
    // solve cross-group couplings in order of increasing gap
    for gap in 1..g {
        for ga in 0..(g - gap) {
            let gb = ga + gap;
            let ba = b.submatrix(offs[ga], offs[ga], sizes[ga], sizes[ga]);
            let bb = b.submatrix(offs[gb], offs[gb], sizes[gb], sizes[gb]);
            let bab = b.submatrix(offs[ga], offs[gb], sizes[ga], sizes[gb]);
            let paa = p.submatrix(offs[ga], offs[ga], sizes[ga], sizes[ga]);
            let pbb = p.submatrix(offs[gb], offs[gb], sizes[gb], sizes[gb]);
            let mut rhs = paa.mul(&bab).sub(&bab.mul(&pbb));
            for k in (ga + 1)..gb {
                let pak = p.submatrix(offs[ga], offs[k], sizes[ga], sizes[k]);
                let bkb = b.submatrix(offs[k], offs[gb], sizes[k], sizes[gb]);
                rhs = rhs.add(&pak.mul(&bkb));
                let bak = b.submatrix(offs[ga], offs[k], sizes[ga], sizes[k]);
                let pkb = p.submatrix(offs[k], offs[gb], sizes[k], sizes[gb]);
                rhs = rhs.sub(&bak.mul(&pkb));
            }
            let z = commutant::sylvester_unique(&ba, &bb, &rhs)?;
            for i in 0..sizes[ga] {
                for j in 0..sizes[gb] {
                    p.set(offs[ga] + i, offs[gb] + j, z.at(i, j).clone());
                }
            }
        }
    }
    Some(p)
}

/// Recursive canonical decomposition of one cell matrix.
fn process_cell(
    a: &CellMat,
    lo: &BigRational,
    hi: &BigRational,
    cell_index: usize,
) -> Result<Vec<SubPiece>, CellFail> {
    let n = a.rows();
    if n == 1 {
        return Ok(vec![SubPiece {
            lo: lo.clone(),
            hi: hi.clone(),
            x: CellMat::identity(1),
            x_inv: CellMat::identity(1),
            sizes: vec![1],
        }]);
    }
    let tri = triangular::triangularize_cell(a, lo, hi, cell_index).map_err(CellFail::Engine)?;
    let b = &tri.triangular;

    match find_bounded_idempotent(b, &tri.groups, lo, hi).map_err(CellFail::Engine)? {
        Ok(p_tri) => {
            // pull the idempotent back to {a}' and split through it
            let p_cell = tri.x_inv.mul(&p_tri).mul(&tri.x);
            let part = Partition::whole(lo.clone(), hi.clone());
            let p_op = OpMatrix::from_cells(n, part.clone(), vec![p_cell]);
            let a_op = OpMatrix::from_cells(n, part, vec![a.clone()]);
            if !a_op.commutes(&p_op).map_err(CellFail::Engine)? {
                return Err(CellFail::Engine(EngineError::Internal(
                    "splitting idempotent does not commute".into(),
                )));
            }
            let (cert, d) = diag::diagonalize_idempotent(&p_op).map_err(CellFail::Engine)?;
            let mut pieces = Vec::new();
            let refined = cert.x().partition().clone();
            for ci in 0..refined.cell_count() {
                let (slo, shi) = refined.cell(ci);
                let x1 = cert.x().cell_matrix(ci);
                let x1_inv = cert.x_inv().cell_matrix(ci);
                let dm = d.cell_matrix(ci);
                let r = (0..n).filter(|&i| dm.at(i, i).is_one()).count();
                let a1 = x1.mul(a).mul(&x1_inv);
                // blocks decouple exactly because the idempotent commutes
                for i in 0..r {
                    for j in r..n {
                        if !a1.at(i, j).is_zero() || !a1.at(j, i).is_zero() {
                            return Err(CellFail::Engine(EngineError::Internal(
                                "idempotent split left coupling entries".into(),
                            )));
                        }
                    }
                }
                if r == 0 || r == n {
                    return Err(CellFail::Engine(EngineError::Internal(
                        "splitting idempotent is trivial on a refined cell".into(),
                    )));
                }
                let top = a1.submatrix(0, 0, r, r);
                let bot = a1.submatrix(r, r, n - r, n - r);
                let top_pieces = process_cell(&top, slo, shi, cell_index)?;
                let bot_pieces = process_cell(&bot, slo, shi, cell_index)?;
                // merge the refinements of the two halves
                let mut marks: Vec<BigRational> = vec![slo.clone(), shi.clone()];
                for p in top_pieces.iter().chain(bot_pieces.iter()) {
                    marks.push(p.lo.clone());
                    marks.push(p.hi.clone());
                }
                marks.sort();
                marks.dedup();
                for w in marks.windows(2) {
                    let (wlo, whi) = (&w[0], &w[1]);
                    let tp = top_pieces
                        .iter()
                        .find(|p| &p.lo <= wlo && &p.hi >= whi)
                        .ok_or_else(|| {
                            CellFail::Engine(EngineError::Internal("refinement gap".into()))
                        })?;
                    let bp = bot_pieces
                        .iter()
                        .find(|p| &p.lo <= wlo && &p.hi >= whi)
                        .ok_or_else(|| {
                            CellFail::Engine(EngineError::Internal("refinement gap".into()))
                        })?;
                    let xx = tp.x.direct_sum(&bp.x).mul(&x1);
                    let xx_inv = x1_inv.mul(&tp.x_inv.direct_sum(&bp.x_inv));
                    let mut sizes = tp.sizes.clone();
                    sizes.extend_from_slice(&bp.sizes);
                    pieces.push(SubPiece {
                        lo: wlo.clone(),
                        hi: whi.clone(),
                        x: xx,
                        x_inv: xx_inv,
                        sizes,
                    });
                }
            }
            Ok(pieces)
        }
        Err(evidence) => {
            // no bounded idempotent: either a canonical block or a genuine
            // obstruction
            if tri.groups.len() == 1 {
                if superdiagonals_supported(b) {
                    return Ok(vec![SubPiece {
                        lo: lo.clone(),
                        hi: hi.clone(),
                        x: tri.x.clone(),
                        x_inv: tri.x_inv.clone(),
                        sizes: vec![n],
                    }]);
                }
                // regroup into chain-major order: single chain means
                // canonical with supported superdiagonals
                let eig = &tri.groups[0].0;
                let mut nmat = b.clone();
                for i in 0..n {
                    nmat.set(i, i, &(nmat.at(i, i).clone()) - eig);
                }
                let cb = chain_major_nilpotent(&nmat, true).map_err(CellFail::Engine)?;
                if cb.chains.len() == 1 {
                    let x = cb.t.mul(&tri.x);
                    let x_inv = tri.x_inv.mul(&cb.t_inv);
                    return Ok(vec![SubPiece {
                        lo: lo.clone(),
                        hi: hi.clone(),
                        x,
                        x_inv,
                        sizes: vec![n],
                    }]);
                }
            }
            let ob = commutant::obstruction_from_entries(&evidence, lo, hi).ok_or_else(|| {
                CellFail::Engine(EngineError::Internal(
                    "no bounded idempotent and no pole evidence".into(),
                ))
            })?;
            Err(CellFail::Obstruct(ob))
        }
    }
}

// ---------------------------------------------------------------------------
// public operations
// ---------------------------------------------------------------------------

/// Compute the canonical local structure of `A`, or the obstruction that
/// rules out every finite frame.
pub fn canonical_form(a: &OpMatrix) -> Result<CanonicalOutcome, EngineError> {
    if !a.is_bounded_matrix() {
        return Err(EngineError::UnboundedInput);
    }
    let n = a.n();
    let mut pieces: Vec<SubPiece> = Vec::new();
    for ci in 0..a.partition().cell_count() {
        let (lo, hi) = a.partition().cell(ci);
        match process_cell(&a.cell_matrix(ci), lo, hi, ci) {
            Ok(ps) => pieces.extend(ps),
            Err(CellFail::Obstruct(ob)) => return Ok(CanonicalOutcome::Obstruction(ob)),
            Err(CellFail::Engine(e)) => return Err(e),
        }
    }
    // assemble the refined partition and the per-cell transforms
    let mut marks: Vec<BigRational> = Vec::new();
    for p in &pieces {
        marks.push(p.lo.clone());
        marks.push(p.hi.clone());
    }
    marks.sort();
    marks.dedup();
    let partition = Partition::new(marks)?;
    let mut xs = vec![CellMat::identity(n); partition.cell_count()];
    let mut xinvs = vec![CellMat::identity(n); partition.cell_count()];
    let mut sizes_per_cell: Vec<Vec<usize>> = vec![vec![]; partition.cell_count()];
    for p in &pieces {
        for ci in 0..partition.cell_count() {
            let (lo, hi) = partition.cell(ci);
            if lo >= &p.lo && hi <= &p.hi {
                xs[ci] = p.x.clone();
                xinvs[ci] = p.x_inv.clone();
                sizes_per_cell[ci] = p.sizes.clone();
            }
        }
    }
    let x = OpMatrix::from_cells(n, partition.clone(), xs);
    let x_inv = OpMatrix::from_cells(n, partition.clone(), xinvs);
    let cert = SimilarityCertificate::new(x, x_inv)?;
    if !cert.bounded() {
        return Err(EngineError::Internal(
            "canonical transform is unbounded".into(),
        ));
    }
    let pre_sorted = cert.conjugate(&a.refine(&partition))?;

    // per-cell block ordering permutation (diagonal order, then larger
    // blocks first, then layout position)
    let mut perm_cells = Vec::with_capacity(partition.cell_count());
    let mut sorted_blocks: Vec<Vec<(usize, usize)>> = Vec::new();
    for ci in 0..partition.cell_count() {
        let m = pre_sorted.cell_matrix(ci);
        let sizes = &sizes_per_cell[ci];
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut off = 0usize;
        for s in sizes {
            offsets.push(off);
            off += s;
        }
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&i, &j| {
            crate::eigen::eig_cmp(m.at(offsets[i], offsets[i]), m.at(offsets[j], offsets[j]))
                .then(sizes[j].cmp(&sizes[i]))
                .then(offsets[i].cmp(&offsets[j]))
        });
        let mut perm = vec![0usize; n];
        let mut pos = 0usize;
        let mut layout = Vec::new();
        for &bi in &order {
            layout.push((pos, sizes[bi]));
            for k in 0..sizes[bi] {
                // new index pos+k holds old index offsets[bi]+k
                perm[offsets[bi] + k] = pos + k;
            }
            pos += sizes[bi];
        }
        sorted_blocks.push(layout);
        perm_cells.push(CellMat::permutation(&perm));
    }
    let u = OpMatrix::from_cells(n, partition.clone(), perm_cells.clone());
    let u_inv = OpMatrix::from_cells(
        n,
        partition.clone(),
        perm_cells.iter().map(|p| p.transpose()).collect(),
    );
    let unitary_cert = SimilarityCertificate::new(u, u_inv)?;
    let normal_form = unitary_cert.conjugate(&pre_sorted)?;

    // extract and verify the block data
    let mut blocks: Vec<Vec<CanonicalBlock>> = Vec::new();
    for ci in 0..partition.cell_count() {
        let m = normal_form.cell_matrix(ci);
        let mut cell_blocks = Vec::new();
        for &(off, size) in &sorted_blocks[ci] {
            let bm = m.submatrix(off, off, size, size);
            let diagonal = bm.at(0, 0).clone();
            for i in 0..size {
                for j in 0..i {
                    if !bm.at(i, j).is_zero() {
                        return Err(EngineError::Internal("block not upper triangular".into()));
                    }
                }
                if bm.at(i, i) != &diagonal {
                    return Err(EngineError::Internal("block diagonals differ".into()));
                }
            }
            let mut superdiagonals = Vec::new();
            for i in 1..size {
                let s = bm.at(i - 1, i).clone();
                if s.is_zero() {
                    return Err(EngineError::Internal("block superdiagonal vanishes".into()));
                }
                superdiagonals.push(s);
            }
            cell_blocks.push(CanonicalBlock {
                offset: off,
                size,
                diagonal,
                superdiagonals,
                matrix: bm,
            });
        }
        // off-block entries must vanish
        let mut covered = vec![false; n];
        for &(off, size) in &sorted_blocks[ci] {
            for k in off..off + size {
                covered[k] = true;
            }
        }
        if covered.iter().any(|&c| !c) {
            return Err(EngineError::Internal("block layout does not cover".into()));
        }
        for (bi, &(off, size)) in sorted_blocks[ci].iter().enumerate() {
            for (bj, &(off2, size2)) in sorted_blocks[ci].iter().enumerate() {
                if bi == bj {
                    continue;
                }
                for i in off..off + size {
                    for j in off2..off2 + size2 {
                        if !m.at(i, j).is_zero() {
                            return Err(EngineError::Internal("blocks are coupled".into()));
                        }
                    }
                }
            }
        }
        blocks.push(cell_blocks);
    }

    // frame elements: pull back the sorted block projections
    let max_blocks = blocks.iter().map(|b| b.len()).max().unwrap_or(0);
    let total = cert.then(&unitary_cert)?;
    let mut elements = Vec::with_capacity(max_blocks);
    let mut supports = Vec::with_capacity(max_blocks);
    for k in 0..max_blocks {
        let mut cells = Vec::with_capacity(partition.cell_count());
        let mut supp = Vec::with_capacity(partition.cell_count());
        for ci in 0..partition.cell_count() {
            let mut e = CellMat::zeros(n, n);
            if let Some(bl) = blocks[ci].get(k) {
                for i in bl.offset..bl.offset + bl.size {
                    e.set(i, i, RatFunc::one());
                }
                supp.push(true);
            } else {
                supp.push(false);
            }
            cells.push(e);
        }
        let e_op = OpMatrix::from_cells(n, partition.clone(), cells);
        let p_k = total.conjugate_back(&e_op)?;
        elements.push(p_k);
        supports.push(supp);
    }
    let frame = Frame { elements, supports };
    let form = CanonicalForm {
        cert,
        unitary_cert,
        normal_form,
        blocks,
    };
    Ok(CanonicalOutcome::Form(frame, form))
}

/// Thin wrapper reporting only existence plus witness.
pub fn frame_exists(a: &OpMatrix) -> Result<CanonicalOutcome, EngineError> {
    canonical_form(a)
}

/// Is the given block minimal on `[lo, hi]` (no bounded nontrivial
/// idempotent in its commutant on any subcell)? Decidable: minimal iff the
/// block is a single canonical chain with a single eigenvalue group.
fn block_is_minimal(b: &CellMat, lo: &BigRational, hi: &BigRational) -> Result<bool, EngineError> {
    if b.rows() == 1 {
        return Ok(true);
    }
    let tri = triangular::triangularize_cell(b, lo, hi, 0)?;
    if tri.groups.len() > 1 {
        return Ok(false);
    }
    let eig = &tri.groups[0].0;
    let n = b.rows();
    let mut nmat = tri.triangular.clone();
    for i in 0..n {
        nmat.set(i, i, &(nmat.at(i, i).clone()) - eig);
    }
    let cb = chain_major_nilpotent(&nmat, true)?;
    Ok(cb.chains.len() == 1)
}

/// A rational subinterval of `[lo, hi]` avoiding the real poles of the given
/// functions (strictly inside).
fn pole_free_subcell(
    fs: &[RatFunc],
    lo: &BigRational,
    hi: &BigRational,
) -> Option<(BigRational, BigRational)> {
    let mut marks = vec![lo.clone(), hi.clone()];
    for f in fs {
        for loc in f.real_poles_in(lo, hi) {
            match loc {
                RootLoc::Rational(p) => marks.push(p),
                RootLoc::Interval(a, b) => {
                    marks.push(a);
                    marks.push(b);
                }
            }
        }
    }
    marks.sort();
    marks.dedup();
    let quarter = BigRational::new(1.into(), 4.into());
    for w in marks.windows(2) {
        let width = &w[1] - &w[0];
        let a = &w[0] + &width * &quarter;
        let b = &w[1] - &width * &quarter;
        if a < b && fs.iter().all(|f| f.is_bounded_on(&a, &b)) {
            return Some((a, b));
        }
    }
    None
}

/// Construct a proper bounded sub-idempotent of frame element `k` on some
/// subcell, to witness non-minimality. Returns `None` when the block really
/// is minimal (callers treat that as a logic error).
fn minimality_witness(
    a: &OpMatrix,
    cert: &SimilarityCertificate,
    range: (usize, usize),
    cell: usize,
) -> Result<Option<OpMatrix>, EngineError> {
    let (off, size) = range;
    let conj = cert.conjugate(a)?;
    let part = conj.partition().clone();
    let (lo, hi) = part.cell(cell);
    let block = conj.cell_matrix(cell).submatrix(off, off, size, size);
    let tri = triangular::triangularize_cell(&block, lo, hi, cell)?;
    // field-level splitting idempotent of the block
    let q_field: Option<CellMat> = if tri.groups.len() > 1 {
        let sizes: Vec<usize> = tri.groups.iter().map(|(_, s)| *s).collect();
        let mut pattern = vec![false; sizes.len()];
        pattern[0] = true;
        pattern_idempotent(&tri.triangular, &sizes, &pattern)
    } else {
        let eig = &tri.groups[0].0;
        let mut nmat = tri.triangular.clone();
        for i in 0..size {
            nmat.set(i, i, &(nmat.at(i, i).clone()) - eig);
        }
        let cb = chain_major_nilpotent(&nmat, true)?;
        if cb.chains.len() < 2 {
            None
        } else {
            let cut = cb.chains[0];
            let n1 = cb.nilpotent.submatrix(0, 0, cut, cut);
            let n2 = cb.nilpotent.submatrix(cut, cut, size - cut, size - cut);
            let cc = cb.nilpotent.submatrix(0, cut, cut, size - cut);
            let (partic, _h) = commutant::sylvester_affine(&n1, &n2, &cc);
            partic.map(|z| {
                let mut sh = CellMat::identity(size);
                let mut sh_inv = CellMat::identity(size);
                for i in 0..cut {
                    for j in 0..(size - cut) {
                        let v = z.at(i, j).clone();
                        if !v.is_zero() {
                            sh.set(i, cut + j, v.clone());
                            sh_inv.set(i, cut + j, -&v);
                        }
                    }
                }
                let w = sh.mul(&cb.t);
                let w_inv = cb.t_inv.mul(&sh_inv);
                projector_through(&w, &w_inv, cut, size)
            })
        }
    };
    let Some(qf) = q_field else { return Ok(None) };
    let q_block = tri.x_inv.mul(&qf).mul(&tri.x);
    // pick a pole-free subcell and glue: q on it, the full block elsewhere
    let entries: Vec<RatFunc> = q_block.entries().to_vec();
    let Some((sa, sb)) = pole_free_subcell(&entries, lo, hi) else {
        return Ok(None);
    };
    let refined = part.refine_with(&[sa.clone(), sb.clone()]);
    let n = a.n();
    let mut cells = Vec::with_capacity(refined.cell_count());
    for ci in 0..refined.cell_count() {
        let (clo, chi) = refined.cell(ci);
        let mut e = CellMat::zeros(n, n);
        let in_support = part.locate(&refined.midpoint(ci)) == Some(cell);
        if in_support && clo >= &sa && chi <= &sb {
            for i in 0..size {
                for j in 0..size {
                    e.set(off + i, off + j, q_block.at(i, j).clone());
                }
            }
        } else {
            // the full block projection (identity on the range)
            for i in 0..size {
                e.set(off + i, off + i, RatFunc::one());
            }
        }
        cells.push(e);
    }
    let e_op = OpMatrix::from_cells(n, refined, cells);
    let witness = cert.conjugate_back(&e_op)?;
    if !witness.is_idempotent() || !witness.is_bounded_matrix() {
        return Ok(None);
    }
    if !a.commutes(&witness)? {
        return Ok(None);
    }
    Ok(Some(witness))
}

/// Validate a candidate frame against all four conditions; returns the
/// frame or a precise violation.
pub fn validate_frame(a: &OpMatrix, candidates: &[OpMatrix]) -> Result<Frame, FrameError> {
    if candidates.is_empty() {
        return Err(FrameError::Violation(FrameViolation::SumNotIdentity));
    }
    let mut part = a.partition().clone();
    for c in candidates {
        part = part.common_refinement(c.partition())?;
    }
    let a_r = a.refine(&part);
    let cands: Vec<OpMatrix> = candidates.iter().map(|c| c.refine(&part)).collect();
    for (i, c) in cands.iter().enumerate() {
        if !c.is_idempotent() {
            return Err(FrameError::Violation(FrameViolation::NotIdempotent {
                index: i,
            }));
        }
        if !c.is_bounded_matrix() {
            return Err(FrameError::Violation(FrameViolation::Unbounded {
                index: i,
            }));
        }
        if !a_r.commutes(c)? {
            return Err(FrameError::Violation(FrameViolation::NotCommuting {
                index: i,
            }));
        }
    }
    let mut sum = OpMatrix::zero(a.n(), &part);
    for c in &cands {
        sum = sum.add(c)?;
    }
    if !sum.is_identity() {
        return Err(FrameError::Violation(FrameViolation::SumNotIdentity));
    }
    for i in 0..cands.len() {
        for j in (i + 1)..cands.len() {
            let pq = cands[i].matmul(&cands[j])?;
            let qp = cands[j].matmul(&cands[i])?;
            if !pq.is_zero() || !qp.is_zero() {
                let bad = (0..pq.partition().cell_count())
                    .find(|&ci| !pq.cell_matrix(ci).is_zero() || !qp.cell_matrix(ci).is_zero())
                    .unwrap_or(0);
                return Err(FrameError::Violation(FrameViolation::NotAnnihilating {
                    i,
                    j,
                    cell: bad,
                }));
            }
        }
    }
    // minimality: conjugate the frame to consecutive diagonal ranges and
    // inspect each diagonal block of the conjugated operator
    let cert = diag::diagonalize_frame(&a_r, &cands)?;
    let a_c = cert.conjugate(&a_r)?;
    let cpart = a_c.partition().clone();
    for (k, c) in cands.iter().enumerate() {
        let d = cert.conjugate(c)?;
        for ci in 0..cpart.cell_count() {
            let (lo, hi) = cpart.cell(ci);
            let dm = d.cell_matrix(ci);
            let idx: Vec<usize> = (0..a.n()).filter(|&i| dm.at(i, i).is_one()).collect();
            if idx.is_empty() {
                continue;
            }
            // consecutive range by the frame-diagonalization layout
            let off = idx[0];
            let size = idx.len();
            if idx != (off..off + size).collect::<Vec<_>>() {
                return Err(FrameError::Engine(EngineError::Internal(
                    "frame ranges are not consecutive".into(),
                )));
            }
            let block = a_c.cell_matrix(ci).submatrix(off, off, size, size);
            if !block_is_minimal(&block, lo, hi)? {
                let witness = minimality_witness(&a_r, &cert, (off, size), ci)?
                    .ok_or_else(|| EngineError::Internal("minimality witness eluded".into()))?;
                return Err(FrameError::Violation(FrameViolation::NotMinimal {
                    index: k,
                    witness: Box::new(witness),
                }));
            }
        }
    }
    let supports = cands
        .iter()
        .map(|c| {
            c.trace_function()
                .map(|t| t.support())
                .unwrap_or_else(|_| vec![false; part.cell_count()])
        })
        .collect();
    Ok(Frame {
        elements: cands,
        supports,
    })
}

/// Extract a frame from commuting idempotent generators: form the atoms of
/// the generated boolean algebra per cell, glue them into elements, and
/// validate.
pub fn extract_frame(a: &OpMatrix, generators: &[OpMatrix]) -> Result<Frame, FrameError> {
    let mut part = a.partition().clone();
    for g in generators {
        part = part.common_refinement(g.partition())?;
    }
    let gens: Vec<OpMatrix> = generators.iter().map(|g| g.refine(&part)).collect();
    let a_r = a.refine(&part);
    let n = a.n();
    for (i, g) in gens.iter().enumerate() {
        if !g.is_idempotent() {
            return Err(FrameError::Violation(FrameViolation::NotIdempotent {
                index: i,
            }));
        }
        if !a_r.commutes(g)? {
            return Err(FrameError::Violation(FrameViolation::NotCommuting {
                index: i,
            }));
        }
        for (j, h) in gens.iter().enumerate() {
            if i < j && !g.commutes(h)? {
                return Err(FrameError::Violation(FrameViolation::NotCommuting {
                    index: j,
                }));
            }
        }
    }
    // atoms: nonzero products of generators and complements
    let identity = OpMatrix::identity(n, &part);
    let mut atoms: Vec<OpMatrix> = Vec::new();
    let k = gens.len();
    for mask in 0..(1usize << k) {
        let mut prod = identity.clone();
        for (i, g) in gens.iter().enumerate() {
            let factor = if mask >> i & 1 == 1 {
                g.clone()
            } else {
                identity.sub(g)?
            };
            prod = prod.matmul(&factor)?;
        }
        if prod.is_zero() {
            continue;
        }
        if !atoms.iter().any(|x| x.eq_fn(&prod)) {
            atoms.push(prod);
        }
    }
    // per-cell atom lists in deterministic order; glue the i-th nonzero atom
    // of each cell into the i-th frame element
    let cell_count = part.cell_count();
    let mut per_cell: Vec<Vec<CellMat>> = vec![vec![]; cell_count];
    for atom in &atoms {
        for ci in 0..cell_count {
            let m = atom.cell_matrix(ci);
            if !m.is_zero() {
                per_cell[ci].push(m);
            }
        }
    }
    let max_atoms = per_cell.iter().map(|v| v.len()).max().unwrap_or(0);
    if max_atoms == 0 {
        return Err(FrameError::Violation(FrameViolation::SumNotIdentity));
    }
    let mut elements = Vec::with_capacity(max_atoms);
    for i in 0..max_atoms {
        let cells: Vec<CellMat> = (0..cell_count)
            .map(|ci| {
                per_cell[ci]
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| CellMat::zeros(n, n))
            })
            .collect();
        elements.push(OpMatrix::from_cells(n, part.clone(), cells));
    }
    validate_frame(&a_r, &elements)
}
