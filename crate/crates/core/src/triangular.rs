//! Exact triangularization over the rational-function field.
//!
//! Works one vector at a time: a primitive polynomial eigenvector is
//! completed to a basis by elementary polynomial row operations (constant
//! determinant), the matrix is conjugated, and the procedure recurses on the
//! trailing block. Because every completion is unimodular over the
//! polynomial ring, the composed transform and its inverse are polynomial:
//! bounded on every closed cell by construction.
//!
//! For nilpotent blocks a second pass rebuilds the flag in chain-major
//! order (each generalized-eigenvector chain contiguous, bottom first) with
//! saturated prefixes, which is what the block-splitting machinery needs.

use crate::eigen::{self, eig_cmp};
use crate::error::EngineError;
use crate::linalg::{self, CellMat};
use crate::ratfunc::RatFunc;
use num_rational::BigRational;

/// Result of triangularizing one cell matrix: `x * a * x_inv` is upper
/// triangular with the diagonal grouped into runs of equal eigenvalue
/// functions.
#[derive(Clone, Debug)]
pub struct Triangularization {
    pub x: CellMat,
    pub x_inv: CellMat,
    pub triangular: CellMat,
    /// Diagonal runs: (eigenvalue function, run length), in diagonal order.
    pub groups: Vec<(RatFunc, usize)>,
}

fn is_upper_triangular(a: &CellMat) -> bool {
    for i in 0..a.rows() {
        for j in 0..i {
            if !a.at(i, j).is_zero() {
                return false;
            }
        }
    }
    true
}

/// Diagonal runs of an upper-triangular matrix, or `None` when some
/// eigenvalue reappears in a non-adjacent run (those need regrouping).
fn runs_if_grouped(a: &CellMat) -> Option<Vec<(RatFunc, usize)>> {
    let n = a.rows();
    let mut runs: Vec<(RatFunc, usize)> = Vec::new();
    for i in 0..n {
        let d = a.at(i, i).clone();
        match runs.last_mut() {
            Some((e, len)) if *e == d => *len += 1,
            _ => runs.push((d, 1)),
        }
    }
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            if runs[i].0 == runs[j].0 {
                return None;
            }
        }
    }
    Some(runs)
}

/// Triangularize `a` on the closed cell `[lo, hi]`.
pub fn triangularize_cell(
    a: &CellMat,
    lo: &BigRational,
    hi: &BigRational,
    cell_index: usize,
) -> Result<Triangularization, EngineError> {
    let n = a.rows();
    // already triangular with grouped diagonal: keep the given order
    if is_upper_triangular(a) {
        if let Some(groups) = runs_if_grouped(a) {
            return Ok(Triangularization {
                x: CellMat::identity(n),
                x_inv: CellMat::identity(n),
                triangular: a.clone(),
                groups,
            });
        }
    }

    let eigs = eigen::eigenvalue_functions(a, lo, hi, cell_index)?;
    let mut x = CellMat::identity(n);
    let mut x_inv = CellMat::identity(n);
    let mut cur = a.clone();
    let mut offset = 0usize;
    let mut groups: Vec<(RatFunc, usize)> = Vec::new();
    for (e, mult) in &eigs {
        for _ in 0..*mult {
            let k = n - offset;
            // kernel of (cur - e I)
            let mut shifted = cur.clone();
            for i in 0..k {
                shifted.set(i, i, &(shifted.at(i, i).clone()) - e);
            }
            let ns = shifted.nullspace();
            let v = ns.first().ok_or_else(|| {
                EngineError::Internal("eigenvector vanished during peeling".into())
            })?;
            let vp = linalg::primitive_vector(v);
            let (u, u_inv) = linalg::unimodular_complete(&vp);
            cur = u.mul(&cur).mul(&u_inv);
            // first column is now e * e_1; drop to the trailing block
            let lifted_u = CellMat::identity(offset).direct_sum(&u);
            let lifted_u_inv = CellMat::identity(offset).direct_sum(&u_inv);
            x = lifted_u.mul(&x);
            x_inv = x_inv.mul(&lifted_u_inv);
            cur = cur.submatrix(1, 1, k - 1, k - 1);
            offset += 1;
        }
        groups.push((e.clone(), *mult));
    }
    let triangular = x.mul(a).mul(&x_inv);
    // verify shape
    if !is_upper_triangular(&triangular) {
        return Err(EngineError::Internal(
            "triangularization produced a lower entry".into(),
        ));
    }
    let mut idx = 0;
    for (e, mult) in &groups {
        for _ in 0..*mult {
            if triangular.at(idx, idx) != e {
                return Err(EngineError::Internal("diagonal order mismatch".into()));
            }
            idx += 1;
        }
    }
    Ok(Triangularization {
        x,
        x_inv,
        triangular,
        groups,
    })
}

/// Chain-major basis of a nilpotent matrix: the new matrix is strictly upper
/// triangular, each chain occupies consecutive indices bottom-to-top, the
/// within-chain superdiagonal entries are nonzero a.e., and every chain
/// bottom has a zero column.
#[derive(Clone, Debug)]
pub struct ChainBasis {
    pub t: CellMat,
    pub t_inv: CellMat,
    pub nilpotent: CellMat,
    /// Chain lengths in basis order.
    pub chains: Vec<usize>,
}

/// Matrix power helper.
fn mat_pow(a: &CellMat, k: usize) -> CellMat {
    let mut acc = CellMat::identity(a.rows());
    for _ in 0..k {
        acc = acc.mul(a);
    }
    acc
}

/// Rank of a set of vectors (columns).
fn span_rank(vectors: &[Vec<RatFunc>], dim: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = CellMat::from_fn(dim, vectors.len(), |i, j| vectors[j][i].clone());
    m.rank()
}

/// Build a chain-major Jordan-style basis for a nilpotent cell matrix,
/// longest chains first. The transform is polynomial with saturated flag
/// prefixes (contents divided out at every step).
pub fn chain_major_nilpotent(
    nmat: &CellMat,
    chain_order_longest_first: bool,
) -> Result<ChainBasis, EngineError> {
    let n = nmat.rows();
    // nilpotency index
    let mut s = 0usize;
    {
        let mut p = CellMat::identity(n);
        while !p.is_zero() {
            p = p.mul(nmat);
            s += 1;
            if s > n {
                return Err(EngineError::Internal("matrix is not nilpotent".into()));
            }
        }
    }
    if s == 0 {
        return Ok(ChainBasis {
            t: CellMat::identity(n),
            t_inv: CellMat::identity(n),
            nilpotent: nmat.clone(),
            chains: vec![],
        });
    }

    // field kernels of the powers
    let mut kernels: Vec<Vec<Vec<RatFunc>>> = vec![vec![]];
    for t in 1..=s {
        kernels.push(mat_pow(nmat, t).nullspace());
    }

    // classical chain-top selection over the field, greedy and deterministic
    let mut chains: Vec<Vec<Vec<RatFunc>>> = Vec::new(); // each chain bottom..top
    for depth in (1..=s).rev() {
        // span to avoid: K_{depth-1} plus the depth-`depth` vectors of the
        // chains already chosen
        let mut avoid: Vec<Vec<RatFunc>> = kernels[depth - 1].clone();
        for ch in &chains {
            if ch.len() >= depth {
                avoid.push(ch[depth - 1].clone());
            }
        }
        for cand in &kernels[depth] {
            let cur = span_rank(&avoid, n);
            let mut trial = avoid.clone();
            trial.push(cand.clone());
            if span_rank(&trial, n) <= cur {
                continue;
            }
            // new chain with this top
            let mut chain = Vec::with_capacity(depth);
            let mut v = cand.clone();
            chain.push(v.clone());
            for _ in 1..depth {
                let mut mv = vec![RatFunc::zero(); n];
                for (i, slot) in mv.iter_mut().enumerate() {
                    let mut acc = RatFunc::zero();
                    for j in 0..n {
                        if nmat.at(i, j).is_zero() || v[j].is_zero() {
                            continue;
                        }
                        acc = &acc + &(nmat.at(i, j) * &v[j]);
                    }
                    *slot = acc;
                }
                chain.push(mv.clone());
                v = mv;
            }
            chain.reverse(); // bottom first
            avoid.push(chain[depth - 1].clone());
            chains.push(chain);
        }
    }
    if chain_order_longest_first {
        chains.sort_by(|a, b| b.len().cmp(&a.len()));
    }
    let total: usize = chains.iter().map(|c| c.len()).sum();
    if total != n {
        return Err(EngineError::Internal(format!(
            "chain lengths sum to {} expected {}",
            total, n
        )));
    }

    // process the ordered vectors into a saturated polynomial flag
    let mut t_acc = CellMat::identity(n);
    let mut t_inv_acc = CellMat::identity(n);
    let mut processed = 0usize;
    for chain in &chains {
        for v in chain {
            // current coordinates of v
            let v_cur = t_acc.apply(v);
            // image in the quotient by the first `processed` coordinates
            let tail: Vec<RatFunc> = v_cur[processed..].to_vec();
            let vp = linalg::primitive_vector(&tail);
            let (u, u_inv) = linalg::unimodular_complete(&vp);
            let lifted_u = CellMat::identity(processed).direct_sum(&u);
            let lifted_u_inv = CellMat::identity(processed).direct_sum(&u_inv);
            // we want the new basis vector FIRST in the quotient: u maps the
            // primitive tail to e_1, so the inverse transform carries e_1 to
            // the primitive tail. Compose so that coordinate `processed`
            // follows the chain vector.
            t_acc = lifted_u.mul(&t_acc);
            t_inv_acc = t_inv_acc.mul(&lifted_u_inv);
            processed += 1;
        }
    }
    // here t_acc * (chain vectors, primitivized stepwise) follow e_1, e_2, ...
    let nilpotent = t_acc.mul(nmat).mul(&t_inv_acc);
    // shape verification: strictly upper, chain bottoms have zero columns
    for i in 0..n {
        for j in 0..=i {
            if !nilpotent.at(i, j).is_zero() {
                return Err(EngineError::Internal(
                    "chain basis did not triangularize".into(),
                ));
            }
        }
    }
    // saturation corrections may couple a chain bottom to earlier chains,
    // which the cut solver absorbs; only the within-chain multipliers are
    // structural and must survive
    let mut pos = 0usize;
    let mut lens = Vec::new();
    for chain in &chains {
        lens.push(chain.len());
        for d in 1..chain.len() {
            if nilpotent.at(pos + d - 1, pos + d).is_zero() {
                return Err(EngineError::Internal("chain multiplier vanished".into()));
            }
        }
        pos += chain.len();
    }
    Ok(ChainBasis {
        t: t_acc,
        t_inv: t_inv_acc,
        nilpotent,
        chains: lens,
    })
}

/// Sort eigenvalue groups deterministically (constants first, then lex).
pub fn sort_groups(groups: &mut [(RatFunc, usize)]) {
    groups.sort_by(|a, b| eig_cmp(&a.0, &b.0));
}
