//! Floating-point pointwise verification of symbolic results.
//!
//! Sample points are exact rationals (so the symbolic and numeric paths
//! evaluate the same lambda) converted to floats only at the edge. The
//! oracle is one-directional: nothing computed here feeds back into the
//! exact engine.

use crate::certificate::SimilarityCertificate;
use crate::error::EngineError;
use crate::opmatrix::OpMatrix;
use crate::partition::Partition;

use crate::realroots::RootLoc;
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;

/// Per-cell sampling plan: rational points avoiding breakpoints and all
/// recorded poles by a relative margin.
#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub partition: Partition,
    pub points: Vec<Vec<BigRational>>,
    pub tolerance: f64,
}

impl SamplePlan {
    /// Uniform grid of `count` points per cell, shifted deterministically by
    /// `seed`, avoiding `poles` by at least `1e-6` of the cell width.
    pub fn new(
        partition: &Partition,
        count: usize,
        tolerance: f64,
        seed: u64,
        poles: &[Vec<RootLoc>],
    ) -> SamplePlan {
        let margin_num = BigRational::new(1.into(), 1_000_000.into());
        let mut points = Vec::with_capacity(partition.cell_count());
        for ci in 0..partition.cell_count() {
            let (lo, hi) = partition.cell(ci);
            let width = hi - lo;
            let margin = &width * &margin_num;
            let empty = Vec::new();
            let cell_poles = poles.get(ci).unwrap_or(&empty);
            let mut cell_points = Vec::with_capacity(count);
            let denom = BigRational::from_integer(((count + 1) as i64).into());
            // deterministic sub-grid shift derived from the seed
            let shift_k = (seed % 977) as i64 + 1;
            let shift =
                &width * &BigRational::new(shift_k.into(), (1009 * (count as i64 + 1)).into());
            for j in 0..count {
                let base =
                    lo + &width * &BigRational::new(((j + 1) as i64).into(), 1.into()) / &denom;
                let mut x = base;
                let mut tries = 0;
                loop {
                    let too_close = x <= *lo
                        || x >= *hi
                        || cell_poles.iter().any(|p| {
                            let (plo, phi) = (p.lo(), p.hi());
                            x >= &plo - &margin && x <= &phi + &margin
                        });
                    if !too_close || tries > 8 {
                        break;
                    }
                    x += &shift;
                    tries += 1;
                }
                if x > *lo && x < *hi {
                    cell_points.push(x);
                }
            }
            points.push(cell_points);
        }
        SamplePlan {
            partition: partition.clone(),
            points,
            tolerance,
        }
    }

    /// Plan adapted to a set of matrices: samples avoid all their poles.
    pub fn for_matrices(
        mats: &[&OpMatrix],
        count: usize,
        tolerance: f64,
        seed: u64,
    ) -> Result<SamplePlan, EngineError> {
        let mut part = mats[0].partition().clone();
        for m in &mats[1..] {
            part = part.common_refinement(m.partition())?;
        }
        let mut poles: Vec<Vec<RootLoc>> = vec![Vec::new(); part.cell_count()];
        for m in mats {
            let refined = m.refine(&part);
            for (ci, ps) in refined.all_poles().into_iter().enumerate() {
                poles[ci].extend(ps);
            }
        }
        Ok(SamplePlan::new(&part, count, tolerance, seed, &poles))
    }
}

pub fn to_dmatrix(m: &OpMatrix, x: &BigRational) -> DMatrix<Complex64> {
    let n = m.n();
    DMatrix::from_row_slice(n, n, &m.eval_c64(x))
}

fn fro_norm(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Verification report for one conjugation check.
#[derive(Clone, Debug)]
pub struct ConjugationReport {
    pub max_residual: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Relative residual of `X A X^{-1} - expected` over all samples.
pub fn check_conjugation(
    a: &OpMatrix,
    cert: &SimilarityCertificate,
    expected: &OpMatrix,
    plan: &SamplePlan,
) -> ConjugationReport {
    let mut max_residual: f64 = 0.0;
    let mut samples = 0usize;
    for cell_points in &plan.points {
        for x in cell_points {
            let am = to_dmatrix(a, x);
            let xm = to_dmatrix(cert.x(), x);
            let xim = to_dmatrix(cert.x_inv(), x);
            let em = to_dmatrix(expected, x);
            let resid = &xm * &am * &xim - &em;
            let denom = 1.0 + fro_norm(&em);
            let r = fro_norm(&resid) / denom;
            if r > max_residual {
                max_residual = r;
            }
            samples += 1;
        }
    }
    ConjugationReport {
        max_residual,
        samples,
        pass: max_residual <= plan.tolerance,
    }
}

/// Numeric rank with a relative singular-value threshold.
fn numeric_rank(m: &DMatrix<Complex64>, rel_tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > rel_tol * smax)
        .count()
}

/// Dimension of the kernel of `M -> A(x) M - M A(x)` via singular values.
pub fn numeric_commutant_dim(a: &OpMatrix, x: &BigRational) -> usize {
    let n = a.n();
    let am = to_dmatrix(a, x);
    let dim = n * n;
    let mut syl = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                syl[(row, k * n + j)] += am[(i, k)];
                syl[(row, i * n + k)] -= am[(k, j)];
            }
        }
    }
    dim - numeric_rank(&syl, 1e-8)
}

/// Numeric Jordan structure at a sample: eigenvalue clusters (gap 1e-6) and
/// the block-size multiset per cluster from rank sequences.
pub fn numeric_jordan_profile(
    a: &OpMatrix,
    x: &BigRational,
) -> Result<Vec<(Complex64, Vec<usize>)>, EngineError> {
    let n = a.n();
    let am = to_dmatrix(a, x);
    let (_q, t) = am.clone().schur().unpack();
    let eigs: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let am_norm_global = {
        let svd = am.clone().svd(false, false);
        svd.singular_values
            .iter()
            .cloned()
            .fold(0.0f64, f64::max)
            .max(1.0)
    };
    // single-linkage clustering; the gap accounts for the eps^(1/k) scatter
    // of defective eigenvalues, never below the 1e-6 separation contract
    let gap = (20.0 * (1e-16 * am_norm_global).powf(0.25)).max(1e-6);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let mut target = None;
        for (ci, cl) in clusters.iter().enumerate() {
            if cl.iter().any(|&j| (eigs[i] - eigs[j]).norm() < gap) {
                target = Some(ci);
                break;
            }
        }
        match target {
            Some(ci) => clusters[ci].push(i),
            None => clusters.push(vec![i]),
        }
    }
    // chained merges can leave two clusters closer than the gap
    for (ci, cl) in clusters.iter().enumerate() {
        for (cj, cl2) in clusters.iter().enumerate() {
            if ci >= cj {
                continue;
            }
            for &i in cl {
                for &j in cl2 {
                    if (eigs[i] - eigs[j]).norm() < 1e-6 {
                        return Err(EngineError::ClusterAmbiguous);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for cl in &clusters {
        let mu = cl.iter().map(|&i| eigs[i]).sum::<Complex64>() / (cl.len() as f64);
        let mult = cl.len();
        // eigenvalues merged into one cluster must agree to within the
        // defectivity noise scale eps^(1/mult); a wider spread means the
        // cluster mixes genuinely distinct values too close to separate
        let mut spread = 0.0f64;
        for &i in cl {
            for &j in cl {
                spread = spread.max((eigs[i] - eigs[j]).norm());
            }
        }
        let am_norm = {
            let svd = am.clone().svd(false, false);
            svd.singular_values
                .iter()
                .cloned()
                .fold(0.0f64, f64::max)
                .max(1e-300)
        };
        let allowance = 20.0 * (1e-16f64).powf(1.0 / mult as f64) * am_norm.max(1.0);
        if spread > allowance {
            return Err(EngineError::ClusterAmbiguous);
        }
        let shifted = &am - DMatrix::<Complex64>::identity(n, n) * mu;
        let base_norm = {
            let svd = shifted.clone().svd(false, false);
            svd.singular_values
                .iter()
                .cloned()
                .fold(0.0f64, f64::max)
                .max(1e-300)
        };
        // compress onto the cluster's generalized eigenspace: the numeric
        // kernel of shifted^mult; this keeps other clusters' scales out of
        // the rank sequence
        let mut power = DMatrix::<Complex64>::identity(n, n);
        for _ in 0..mult {
            power = &power * &shifted;
        }
        let svd = power.clone().svd(false, true);
        let v_t = svd.v_t.as_ref().expect("svd vectors");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i]
                .partial_cmp(&svd.singular_values[j])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        // the mult smallest singular directions span the eigenspace; they
        // must separate from the rest by a clean multiplicative gap
        if order.len() > mult {
            let kept = svd.singular_values[order[mult - 1]];
            let dropped = svd.singular_values[order[mult]];
            let floor = 1e-14 * base_norm.powi(mult as i32);
            if dropped <= floor.max(kept * 1e6) {
                return Err(EngineError::ClusterAmbiguous);
            }
        }
        let mut basis = DMatrix::<Complex64>::zeros(n, mult);
        for (col, &oi) in order.iter().take(mult).enumerate() {
            for r in 0..n {
                basis[(r, col)] = v_t[(oi, r)].conj();
            }
        }
        let compressed = basis.adjoint() * &shifted * &basis;
        // noise in the compressed power grows like (machine eps * |A|) times
        // |M|^(k-1); singular values inside the uncertain band make the
        // sample ambiguous instead of silently mis-ranked
        let comp_norm = {
            let svd = compressed.clone().svd(false, false);
            let s = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
            s.max(1e-10 * base_norm)
        };
        let mut ranks = vec![mult];
        let mut cpow = DMatrix::<Complex64>::identity(mult, mult);
        for k in 1..=mult {
            cpow = &cpow * &compressed;
            let floor = 1e-12 * base_norm * comp_norm.powi(k as i32 - 1);
            let band_hi = 1e4 * floor;
            let svd = cpow.clone().svd(false, false);
            if svd
                .singular_values
                .iter()
                .any(|&s| s > floor && s < band_hi)
            {
                return Err(EngineError::ClusterAmbiguous);
            }
            let rank = svd.singular_values.iter().filter(|&&s| s > band_hi).count();
            ranks.push(rank);
        }
        // the rank sequence must be non-increasing and die at step mult
        if ranks.windows(2).any(|w| w[1] > w[0]) || ranks[mult] != 0 {
            return Err(EngineError::ClusterAmbiguous);
        }
        // blocks of size >= k: r_{k-1} - r_k
        let mut sizes = Vec::new();
        for k in 1..=mult {
            let ge_k = ranks[k - 1] - ranks[k];
            let ge_k1 = if k < mult { ranks[k] - ranks[k + 1] } else { 0 };
            let exactly_k = ge_k.saturating_sub(ge_k1);
            for _ in 0..exactly_k {
                sizes.push(k);
            }
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        out.push((mu, sizes));
    }
    out.sort_by(|a, b| {
        a.0.re
            .partial_cmp(&b.0.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                a.0.im
                    .partial_cmp(&b.0.im)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    Ok(out)
}
