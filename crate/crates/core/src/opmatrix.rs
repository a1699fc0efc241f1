//! Matrices over the piecewise-rational scalar field: the data model for
//! operator-valued matrices, with trace/rank functions and the idempotent,
//! centrality, commutation and boundedness predicates.

use crate::error::EngineError;
use crate::linalg::CellMat;
use crate::partition::Partition;
use crate::piecewise::PiecewiseRational;
use crate::ratfunc::RatFunc;
use crate::rational::Gq;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::One;

/// An n-by-n matrix of piecewise-rational functions, all entries sharing one
/// partition (enforced by refinement at construction).
#[derive(Clone, PartialEq)]
pub struct OpMatrix {
    n: usize,
    partition: Partition,
    /// Row-major entries, each on `partition`.
    entries: Vec<PiecewiseRational>,
}

/// Integer-valued step function: the pointwise rank of an idempotent.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceFunction {
    pub partition: Partition,
    pub values: Vec<u32>,
}

impl TraceFunction {
    /// Equal as step functions (compare on the common refinement).
    pub fn eq_fn(&self, other: &TraceFunction) -> bool {
        if !self.partition.same_domain(&other.partition) {
            return false;
        }
        let part = self.partition.common_refinement(&other.partition).unwrap();
        self.refine(&part).values == other.refine(&part).values
    }

    pub fn refine(&self, finer: &Partition) -> TraceFunction {
        let map = self.partition.cell_map(finer);
        TraceFunction {
            partition: finer.clone(),
            values: map.into_iter().map(|i| self.values[i]).collect(),
        }
    }

    pub fn constant_value(&self) -> Option<u32> {
        let v = self.values[0];
        if self.values.iter().all(|&x| x == v) {
            Some(v)
        } else {
            None
        }
    }

    /// Cells where the value is positive.
    pub fn support(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > 0).collect()
    }

    pub fn is_supported_everywhere(&self) -> bool {
        self.values.iter().all(|&v| v > 0)
    }
}

impl OpMatrix {
    /// Build from entries, refining everything onto the common partition.
    pub fn new(n: usize, entries: Vec<PiecewiseRational>) -> Result<Self, EngineError> {
        if entries.len() != n * n {
            return Err(EngineError::DimensionMismatch(entries.len(), n * n));
        }
        let mut part = entries[0].partition().clone();
        for e in &entries[1..] {
            part = part.common_refinement(e.partition())?;
        }
        let entries = entries.into_iter().map(|e| e.refine(&part)).collect();
        Ok(OpMatrix {
            n,
            partition: part,
            entries,
        })
    }

    pub fn from_cells(n: usize, partition: Partition, cells: Vec<CellMat>) -> Self {
        assert_eq!(cells.len(), partition.cell_count());
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let fs: Vec<RatFunc> = cells.iter().map(|c| c.at(i, j).clone()).collect();
                entries.push(PiecewiseRational::new(partition.clone(), fs).unwrap());
            }
        }
        OpMatrix {
            n,
            partition,
            entries,
        }
    }

    pub fn identity(n: usize, partition: &Partition) -> Self {
        Self::scalar(n, partition, Gq::one())
    }

    pub fn zero(n: usize, partition: &Partition) -> Self {
        Self::scalar(n, partition, Gq::zero())
    }

    pub fn scalar(n: usize, partition: &Partition, c: Gq) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = if i == j { c.clone() } else { Gq::zero() };
                entries.push(PiecewiseRational::constant_on(partition.clone(), v));
            }
        }
        OpMatrix {
            n,
            partition: partition.clone(),
            entries,
        }
    }

    /// Diagonal matrix from scalar functions.
    pub fn diagonal(fs: &[PiecewiseRational]) -> Result<Self, EngineError> {
        let n = fs.len();
        let mut part = fs[0].partition().clone();
        for f in &fs[1..] {
            part = part.common_refinement(f.partition())?;
        }
        let zero = PiecewiseRational::constant_on(part.clone(), Gq::zero());
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(if i == j {
                    fs[i].refine(&part)
                } else {
                    zero.clone()
                });
            }
        }
        Ok(OpMatrix {
            n,
            partition: part,
            entries,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn entry(&self, i: usize, j: usize) -> &PiecewiseRational {
        &self.entries[i * self.n + j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, f: PiecewiseRational) {
        let f = if f.partition() == &self.partition {
            f
        } else {
            // keep the shared-partition invariant
            let part = self
                .partition
                .common_refinement(f.partition())
                .expect("same domain");
            if part != self.partition {
                *self = self.refine(&part);
            }
            f.refine(&self.partition)
        };
        self.entries[i * self.n + j] = f;
    }

    /// View one cell as a plain matrix of rational functions.
    pub fn cell_matrix(&self, ci: usize) -> CellMat {
        CellMat::from_fn(self.n, self.n, |i, j| self.entry(i, j).cell(ci).clone())
    }

    pub fn cell_matrices(&self) -> Vec<CellMat> {
        (0..self.partition.cell_count())
            .map(|ci| self.cell_matrix(ci))
            .collect()
    }

    pub fn refine(&self, finer: &Partition) -> OpMatrix {
        OpMatrix {
            n: self.n,
            partition: finer.clone(),
            entries: self.entries.iter().map(|e| e.refine(finer)).collect(),
        }
    }

    /// Refine two matrices onto their common partition.
    pub fn align(&self, other: &OpMatrix) -> Result<(OpMatrix, OpMatrix), EngineError> {
        let part = self.partition.common_refinement(&other.partition)?;
        Ok((self.refine(&part), other.refine(&part)))
    }

    fn binop_cells(
        &self,
        other: &OpMatrix,
        f: impl Fn(&CellMat, &CellMat) -> CellMat,
    ) -> Result<OpMatrix, EngineError> {
        if self.n != other.n {
            return Err(EngineError::DimensionMismatch(self.n, other.n));
        }
        let (a, b) = self.align(other)?;
        let cells: Vec<CellMat> = (0..a.partition.cell_count())
            .map(|ci| f(&a.cell_matrix(ci), &b.cell_matrix(ci)))
            .collect();
        Ok(OpMatrix::from_cells(self.n, a.partition, cells))
    }

    pub fn add(&self, other: &OpMatrix) -> Result<OpMatrix, EngineError> {
        self.binop_cells(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &OpMatrix) -> Result<OpMatrix, EngineError> {
        self.binop_cells(other, |a, b| a.sub(b))
    }

    pub fn matmul(&self, other: &OpMatrix) -> Result<OpMatrix, EngineError> {
        self.binop_cells(other, |a, b| a.mul(b))
    }

    pub fn neg(&self) -> OpMatrix {
        OpMatrix {
            n: self.n,
            partition: self.partition.clone(),
            entries: self.entries.iter().map(|e| e.neg()).collect(),
        }
    }

    pub fn scalar_mul(&self, f: &PiecewiseRational) -> Result<OpMatrix, EngineError> {
        let part = self.partition.common_refinement(f.partition())?;
        let a = self.refine(&part);
        let fr = f.refine(&part);
        let entries = a
            .entries
            .iter()
            .map(|e| e.mul(&fr).expect("same partition"))
            .collect();
        Ok(OpMatrix {
            n: self.n,
            partition: part,
            entries,
        })
    }

    pub fn mul_gq(&self, c: &Gq) -> OpMatrix {
        let f = PiecewiseRational::constant_on(self.partition.clone(), c.clone());
        self.scalar_mul(&f).unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(PiecewiseRational::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        (0..self.n).all(|i| {
            (0..self.n).all(|j| {
                let e = self.entry(i, j);
                if i == j {
                    e.is_one()
                } else {
                    e.is_zero()
                }
            })
        })
    }

    /// Exact test `P * P == P`.
    pub fn is_idempotent(&self) -> bool {
        match self.matmul(self) {
            Ok(sq) => sq.eq_fn(self),
            Err(_) => false,
        }
    }

    /// Exact test `A*B == B*A`.
    pub fn commutes(&self, other: &OpMatrix) -> Result<bool, EngineError> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        Ok(ab.eq_fn(&ba))
    }

    /// Equality as matrix functions.
    pub fn eq_fn(&self, other: &OpMatrix) -> bool {
        self.n == other.n
            && self.partition.same_domain(&other.partition)
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|(a, b)| a.eq_fn(b))
    }

    /// Trace function of an idempotent: the per-cell constant integer value
    /// of the diagonal sum, which equals the generic rank.
    pub fn trace_function(&self) -> Result<TraceFunction, EngineError> {
        if !self.is_idempotent() {
            return Err(EngineError::NotIdempotent);
        }
        let mut values = Vec::with_capacity(self.partition.cell_count());
        for ci in 0..self.partition.cell_count() {
            let tr = self.cell_matrix(ci).trace();
            let c = tr.as_constant().ok_or(EngineError::NotIdempotent)?;
            if !c.is_real() || !c.re.denom().is_one() {
                return Err(EngineError::NotIdempotent);
            }
            let v: i64 =
                c.re.numer()
                    .try_into()
                    .map_err(|_| EngineError::NotIdempotent)?;
            if v < 0 || v as usize > self.n {
                return Err(EngineError::NotIdempotent);
            }
            values.push(v as u32);
        }
        Ok(TraceFunction {
            partition: self.partition.clone(),
            values,
        })
    }

    /// Is this `chi_S * I` for a union of cells S?
    pub fn is_central_projection(&self) -> bool {
        for ci in 0..self.partition.cell_count() {
            let m = self.cell_matrix(ci);
            let d0 = m.at(0, 0);
            if !(d0.is_zero() || d0.is_one()) {
                return false;
            }
            for i in 0..self.n {
                for j in 0..self.n {
                    let e = m.at(i, j);
                    if i == j {
                        if e != d0 {
                            return false;
                        }
                    } else if !e.is_zero() {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Every entry pole-free on every closed cell.
    pub fn is_bounded_matrix(&self) -> bool {
        self.entries
            .iter()
            .all(PiecewiseRational::is_bounded_everywhere)
    }

    /// Determinant as a scalar function.
    pub fn det(&self) -> PiecewiseRational {
        let cells: Vec<RatFunc> = (0..self.partition.cell_count())
            .map(|ci| self.cell_matrix(ci).det())
            .collect();
        PiecewiseRational::new(self.partition.clone(), cells).unwrap()
    }

    /// Exact inverse over the field, `None` if det vanishes identically on
    /// some cell. Boundedness of the inverse is a separate question.
    pub fn inverse(&self) -> Option<OpMatrix> {
        let mut cells = Vec::with_capacity(self.partition.cell_count());
        for ci in 0..self.partition.cell_count() {
            cells.push(self.cell_matrix(ci).inverse()?);
        }
        Some(OpMatrix::from_cells(self.n, self.partition.clone(), cells))
    }

    /// Invertible inside the bounded algebra: nonzero determinant a.e. per
    /// cell and entrywise-bounded inverse on closed cells.
    pub fn is_invertible_bounded(&self) -> bool {
        if !self.is_bounded_matrix() {
            return false;
        }
        match self.inverse() {
            None => false,
            Some(inv) => inv.is_bounded_matrix(),
        }
    }

    /// Exact evaluation at a non-pole rational point.
    pub fn eval_exact(&self, x: &BigRational) -> Option<Vec<Gq>> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for e in &self.entries {
            out.push(e.eval(x)?);
        }
        Some(out)
    }

    /// Floating-point evaluation (row-major), for the numeric oracle.
    pub fn eval_c64(&self, x: &BigRational) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.eval_c64(x)).collect()
    }

    pub fn transpose(&self) -> OpMatrix {
        let cells = (0..self.partition.cell_count())
            .map(|ci| self.cell_matrix(ci).transpose())
            .collect();
        OpMatrix::from_cells(self.n, self.partition.clone(), cells)
    }

    pub fn direct_sum(&self, other: &OpMatrix) -> Result<OpMatrix, EngineError> {
        let (a, b) = self.align(other)?;
        let n = a.n + b.n;
        let cells = (0..a.partition.cell_count())
            .map(|ci| a.cell_matrix(ci).direct_sum(&b.cell_matrix(ci)))
            .collect();
        Ok(OpMatrix::from_cells(n, a.partition, cells))
    }

    /// Extract the square block at rows/cols `[at, at+size)`.
    pub fn block(&self, at: usize, size: usize) -> OpMatrix {
        let cells = (0..self.partition.cell_count())
            .map(|ci| self.cell_matrix(ci).submatrix(at, at, size, size))
            .collect();
        OpMatrix::from_cells(size, self.partition.clone(), cells)
    }

    /// Constant permutation matrix `P e_j = e_{perm[j]}` on this partition.
    pub fn permutation(partition: &Partition, perm: &[usize]) -> OpMatrix {
        let n = perm.len();
        let cells = (0..partition.cell_count())
            .map(|_| CellMat::permutation(perm))
            .collect();
        OpMatrix::from_cells(n, partition.clone(), cells)
    }

    /// Poles of all entries per cell, used for sample avoidance.
    pub fn all_poles(&self) -> Vec<Vec<crate::realroots::RootLoc>> {
        let mut per_cell = vec![Vec::new(); self.partition.cell_count()];
        for e in &self.entries {
            for (ci, ps) in e.poles().into_iter().enumerate() {
                per_cell[ci].extend(ps);
            }
        }
        per_cell
    }
}

impl std::fmt::Debug for OpMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "OpMatrix n={} on {:?}", self.n, self.partition.points())?;
        for ci in 0..self.partition.cell_count() {
            writeln!(f, " cell {}: {:?}", ci, self.cell_matrix(ci))?;
        }
        Ok(())
    }
}
