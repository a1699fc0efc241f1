//! Piecewise-rational functions on a partitioned interval: the scalar field.
//!
//! A value holds one rational function per closed cell of a partition of
//! `[a, b]`. All arithmetic is exact; binary operations land on the common
//! refinement of the operand partitions and every cell is re-canonicalized.

use crate::error::EngineError;
use crate::partition::Partition;
use crate::poly::Poly;
use crate::ratfunc::RatFunc;
use crate::rational::Gq;
use crate::realroots::RootLoc;
use num_complex::Complex64;
use num_rational::BigRational;
use std::fmt;

/// Per-cell description of the zero set of a scalar.
#[derive(Clone, Debug, PartialEq)]
pub enum CellZeroSet {
    /// The function vanishes identically on the cell.
    WholeCell,
    /// Isolated real zeros in the closed cell.
    Points(Vec<RootLoc>),
}

#[derive(Clone, PartialEq)]
pub struct PiecewiseRational {
    partition: Partition,
    cells: Vec<RatFunc>,
}

impl PiecewiseRational {
    pub fn new(partition: Partition, cells: Vec<RatFunc>) -> Result<Self, EngineError> {
        if cells.len() != partition.cell_count() {
            return Err(EngineError::InvalidPartition(format!(
                "expected {} cell functions, got {}",
                partition.cell_count(),
                cells.len()
            )));
        }
        Ok(PiecewiseRational { partition, cells })
    }

    pub fn constant_on(partition: Partition, value: Gq) -> Self {
        let n = partition.cell_count();
        PiecewiseRational {
            partition,
            cells: vec![RatFunc::constant(value); n],
        }
    }

    pub fn constant(a: BigRational, b: BigRational, value: Gq) -> Self {
        PiecewiseRational::constant_on(Partition::whole(a, b), value)
    }

    /// The coordinate function `lambda` on `[a, b]`.
    pub fn var(a: BigRational, b: BigRational) -> Self {
        PiecewiseRational {
            partition: Partition::whole(a, b),
            cells: vec![RatFunc::var()],
        }
    }

    pub fn zero(a: BigRational, b: BigRational) -> Self {
        PiecewiseRational::constant(a, b, Gq::zero())
    }

    pub fn one(a: BigRational, b: BigRational) -> Self {
        PiecewiseRational::constant(a, b, Gq::one())
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn cells(&self) -> &[RatFunc] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &RatFunc {
        &self.cells[i]
    }

    pub fn is_zero(&self) -> bool {
        self.cells.iter().all(RatFunc::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.cells.iter().all(RatFunc::is_one)
    }

    /// Identical rational function on every cell?
    pub fn as_uniform(&self) -> Option<&RatFunc> {
        let first = &self.cells[0];
        if self.cells.iter().all(|c| c == first) {
            Some(first)
        } else {
            None
        }
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        self.partition.same_domain(&other.partition)
    }

    /// Re-express on a finer partition; the function is unchanged.
    pub fn refine(&self, finer: &Partition) -> Self {
        debug_assert!(self.partition.is_refined_by(finer));
        let map = self.partition.cell_map(finer);
        PiecewiseRational {
            partition: finer.clone(),
            cells: map.into_iter().map(|i| self.cells[i].clone()).collect(),
        }
    }

    fn binop(
        &self,
        other: &Self,
        f: impl Fn(&RatFunc, &RatFunc) -> RatFunc,
    ) -> Result<Self, EngineError> {
        let part = self.partition.common_refinement(&other.partition)?;
        let a = self.refine(&part);
        let b = other.refine(&part);
        let cells = a
            .cells
            .iter()
            .zip(b.cells.iter())
            .map(|(x, y)| f(x, y))
            .collect();
        Ok(PiecewiseRational {
            partition: part,
            cells,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, EngineError> {
        self.binop(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, EngineError> {
        self.binop(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, EngineError> {
        self.binop(other, |a, b| a * b)
    }

    pub fn neg(&self) -> Self {
        PiecewiseRational {
            partition: self.partition.clone(),
            cells: self.cells.iter().map(|c| -c).collect(),
        }
    }

    /// Field inverse (a.e.); fails if the function vanishes identically on
    /// some cell. Boundedness of the result is a separate question.
    pub fn invert(&self) -> Result<Self, EngineError> {
        let mut cells = Vec::with_capacity(self.cells.len());
        for (i, c) in self.cells.iter().enumerate() {
            match c.inv() {
                Some(inv) => cells.push(inv),
                None => return Err(EngineError::IdenticallyZeroOnCell(i)),
            }
        }
        Ok(PiecewiseRational {
            partition: self.partition.clone(),
            cells,
        })
    }

    /// Exact zero set per cell.
    pub fn zero_set(&self) -> Vec<CellZeroSet> {
        self.partition
            .cells()
            .zip(self.cells.iter())
            .map(|((lo, hi), f)| {
                if f.is_zero() {
                    CellZeroSet::WholeCell
                } else {
                    CellZeroSet::Points(f.real_zeros_in(lo, hi))
                }
            })
            .collect()
    }

    /// Per cell: is the function nonzero outside a finite point set?
    pub fn is_supported_ae(&self) -> Vec<bool> {
        self.cells.iter().map(RatFunc::is_supported_ae).collect()
    }

    pub fn is_supported_ae_everywhere(&self) -> bool {
        self.cells.iter().all(RatFunc::is_supported_ae)
    }

    /// Per cell: pole-free on the closed cell (a pole at a shared breakpoint
    /// makes both adjacent cells unbounded, since cells are closed).
    pub fn is_bounded(&self) -> Vec<bool> {
        self.partition
            .cells()
            .zip(self.cells.iter())
            .map(|((lo, hi), f)| f.is_bounded_on(lo, hi))
            .collect()
    }

    pub fn is_bounded_everywhere(&self) -> bool {
        self.is_bounded().iter().all(|&b| b)
    }

    /// Real poles per cell (closed cells).
    pub fn poles(&self) -> Vec<Vec<RootLoc>> {
        self.partition
            .cells()
            .zip(self.cells.iter())
            .map(|((lo, hi), f)| f.real_poles_in(lo, hi))
            .collect()
    }

    /// Exact evaluation; `None` at a pole or outside the domain. Breakpoints
    /// resolve to the cell on their left.
    pub fn eval(&self, x: &BigRational) -> Option<Gq> {
        let i = self.partition.locate(x)?;
        self.cells[i].eval(x)
    }

    pub fn eval_c64(&self, x: &BigRational) -> Complex64 {
        let i = self.partition.locate(x).expect("point in domain");
        self.cells[i].eval_c64(crate::rational::rational_to_f64(x))
    }

    /// Equality as functions: compare cellwise on the common refinement.
    pub fn eq_fn(&self, other: &Self) -> bool {
        if !self.same_domain(other) {
            return false;
        }
        let part = self.partition.common_refinement(&other.partition).unwrap();
        let a = self.refine(&part);
        let b = other.refine(&part);
        a.cells == b.cells
    }

    /// Apply a map to every cell function.
    pub fn map_cells(&self, f: impl Fn(&RatFunc) -> RatFunc) -> Self {
        PiecewiseRational {
            partition: self.partition.clone(),
            cells: self.cells.iter().map(f).collect(),
        }
    }

    /// Build from per-cell polynomials.
    pub fn from_polys(partition: Partition, polys: Vec<Poly>) -> Result<Self, EngineError> {
        let cells = polys.into_iter().map(RatFunc::from_poly).collect();
        PiecewiseRational::new(partition, cells)
    }

    /// Characteristic function of a union of cells (1 on flagged cells).
    pub fn indicator(partition: Partition, flags: &[bool]) -> Result<Self, EngineError> {
        if flags.len() != partition.cell_count() {
            return Err(EngineError::InvalidPartition("flag count mismatch".into()));
        }
        let cells = flags
            .iter()
            .map(|&on| if on { RatFunc::one() } else { RatFunc::zero() })
            .collect();
        PiecewiseRational::new(partition, cells)
    }
}

impl fmt::Debug for PiecewiseRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, ((lo, hi), c)) in self.partition.cells().zip(self.cells.iter()).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[{},{}]: {:?}", lo, hi, c)?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn unit() -> (BigRational, BigRational) {
        (ratio(0, 1), ratio(1, 1))
    }

    #[test]
    fn additive_inverse() {
        let (a, b) = unit();
        let f = PiecewiseRational::var(a.clone(), b.clone());
        let s = f.add(&f.neg()).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn rational_sum_to_one() {
        // 1/(l+1) + l/(l+1) = 1 on [0,1]
        let (a, b) = unit();
        let den = Poly::new(vec![Gq::from_int(1), Gq::from_int(1)]);
        let part = Partition::whole(a, b);
        let f = PiecewiseRational::new(part.clone(), vec![RatFunc::new(Poly::one(), den.clone())])
            .unwrap();
        let g = PiecewiseRational::new(part, vec![RatFunc::new(Poly::var(), den)]).unwrap();
        let s = f.add(&g).unwrap();
        assert!(s.is_one());
        for x in [ratio(0, 1), ratio(1, 2), ratio(1, 1)] {
            assert_eq!(s.eval(&x).unwrap(), Gq::one());
        }
    }

    #[test]
    fn piecewise_addition_refines() {
        let (a, b) = unit();
        let p1 = Partition::new(vec![a.clone(), ratio(1, 2), b.clone()]).unwrap();
        let p2 = Partition::new(vec![a.clone(), ratio(1, 3), b.clone()]).unwrap();
        let f = PiecewiseRational::new(p1, vec![RatFunc::one(), RatFunc::zero()]).unwrap();
        let g = PiecewiseRational::new(p2, vec![RatFunc::zero(), RatFunc::one()]).unwrap();
        let s = f.add(&g).unwrap();
        assert_eq!(
            s.partition().points(),
            &[ratio(0, 1), ratio(1, 3), ratio(1, 2), ratio(1, 1)]
        );
        assert!(s.cell(0).is_one());
        assert_eq!(s.cell(1).as_constant().unwrap(), Gq::from_int(2));
        assert!(s.cell(2).is_one());
    }

    #[test]
    fn invert_and_zero_cell() {
        let (a, b) = unit();
        let lam = PiecewiseRational::var(a.clone(), b.clone());
        let inv = lam.invert().unwrap();
        assert!(lam.mul(&inv).unwrap().is_one());
        assert_eq!(inv.is_bounded(), vec![false]);
        let part = Partition::new(vec![a, ratio(1, 2), b]).unwrap();
        let f = PiecewiseRational::new(part, vec![RatFunc::zero(), RatFunc::var()]).unwrap();
        assert_eq!(
            f.invert().unwrap_err(),
            EngineError::IdenticallyZeroOnCell(0)
        );
    }

    #[test]
    fn zero_set_variants() {
        let (a, b) = unit();
        // lambda(lambda - 1/2): roots 0 and 1/2
        let p = Poly::new(vec![Gq::zero(), Gq::from_ratio(-1, 2), Gq::from_int(1)]);
        let f =
            PiecewiseRational::from_polys(Partition::whole(a.clone(), b.clone()), vec![p]).unwrap();
        match &f.zero_set()[0] {
            CellZeroSet::Points(roots) => {
                assert_eq!(
                    roots,
                    &vec![
                        RootLoc::Rational(ratio(0, 1)),
                        RootLoc::Rational(ratio(1, 2))
                    ]
                );
            }
            _ => panic!(),
        }
        // piecewise 0 / 1
        let part = Partition::new(vec![a, ratio(1, 2), b]).unwrap();
        let g = PiecewiseRational::new(part, vec![RatFunc::zero(), RatFunc::one()]).unwrap();
        let zs = g.zero_set();
        assert_eq!(zs[0], CellZeroSet::WholeCell);
        assert_eq!(zs[1], CellZeroSet::Points(vec![]));
        assert_eq!(g.is_supported_ae(), vec![false, true]);
    }

    #[test]
    fn support_without_root_in_cell() {
        // lambda - 2 on [0,1]: no root in the cell, supported
        let (a, b) = unit();
        let p = Poly::new(vec![Gq::from_int(-2), Gq::from_int(1)]);
        let f = PiecewiseRational::from_polys(Partition::whole(a, b), vec![p]).unwrap();
        assert_eq!(f.is_supported_ae(), vec![true]);
        match &f.zero_set()[0] {
            CellZeroSet::Points(r) => assert!(r.is_empty()),
            _ => panic!(),
        }
    }

    #[test]
    fn refine_is_idempotent() {
        let (a, b) = unit();
        let f = PiecewiseRational::var(a.clone(), b.clone());
        let part = Partition::new(vec![a, ratio(1, 2), b]).unwrap();
        let r1 = f.refine(&part);
        let r2 = r1.refine(&part);
        assert_eq!(r1, r2);
        assert!(f.eq_fn(&r1));
    }
}
