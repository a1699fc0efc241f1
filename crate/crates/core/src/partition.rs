//! Interval partitions with rational breakpoints.

use crate::error::EngineError;
use num_rational::BigRational;

/// A partition of `[a, b]` into closed cells `[t_i, t_{i+1}]`, given by
/// strictly increasing rational breakpoints `t_0 = a < ... < t_m = b`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Partition {
    points: Vec<BigRational>,
}

impl Partition {
    pub fn new(points: Vec<BigRational>) -> Result<Self, EngineError> {
        if points.len() < 2 {
            return Err(EngineError::InvalidPartition(
                "need at least two breakpoints".into(),
            ));
        }
        if !points.windows(2).all(|w| w[0] < w[1]) {
            return Err(EngineError::InvalidPartition(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Partition { points })
    }

    /// The trivial partition `{[a, b]}`.
    pub fn whole(a: BigRational, b: BigRational) -> Self {
        Partition::new(vec![a, b]).expect("a < b")
    }

    pub fn points(&self) -> &[BigRational] {
        &self.points
    }

    pub fn a(&self) -> &BigRational {
        &self.points[0]
    }

    pub fn b(&self) -> &BigRational {
        self.points.last().unwrap()
    }

    pub fn cell_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn cell(&self, i: usize) -> (&BigRational, &BigRational) {
        (&self.points[i], &self.points[i + 1])
    }

    pub fn cells(&self) -> impl Iterator<Item = (&BigRational, &BigRational)> {
        self.points.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn midpoint(&self, i: usize) -> BigRational {
        let (lo, hi) = self.cell(i);
        (lo + hi) / BigRational::from_integer(2.into())
    }

    pub fn same_domain(&self, other: &Partition) -> bool {
        self.a() == other.a() && self.b() == other.b()
    }

    /// Does every breakpoint of `self` occur in `finer`?
    pub fn is_refined_by(&self, finer: &Partition) -> bool {
        self.same_domain(finer)
            && self
                .points
                .iter()
                .all(|p| finer.points.binary_search(p).is_ok())
    }

    /// Union of breakpoints of both partitions (same domain required).
    pub fn common_refinement(&self, other: &Partition) -> Result<Partition, EngineError> {
        if !self.same_domain(other) {
            return Err(EngineError::DomainMismatch);
        }
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        pts.sort();
        pts.dedup();
        Partition::new(pts)
    }

    /// Insert additional interior breakpoints (points outside `(a, b)` are
    /// ignored).
    pub fn refine_with(&self, extra: &[BigRational]) -> Partition {
        let mut pts = self.points.clone();
        for p in extra {
            if p > self.a() && p < self.b() {
                pts.push(p.clone());
            }
        }
        pts.sort();
        pts.dedup();
        Partition::new(pts).expect("refinement is valid")
    }

    /// Index of the cell containing `x` (breakpoints resolve to the cell on
    /// their left, except `a` which lands in cell 0).
    pub fn locate(&self, x: &BigRational) -> Option<usize> {
        if x < self.a() || x > self.b() {
            return None;
        }
        match self.points.binary_search(x) {
            Ok(0) => Some(0),
            Ok(i) => Some(i - 1),
            Err(i) => Some(i - 1),
        }
    }

    /// Map each cell of `finer` to the cell of `self` containing it.
    /// Requires `self.is_refined_by(finer)`.
    pub fn cell_map(&self, finer: &Partition) -> Vec<usize> {
        debug_assert!(self.is_refined_by(finer));
        (0..finer.cell_count())
            .map(|i| self.locate(&finer.midpoint(i)).expect("midpoint in domain"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn refinement_contains_both() {
        let p = Partition::new(vec![ratio(0, 1), ratio(1, 2), ratio(1, 1)]).unwrap();
        let q = Partition::new(vec![ratio(0, 1), ratio(1, 3), ratio(1, 1)]).unwrap();
        let r = p.common_refinement(&q).unwrap();
        assert_eq!(
            r.points(),
            &[ratio(0, 1), ratio(1, 3), ratio(1, 2), ratio(1, 1)]
        );
        assert!(p.is_refined_by(&r));
        assert!(q.is_refined_by(&r));
    }

    #[test]
    fn locate_cells() {
        let p = Partition::new(vec![ratio(0, 1), ratio(1, 2), ratio(1, 1)]).unwrap();
        assert_eq!(p.locate(&ratio(1, 4)), Some(0));
        assert_eq!(p.locate(&ratio(1, 2)), Some(0));
        assert_eq!(p.locate(&ratio(3, 4)), Some(1));
        assert_eq!(p.locate(&ratio(0, 1)), Some(0));
        assert_eq!(p.locate(&ratio(2, 1)), None);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(Partition::new(vec![ratio(0, 1)]).is_err());
        assert!(Partition::new(vec![ratio(1, 1), ratio(0, 1)]).is_err());
    }
}
