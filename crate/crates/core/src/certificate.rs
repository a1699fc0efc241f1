//! Similarity certificates: an invertible matrix packaged with its exact
//! inverse and a boundedness verdict. Construction verifies `x * x_inv = I`
//! with zero tolerance, so a certificate in hand is already a proof.

use crate::error::EngineError;
use crate::opmatrix::OpMatrix;
use crate::partition::Partition;

#[derive(Clone, Debug)]
pub struct SimilarityCertificate {
    x: OpMatrix,
    x_inv: OpMatrix,
    bounded: bool,
}

impl SimilarityCertificate {
    /// Verify both products against the identity; record boundedness.
    pub fn new(x: OpMatrix, x_inv: OpMatrix) -> Result<Self, EngineError> {
        if !x.matmul(&x_inv)?.is_identity() || !x_inv.matmul(&x)?.is_identity() {
            return Err(EngineError::Internal(
                "certificate inverse does not verify".into(),
            ));
        }
        let bounded = x.is_bounded_matrix() && x_inv.is_bounded_matrix();
        Ok(SimilarityCertificate { x, x_inv, bounded })
    }

    /// Compute the inverse over the field and verify.
    pub fn from_matrix(x: OpMatrix) -> Result<Self, EngineError> {
        let x_inv = x.inverse().ok_or(EngineError::SingularMatrix(0))?;
        SimilarityCertificate::new(x, x_inv)
    }

    pub fn identity(n: usize, partition: &Partition) -> Self {
        let i = OpMatrix::identity(n, partition);
        SimilarityCertificate {
            x: i.clone(),
            x_inv: i,
            bounded: true,
        }
    }

    pub fn x(&self) -> &OpMatrix {
        &self.x
    }

    pub fn x_inv(&self) -> &OpMatrix {
        &self.x_inv
    }

    pub fn bounded(&self) -> bool {
        self.bounded
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    /// `x * a * x_inv`.
    pub fn conjugate(&self, a: &OpMatrix) -> Result<OpMatrix, EngineError> {
        self.x.matmul(a)?.matmul(&self.x_inv)
    }

    /// `x_inv * a * x` (undo the conjugation).
    pub fn conjugate_back(&self, a: &OpMatrix) -> Result<OpMatrix, EngineError> {
        self.x_inv.matmul(a)?.matmul(&self.x)
    }

    /// Certificate of `other . self` (apply `self` first).
    pub fn then(
        &self,
        other: &SimilarityCertificate,
    ) -> Result<SimilarityCertificate, EngineError> {
        let x = other.x.matmul(&self.x)?;
        let x_inv = self.x_inv.matmul(&other.x_inv)?;
        Ok(SimilarityCertificate {
            bounded: x.is_bounded_matrix() && x_inv.is_bounded_matrix(),
            x,
            x_inv,
        })
    }

    pub fn invert(&self) -> SimilarityCertificate {
        SimilarityCertificate {
            x: self.x_inv.clone(),
            x_inv: self.x.clone(),
            bounded: self.bounded,
        }
    }

    /// Certificate for `self (+) other` acting on a direct sum.
    pub fn direct_sum(
        &self,
        other: &SimilarityCertificate,
    ) -> Result<SimilarityCertificate, EngineError> {
        let x = self.x.direct_sum(&other.x)?;
        let x_inv = self.x_inv.direct_sum(&other.x_inv)?;
        Ok(SimilarityCertificate {
            bounded: self.bounded && other.bounded,
            x,
            x_inv,
        })
    }

    pub fn refine(&self, finer: &Partition) -> SimilarityCertificate {
        SimilarityCertificate {
            x: self.x.refine(finer),
            x_inv: self.x_inv.refine(finer),
            bounded: self.bounded,
        }
    }
}
