//! Exact symbolic engine for operator-valued matrices over a measured interval.
//!
//! The coefficient ring is the field of piecewise-rational functions with
//! Gaussian-rational coefficients on a partitioned interval `[a, b]`, a
//! computable stand-in for `L^inf(mu)`. On top of it the crate builds:
//!
//! * [`opmatrix`] — matrices over the scalar field, trace/rank functions,
//!   idempotent and centrality predicates;
//! * [`diag`] — constructive diagonalization of idempotents and simultaneous
//!   diagonalization of frames, with exact invertible certificates;
//! * [`structure`] — finite frames, canonical local block forms, and exact
//!   frame-existence decisions with obstruction witnesses;
//! * [`commutant`] — relative commutant solving, splitting idempotents and
//!   shears, diagonalization inside the commutant, and conjugation of maximal
//!   abelian idempotent sets;
//! * [`ktheory`] — the local K0 invariant of the relative commutant and the
//!   similarity classifier built on it;
//! * [`oracle`] — floating-point pointwise verification of symbolic results.
//!
//! Every certificate the engine produces is verified exactly (zero tolerance)
//! before it is returned; the numeric oracle is one-directional and never
//! feeds back into the symbolic path.

pub mod certificate;
pub mod commutant;
pub mod diag;
pub mod eigen;
pub mod error;
pub mod ktheory;
pub mod linalg;
pub mod opmatrix;
pub mod oracle;
pub mod partition;
pub mod piecewise;
pub mod poly;
pub mod ratfunc;
pub mod rational;
pub mod realroots;
pub mod structure;
pub mod triangular;

pub use certificate::SimilarityCertificate;
pub use error::EngineError;
pub use opmatrix::{OpMatrix, TraceFunction};
pub use partition::Partition;
pub use piecewise::PiecewiseRational;
pub use rational::Gq;
