//! Exact dimension counts for linear systems of plane curves with assigned
//! multiple base points.
//!
//! The crate has four layers:
//!
//! - [`lattice`]: intersection theory on blow-ups of the plane at ordered
//!   configurations of (possibly infinitely near) points — pairing, canonical
//!   class, virtual and expected dimension, bounded enumeration of negative
//!   classes, bounded nefness tests.
//! - [`cremona`]: quadratic transformations, reduction to standard form with
//!   replayable logs, classification (empty / standard / excellent / ...),
//!   the SHGH dimension algorithm, and Nagata-type emptiness predicates.
//! - [`oracle`]: an independent certification route — interpolation matrices
//!   over a prime field, exact rank, and one-sided certificates for generic
//!   dimensions in characteristic zero.
//! - [`degeneration`]: a central-fiber engine that builds semistable
//!   degenerations of the plane, twists bundles, performs 1- and 2-throws,
//!   validates matching degrees and the triple point formula, checks lemma
//!   hypothesis windows, and runs matching-dimension ledgers.
//!
//! The numeric core is generic over an exact integer scalar (see
//! [`scalar::Scalar`]); the aliases below fix the default arbitrary-precision
//! instantiation.

// `Scalar` has no compound-assignment bounds, so sums rebind instead.
#![allow(clippy::assign_op_pattern)]

pub mod cremona;
pub mod degeneration;
pub mod lattice;
pub mod oracle;
pub mod scalar;

pub use scalar::Scalar;

/// Default exact integer scalar.
pub type Int = num_bigint::BigInt;

/// Divisor class over the default scalar.
pub type Class = lattice::DivisorClass<Int>;
