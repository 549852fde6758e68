//! Morphological alignment metrics for subword tokenizers, a templatic
//! generator for Arabic root-and-pattern forms, and probes that measure how
//! well language models produce those forms.
//!
//! Metric code is generic over [`Scalar`], so the same computation runs in
//! `f32`, `f64` or exact rationals. The aliases below name the common cases.

pub mod alignment;
pub mod analysis;
pub mod corpus;
pub mod datagen;
pub mod metrics;
pub mod probe;
pub mod scalar;
pub mod templatic;

pub use num_rational::{BigRational, Rational64};
pub use scalar::Scalar;

/// Alignment report in double precision.
pub type Report = metrics::AlignmentReport<f64>;
/// Alignment report in single precision.
pub type Report32 = metrics::AlignmentReport<f32>;
/// Alignment report in exact 64-bit rationals.
pub type ExactReport = metrics::AlignmentReport<Rational64>;
/// Alignment report in arbitrary-precision rationals.
pub type BigExactReport = metrics::AlignmentReport<BigRational>;
/// Boundary scores in double precision.
pub type Boundary = metrics::BoundaryScores<f64>;
/// Corpus statistics in double precision.
pub type Stats = corpus::CorpusStats<f64>;
/// Corpus statistics with an exact average.
pub type ExactStats = corpus::CorpusStats<Rational64>;
