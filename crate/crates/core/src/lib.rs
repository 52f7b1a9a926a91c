//! Numerical laboratory for Wintgen ideal submanifolds.
//!
//! The pipeline evaluates parametrized immersions with exact order-2 jets,
//! builds orthonormal frames and fundamental forms, evaluates the DDVV
//! inequality together with a constructive equality certificate, and
//! computes the Moebius invariants (conformal factor, light-cone lift,
//! Moebius metric, the tensors B and A, and the Moebius form).
//!
//! Numeric code is generic over [`Real`]; the `*64` aliases below fix the
//! scalar to `f64`, which is what the tolerances in this crate are tuned for.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ddvv;
pub mod expr;
pub mod geometry;
pub mod immersions;
pub mod jets;
pub mod linalg;
pub mod moebius;
pub mod probe;
pub mod scalar;

pub use scalar::Real;

pub type Jet64 = jets::Jet<f64>;
pub type Immersion64 = immersions::Immersion<f64>;
pub type LorentzMatrix64 = immersions::LorentzMatrix<f64>;
pub type FundamentalForms64 = geometry::FundamentalForms<f64>;
pub type DdvvReport64 = ddvv::DdvvReport<f64>;
pub type WintgenCertificate64 = ddvv::WintgenCertificate<f64>;
pub type MoebiusInvariants64 = moebius::MoebiusInvariants<f64>;
pub type InvariantScalars64 = moebius::InvariantScalars<f64>;
