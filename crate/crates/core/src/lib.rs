//! Numerical pipeline for a generalized transmission problem of
//! electrocardiology: given the electric potential measured on the body
//! surface, reconstruct the transmembrane potential on the heart boundary.
//!
//! The reconstruction runs in three steps:
//!
//! 1. a regularized ill-posed Cauchy solve on the body-minus-heart domain
//!    recovers the body potential and its conormal derivative on the heart
//!    boundary ([`cauchy`]);
//! 2. a Fredholm Neumann solve on the heart domain recovers the auxiliary
//!    combination `h = u_e + λ² u_i` ([`boundary`]);
//! 3. pointwise arithmetic produces the transmembrane potential
//!    `v = (h − u_b)/λ² − u_b` ([`pipeline`]).
//!
//! Everything is built for first-order constant-coefficient matrix operators
//! with injective principal symbol ([`operator`]); the classical scalar model
//! is the special case `A = ∇`. Discretization is piecewise-linear FEM on
//! 2-D triangulations ([`mesh`], [`fem`]).

// `!(x > 0.0)` is the NaN-rejecting form of a positivity guard; `x <= 0.0`
// would wave NaN parameters through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod cauchy;
pub mod error;
pub mod fem;
pub mod field;
pub mod mesh;
pub mod operator;
pub mod parallel;
pub mod pipeline;
pub mod verification;

pub use error::{Error, Result};
pub use field::Field;
pub use mesh::{BoundaryTag, Mesh};
pub use operator::{ConormalOperator, FirstOrderOperator, SecondOrderOperator};
