//! Constructive approximation of totally symmetric and totally anti-symmetric
//! functions of `N` particles in `R^d`.
//!
//! The symmetric approximator tabulates `f` on the wedge of sorted lattice
//! configurations and evaluates either as a piecewise constant (with an
//! equivalent sum-decomposition form `phi(sum_j g(x_j))` built from Ryser's
//! permanent formula) or with smooth cutoffs. The anti-symmetric approximator
//! multiplies the same tabulation by a Vandermonde factor built from a
//! permutation-equivariant map.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antisymmetric;
pub mod domain;
pub mod error;
pub mod harness;
pub mod hexfloat;
pub mod lattice;
pub mod model;
pub mod permanent;
pub mod permutation;
pub mod symmetric;
pub mod sympoly;
pub mod target;

pub use domain::{Configuration, DomainSpec, Point};
pub use error::{Error, Result};
pub use lattice::{LatticeSpec, WedgeIndex};
pub use permutation::Permutation;
pub use target::{builtin_target, Symmetry, TargetFunction};
