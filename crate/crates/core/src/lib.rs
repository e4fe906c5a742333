//! Dyadic harmonic analysis on finite weighted trees.
//!
//! A finite rooted tree with positive leaf weights stands in for a space of
//! homogeneous type together with a dyadic family of cubes. On top of it the
//! crate builds:
//!
//! * [`tree`]: construction, loading and validation of dyadic trees;
//! * [`metric`]: the dyadic ultrametric `delta(x, y) = mu(Q(x, y))`, balls and
//!   normality checks;
//! * [`haar`]: weighted Haar systems of arbitrary branching with fast
//!   analysis/synthesis;
//! * [`operators`]: constant and variable symbol multipliers, their kernels,
//!   and generalized Petermichl shift operators;
//! * [`certify`]: measured Calderon-Zygmund constants, symbol bounds, norm
//!   probes and depth sweeps.
//!
//! All numerical code is generic over [`Real`]; the aliases at the bottom of
//! this file fix the scalar to `f64`.

pub mod certify;
pub mod function;
pub mod haar;
pub mod metric;
pub mod operators;
#[cfg(test)]
mod proptests;
mod scalar;
pub mod tree;

pub use function::LeafFunction;
pub use haar::{Coefficients, HaarFunction, HaarParams, HaarStrategy, HaarSystem};
pub use operators::{AlphaSequence, KernelMatrix, Symbol};
pub use scalar::Real;
pub use tree::{CubeId, DyadicTree, TreeStats};

/// Dyadic tree over `f64` measures.
pub type Tree = DyadicTree<f64>;
/// Haar system over `f64` values.
pub type Haar = HaarSystem<f64>;
/// Real function on the leaves of a [`Tree`].
pub type Function = LeafFunction<f64>;
/// Multiplier symbol over `f64`.
pub type Multiplier = Symbol<f64>;
/// Petermichl coefficient sequence over `f64`.
pub type Alphas = AlphaSequence<f64>;
/// Dense kernel over `f64`.
pub type Kernel = KernelMatrix<f64>;
/// Certification report over `f64`.
pub type Report = certify::CertReport<f64>;
