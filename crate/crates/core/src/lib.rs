//! Numerical workbench for spacelike graph hypersurfaces in twisted product
//! spacetimes `I ×_f F` over periodic torus fibers.
//!
//! The crate is organised bottom-up:
//!
//! * [`fiber_grid`]: the discrete fiber `(F, g_F)` and its periodic
//!   finite-difference calculus.
//! * [`twisted_spacetime`]: closed-form twist functions, expansion
//!   classification and slice geometry.
//! * [`graph_geometry`]: induced metric, hyperbolic angle, mean curvature and
//!   the Laplacian of the time-height function, each with an independent
//!   second computational path.
//! * [`conformal_lab`]: conformal transformation laws as executable
//!   two-sided identities.
//! * [`cmc_solver`]: damped Newton–Krylov solver for the prescribed mean
//!   curvature equation with non-existence certificates.
//! * [`runner`]: configuration-driven tasks behind the `twistbench` binary.

// Stencil loops index several parallel arrays; negated float comparisons
// are deliberate so that NaN fails validation.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cmc_solver;
pub mod config;
pub mod conformal_lab;
pub mod corpus;
pub mod error;
pub mod fiber_grid;
pub mod graph_geometry;
pub mod output;
pub mod runner;
pub mod smallmat;
pub mod twisted_spacetime;
pub mod verification;

pub use error::{Error, Result};
pub use fiber_grid::{FiberGrid, MetricCoeff, ScalarField, VectorField};
pub use graph_geometry::GraphField;
pub use twisted_spacetime::{SpacetimeModel, TimeProfile, TrigTerm, TwistedFunction};
