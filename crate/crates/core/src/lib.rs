//! Monte Carlo toolkit for the left-invariant hypoelliptic diffusion on the
//! Poincaré group that lifts Dudley's relativistic diffusion.
//!
//! The crate is organized around the graded geometry of the group:
//!
//! * [`lorentz`] — exact arithmetic for Minkowski space, the Lorentz group
//!   `SO0(1,d)`, the Poincaré group and its Lie algebra.
//! * [`graded`] — dilations, homogeneous norm, angular variable, exponential
//!   chart relative coordinates and the closed-form first-order BCH limits.
//! * [`driver`] — seeded Brownian drivers with per-step Lévy-area and
//!   time-weighted records, plus the descent-weighted permutation
//!   combinations of iterated Stratonovich integrals.
//! * [`diffusion`] — the group-valued integrator, the projection to
//!   hyperbolic Brownian motion plus its time integral, and rescaled views.
//! * [`tangent`] — the explicit algebra-valued tangent process, scaling-law
//!   and coupled Taylor-remainder harnesses, occupation-density estimation.
//! * [`green`] — occupation-time Green estimates for the killed diffusion,
//!   diagonal-scaling checks, cone hitting, slice capacities and the
//!   Wiener-sum diagnostic.
//!
//! Everything is deterministic given a root seed; parallel reductions are
//! chunked so results do not depend on thread scheduling.

pub mod diffusion;
pub mod driver;
pub mod error;
pub mod graded;
pub mod green;
pub mod lorentz;
pub mod mat;
pub mod rng;
pub mod selftest;
pub mod stats;
pub mod tangent;

pub use error::{Error, Result};
pub use graded::{angular, dilate, graded_dimension, hnorm, relative_coords, GradedLayout};
pub use lorentz::{AlgebraElement, GroupElement, MinkowskiVector};

/// Smallest admissible spatial dimension (the first layer must have rank at least 2).
pub const MIN_DIM: usize = 2;
/// Largest supported spatial dimension; keeps every matrix at most 8x8.
pub const MAX_DIM: usize = 6;

/// Validates a spatial dimension `d`, returning it for chaining.
pub fn check_dim(d: usize) -> Result<usize> {
    if (MIN_DIM..=MAX_DIM).contains(&d) {
        Ok(d)
    } else {
        Err(Error::InvalidParams(format!(
            "spatial dimension d={d} outside supported range {MIN_DIM}..={MAX_DIM}"
        )))
    }
}
