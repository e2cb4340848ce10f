//! Core algorithms for co-observation secured multi-robot task assignment.
//!
//! The crate is `no_std` and only needs an allocator. It contains:
//!
//! * [`geometry`]: points, convex polygons and focal-sum ellipses.
//! * [`graph`]: team communication graphs and their Laplacians.
//! * [`assignment`]: weight construction, squarification and the inexact
//!   ADMM solver, plus a brute-force reference solver.
//! * [`netsim`]: a synchronous message-passing harness running the ADMM
//!   with neighbor-only communication.
//! * [`security`]: regroup lookup tables and online-task admissibility.
//! * [`control`]: CLF navigation rows, STL-derived barrier functions, the
//!   reference controller and the barrier security filter.
//!
//! Everything here is pure computation. File formats, the mission runner
//! and the command line live in the `coobs` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose so NaN fails every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod assignment;
pub mod control;
mod error;
pub mod geometry;
pub mod graph;
pub mod matrix;
pub mod netsim;
pub mod security;

pub use error::{Error, Result};
pub use geometry::Point2;
pub use matrix::Matrix;

pub(crate) mod num {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn hypot(x: f64, y: f64) -> f64 {
        libm::hypot(x, y)
    }
}
