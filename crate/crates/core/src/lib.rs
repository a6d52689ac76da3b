//! Free-surface liquid simulation on a uniform MAC grid with locally moving
//! grid windows.
//!
//! The background grid is discretized with finite volumes. Each moving window
//! is surrounded by a one-element-thick band of deformable bilinear finite
//! elements whose nodes are cell centers, so the pressure unknowns of both
//! discretizations coincide and a single linear system couples them.
//! Face-centered quantities near the band are interpolated with moving least
//! squares; cell-centered quantities switch between bilinear and element-wise
//! interpolation.
//!
//! Module map:
//! - [`fields`]: grid storage, liquid fractions, ghost-fluid factors, dumps,
//!   level-set reinitialization.
//! - [`mesh`]: moving regions, cell labels, seam elements, control volumes.
//! - [`interp`]: bilinear / element / MLS sampling.
//! - [`pressure`]: hybrid assembly, Krylov solves, velocity projection.
//! - [`transport`]: semi-Lagrangian advection and velocity extrapolation.
//! - [`sim`]: scene configuration and the time-step driver.
//! - [`harness`]: verification scenarios (interpolation convergence, pools,
//!   numerical diffusion).

// index loops mirror the stencil notation; `!(x > 0)` is used to catch NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod harness;
pub mod interp;
pub mod mesh;
pub mod pressure;
pub mod sim;
pub mod transport;

pub use error::{Error, Result};

/// 2D world-space vector.
pub type Vec2 = nalgebra::Vector2<f64>;
