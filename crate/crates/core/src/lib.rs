//! Planar nonlocal curvature flow laboratory.
//!
//! The velocity law moves each boundary point of a planar set inward with
//! speed equal to the r-curvature: half the classical curvature plus or minus
//! `1/(2r)`, switched on or off by whether the externally or internally tangent
//! ball of radius `r` fits globally outside or inside the set.
//!
//! Modules:
//! - [`geometry`]: closed polylines and the geometric primitives on them.
//! - [`rcurv`]: tangent-ball predicates, r-curvature and its smoothed variant.
//! - [`flow`]: explicit front tracking with neckpinch surgery and barrier comparison.
//! - [`shapes`]: closed-form test and barrier sets.
//! - [`wave`]: the glued traveling-wave profile and its checks.
//! - [`scenario`], [`io`], [`reproduce`]: the file formats and the experiment driver.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod rcurv;
pub mod reproduce;
pub mod scenario;
pub mod shapes;
pub mod spatial;
pub mod wave;

pub use error::{Error, Result};
pub use geometry::{CurveFamily, PlanarCurve, Point2};
