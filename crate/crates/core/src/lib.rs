//! Isometric and quasi-isometric triangulations for analytic Riemannian
//! metric fields.
//!
//! A uniform macrotriangulation is refined into N^2 subtriangles per
//! macrotriangle, and the subvertices are moved at fixed connectivity until
//! every subtriangle matches the metric-weighted edge lengths and area of a
//! scaled ideal triangle (equilateral or right). The crate also provides the
//! measurements, geodesic solvers, and unitness classifiers used to check the
//! result.

// `!(a > b)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops read more clearly in the dense numeric kernels.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod geodesic;
pub mod io;
pub mod measures;
pub mod mesh;
pub mod metric;
pub mod objective;
pub mod optimizer;
pub mod pipeline;
pub mod sparse;
pub mod unitness;

pub use error::{Error, Result};

/// Points and vectors of the parameter plane.
pub type Point = nalgebra::Vector2<f64>;
