//! Isometric immersion of surfaces with negative Gauss curvature through a
//! Chaplygin-gas formulation of the Gauss–Codazzi equations.
//!
//! The pipeline is: a [`metric::MetricField`] supplies curvature and
//! Christoffel symbols; [`fluid_map`] converts between second fundamental
//! forms and fluid states; [`solver`] marches the Codazzi balances with
//! vanishing viscosity; [`reconstruct`] integrates the Gauss–Weingarten frame
//! to recover the surface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod expr;
pub mod fluid_map;
pub mod gas_reference;
pub mod jet;
pub mod metric;
pub mod reconstruct;
pub mod solver;
