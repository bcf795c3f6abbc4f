//! Numerical laboratory for second-order hyperbolic equations on flat tori:
//! Cauchy solves with rough coefficients, energy estimates, mollification,
//! null initial surfaces and the characteristic (Goursat) problem.

pub mod cauchy;
pub mod fields;
pub mod goursat;
pub mod grid;
pub mod harness;
pub mod mollify;
pub mod norms;
pub mod surface;
