//! Finite element solver for elliptic equations in non-divergence form
//! `A : D^2 u = f` with homogeneous Dirichlet data, based on finite element
//! Hessian recovery.

pub mod adapt;
pub mod bench;
pub mod error;
pub mod estimate;
pub mod hessian;
pub mod mesh;
pub mod operator;
pub mod quadrature;
pub mod space;
pub mod solve;
pub mod sparse;

pub use error::{Error, Result};
