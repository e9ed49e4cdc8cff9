//! Problem data, Cordes analysis and the discrete operators of both schemes.

pub mod cordes;
pub mod nsz;
pub mod problem;
pub mod system;

pub use cordes::{cordes_analyze, cordes_on_mesh, default_penalties, gamma, CordesInfo};
pub use nsz::assemble_nsz;
pub use problem::{Experiment, ExactSolution, ProblemData, Rect, Sym2};
pub use system::{assemble_b, assemble_load, assemble_stabilization, SystemOperator};
