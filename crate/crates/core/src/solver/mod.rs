pub mod krylov;
pub mod ray;
pub mod spectral;
pub mod torus;

pub use ray::solve_ray;
pub use spectral::{Grid, HessianField};
pub use torus::{continuity_solve, SolveOptions, SolveOutput, SolveStatus, SolveTrace, TorusProblem};
