//! Shared numerical primitives.

pub mod eig;
pub mod expm;
pub mod ode;
pub mod poly;
pub mod quad;
pub mod special;
pub mod stats;

pub use eig::{sym_eig, SymEigResult};
pub use expm::mat_exp;
pub use ode::{solve_ode, Event, EventHit, Method, OdeOptions, OdeSolution};
pub use poly::{poly_fit, poly_roots, PolyFit};
pub use quad::{integrate, integrate_semiinf, QuadratureResult, TailHint};
