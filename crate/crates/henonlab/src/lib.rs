//! Numerical laboratory for one-parameter families of dissipative complex Hénon maps.
//!
//! The crate is organised bottom-up: [`family`] evaluates maps and families,
//! [`escape`] computes escape rates and rasters, [`periodic`] finds and
//! continues periodic orbits, [`manifolds`] parameterizes invariant manifolds,
//! [`basins`] linearizes sinks and certifies critical points, [`implosion`]
//! reduces semi-parabolic germs and solves transit problems, and [`tangency`]
//! hunts tangency parameters.

pub mod basins;
pub mod escape;
pub mod family;
pub mod implosion;
pub mod jet;
pub mod linalg;
pub mod manifolds;
pub mod maps;
pub mod periodic;
pub mod roots;
pub mod tangency;

pub use num_complex::Complex64 as C64;
