//! Self-similar expander profiles for the compressible Navier-Stokes system with
//! density-dependent viscosity, and a numerical audit of the shrinker energy argument.

pub mod continuation;
pub mod error;
pub mod expander;
pub mod grid;
pub mod quad;
pub mod residual;
pub mod shrinker;
pub mod types;

pub use error::{Error, Result};
pub use grid::{build_grid, build_grid_rmin, Coordinate, RadialGrid};
pub use quad::{cumulative_integral, differentiate, QuadratureReport, Weight};
pub use types::{BoundaryData, Mode, PhysicalParams, ProfileTriple, Regime, Startup};
