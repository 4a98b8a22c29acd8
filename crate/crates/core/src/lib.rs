//! Vortex-patch perimeter growth: contour dynamics in the plane, contour
//! advection over a spectral odd-odd solver on the torus, and the winding
//! and length diagnostics that tie boundary length to differential rotation.

pub mod cli_io;
pub mod diagnostics;
pub mod engine_free;
pub mod engine_torus;
mod error;
pub mod fields;
pub mod geometry;
pub mod integrate;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use fields::Velocity2;
pub use geometry::{MarkedCurve, PatchBoundary, Point2};
pub use state::PatchState;
