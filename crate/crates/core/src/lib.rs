//! Pseudo-spectral solvers for incompressible and compressible viscoelastic
//! fluids in Lagrangian coordinates on the periodic box (0, 2π)³, together
//! with the closed-form linear reference solutions and the diagnostic
//! observables used to study their decay and scaling behavior.

pub mod compressible;
pub mod diagnostics;
pub mod error;
pub mod fft3;
pub mod field;
pub mod grid;
pub mod incompressible;
pub mod kinematics;
pub mod linear;
pub mod ops;
pub mod snapshot;
pub mod synth;

pub use error::{Error, Result};
pub use field::{Field, Rank};
pub use grid::{DealiasMode, Grid, PERIOD, VOLUME};
