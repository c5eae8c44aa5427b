//! Deformed roll patterns of the 2-D real Ginzburg-Landau equation
//! `0 = Delta A + A - A|A|^2 + eps g` with a localized inhomogeneity `g`.

pub mod config;
pub mod error;
pub mod fit;
pub mod grid;
pub mod io;
pub mod jet;
pub mod model;
pub mod quadrature;
pub mod solvers;
pub mod spectral;
pub mod stencil;

pub use error::{GlError, Result};
pub use grid::{ComplexField, Grid2D, RealField};
pub use model::{
    farfield::{Cutoff, FarFieldSample},
    inhomogeneity::Inhomogeneity,
    params::GLParams,
    residual::{ApModel, StateAP},
};
