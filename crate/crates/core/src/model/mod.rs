pub mod farfield;
pub mod inhomogeneity;
pub mod params;
pub mod residual;
pub mod phase_path;
pub mod selection;
