//! Simulation and estimation kernels for laser phase plate transmission
//! electron microscopy.
//!
//! The forward models (laser phase profile, Ronchigram synthesis, contrast
//! transfer function, detector response) are generic over the floating point
//! type through [`Real`]. The inverse problems in [`estimation`] work in `f64`.
//! Concrete `f64` aliases are re-exported at the crate root.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod constants;
pub mod ctf;
pub mod detector;
pub mod error;
pub mod estimation;
pub mod fft;
pub mod physics;
pub mod propagation;
pub mod raster;
pub mod scalar;
pub mod special;

pub use error::{LppError, Result};
pub use raster::{Plane, RasterImage, ValueKind};
pub use scalar::Real;

pub type ElectronBeamF64 = physics::ElectronBeam<f64>;
pub type LaserModeF64 = physics::LaserMode<f64>;
pub type LaserFieldF64 = physics::LaserField<f64>;
pub type RasterF64 = raster::RasterImage<f64>;
pub type ComplexFieldF64 = propagation::ComplexField<f64>;
pub type RonchigramSetupF64 = propagation::RonchigramSetup<f64>;
pub type DetectorGridF64 = propagation::DetectorGrid<f64>;
pub type CoincidenceParamsF64 = detector::CoincidenceParams<f64>;
pub type OpticsConfigF64 = ctf::OpticsConfig<f64>;
pub type PlateAlignmentF64 = ctf::PlateAlignment<f64>;
pub type FrequencyGridF64 = ctf::FrequencyGrid<f64>;
pub type CtfMapF64 = ctf::CtfMap<f64>;
pub type RadialProfileF64 = ctf::RadialProfile<f64>;
