//! Aligned, property-annotated molecular surface point clouds.
//!
//! The pipeline runs structure file → charges → scalar grids → isosurface →
//! evenly sampled points → geodesic topology descriptors → canonical frame →
//! `.npz` record. Geometry is generic over [`Real`]; the `*64` / `*32`
//! aliases below name the common instantiations.

pub mod alignment;
pub mod chemio;
pub mod cloudstore;
pub mod error;
pub mod evalkit;
pub mod fieldgen;
pub mod fingerprint;
pub mod numeric;
pub mod pipeline;
pub mod surface;
pub mod topology;

pub use error::{Error, Result};
pub use numeric::{Mat3, Real, Vec3};

pub type Vec3f64 = Vec3<f64>;
pub type Molecule64 = chemio::Molecule<f64>;
pub type Molecule32 = chemio::Molecule<f32>;
