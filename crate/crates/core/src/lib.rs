//! Multipath-exploiting microwave imaging at desk scale.
//!
//! A transmitter illuminates a scene that also contains flat conducting
//! reflectors. Every reflector adds a mirror copy of each source, so a
//! small measurement plane effectively sees the scene from several extra
//! vantage points. This crate reconstructs those mirror contributions
//! separately - one outgoing plane-wave spectrum per mirror copy - and
//! folds them back on top of the true source, which sharpens the image
//! well beyond what the physical aperture alone supports.
//!
//! The pieces, bottom to top:
//!
//! * [`em`]: special functions, sphere quadrature, spherical harmonics,
//!   the far-field translation operator, and the exact dipole field.
//! * [`scene`]: reflector geometry and image-source enumeration.
//! * [`forward`]: measurement synthesis (exact fields summed over image
//!   sources) plus optional noise.
//! * [`isr`]: the matrix-free inverse-source solver that separates the
//!   per-copy spectra from one measurement set.
//! * [`imaging`]: filtered back-propagation of each spectrum and the
//!   coherent recombination that relocates mirror blobs onto the source.
//! * [`bpa`]: plain and reflection-aware back-projection baselines.
//! * [`analysis`]: peak finding, resolution and artifact-floor metrics.
//! * [`config`], [`io`], [`pipeline`]: scenario files, on-disk formats,
//!   and the staged simulate/invert/image/metrics pipeline the CLI runs.
//!
//! Math-layer routines are generic over the floating type through
//! [`scalar::RealScalar`]; the pipeline itself runs in `f64` via the
//! crate-root aliases below.

pub mod analysis;
pub mod bpa;
pub mod config;
pub mod em;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod isr;
pub mod pipeline;
pub mod scalar;
pub mod scene;

pub use error::{Error, Result};

/// Scalar type the pipeline runs at.
pub type Real = f64;

/// Complex scalar matching [`Real`].
pub type C64 = num_complex::Complex<f64>;

/// Real 3-vector at pipeline precision.
pub type Point3 = geometry::Vec3<Real>;

/// Complex 3-vector at pipeline precision (field values, dipole moments).
pub type Field3 = geometry::CVec3<Real>;
