//! Electromagnetic building blocks: special functions, sphere quadrature,
//! spherical harmonics, the far-field translation operator, and the exact
//! dipole field.

pub mod quadrature;
pub mod special;
pub mod sph_harm;
pub mod translation;
pub mod wave;
