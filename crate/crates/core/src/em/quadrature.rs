//! Product quadrature on the unit sphere for band-limited integrands.
//!
//! For a truncation order `L` the rule combines a Gauss-Legendre rule with
//! `L + 1` nodes in `cos(theta)` and a uniform trapezoidal rule with
//! `2L + 2` points in azimuth. The product integrates spherical polynomials
//! of degree `<= 2L + 1` exactly, which covers products of two degree-L
//! band-limited factors; total weight is `4 pi`.
//!
//! Directions are stored polar-major: `q = i_polar * n_azimuth + i_azimuth`,
//! with polar nodes ascending in `cos(theta)` and azimuth `phi_j = 2 pi j /
//! n_azimuth`. Each direction also carries its tangential unit vectors
//! `theta_hat`, `phi_hat`, the local polarization basis of a plane-wave
//! spectrum sample.

use crate::error::Result;
use crate::geometry::Vec3;
use crate::scalar::RealScalar;

use super::special::gauss_legendre;

/// Quadrature grid over the unit sphere for order-`L` expansions.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalGrid<T> {
    order: usize,
    n_polar: usize,
    n_azimuth: usize,
    directions: Vec<Vec3<T>>,
    weights: Vec<T>,
    theta_hat: Vec<Vec3<T>>,
    phi_hat: Vec<Vec3<T>>,
    cos_polar: Vec<T>,
    polar_weights: Vec<T>,
}

impl<T: RealScalar> SphericalGrid<T> {
    /// Builds the rule for truncation order `L`.
    pub fn new(order: usize) -> Result<Self> {
        let n_polar = order + 1;
        let n_azimuth = 2 * order + 2;
        let (cos_polar, polar_weights) = gauss_legendre::<T>(n_polar)?;

        let dphi = T::from_f64_const(2.0) * T::PI() / T::from_usize(n_azimuth).unwrap();
        let azimuth_weight = dphi;

        let mut directions = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        let mut theta_hat = Vec::with_capacity(n_polar * n_azimuth);
        let mut phi_hat = Vec::with_capacity(n_polar * n_azimuth);

        for ip in 0..n_polar {
            let ct = cos_polar[ip];
            let st = (T::one() - ct * ct).max(T::zero()).sqrt();
            let w_polar = polar_weights[ip];
            for ia in 0..n_azimuth {
                let phi = dphi * T::from_usize(ia).unwrap();
                let (sp, cp) = (phi.sin(), phi.cos());
                directions.push(Vec3::new(st * cp, st * sp, ct));
                weights.push(w_polar * azimuth_weight);
                theta_hat.push(Vec3::new(ct * cp, ct * sp, -st));
                phi_hat.push(Vec3::new(-sp, cp, T::zero()));
            }
        }

        Ok(Self {
            order,
            n_polar,
            n_azimuth,
            directions,
            weights,
            theta_hat,
            phi_hat,
            cos_polar,
            polar_weights,
        })
    }

    /// Truncation order `L` the rule was built for.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of quadrature directions, `(L+1)(2L+2)`.
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn n_polar(&self) -> usize {
        self.n_polar
    }

    pub fn n_azimuth(&self) -> usize {
        self.n_azimuth
    }

    pub fn directions(&self) -> &[Vec3<T>] {
        &self.directions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// First tangential basis vector (polar direction) per sample.
    pub fn theta_hat(&self) -> &[Vec3<T>] {
        &self.theta_hat
    }

    /// Second tangential basis vector (azimuthal direction) per sample.
    pub fn phi_hat(&self) -> &[Vec3<T>] {
        &self.phi_hat
    }

    /// Gauss-Legendre nodes in `cos(theta)`, ascending.
    pub fn cos_polar(&self) -> &[T] {
        &self.cos_polar
    }

    /// Gauss-Legendre weights matching `cos_polar`.
    pub fn polar_weights(&self) -> &[T] {
        &self.polar_weights
    }

    /// Azimuth of column `ia`.
    pub fn azimuth(&self, ia: usize) -> T {
        T::from_f64_const(2.0) * T::PI() * T::from_usize(ia).unwrap()
            / T::from_usize(self.n_azimuth).unwrap()
    }

    /// True when two grids are interchangeable (same rule).
    pub fn same_rule(&self, other: &Self) -> bool {
        self.order == other.order
    }
}
