//! Free-space wave bookkeeping and the exact Hertzian-dipole field.
//!
//! Time convention is `e^{+j 2 pi f t}`, so outgoing waves carry
//! `e^{-j k R}` and the far field decays as `e^{-j k R} / R`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::geometry::{CVec3, Vec3};
use crate::scalar::RealScalar;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space wave impedance, ohms.
pub const ETA_0: f64 = 376.730_313_668;

/// Observation distances below this are treated as on top of the source.
pub const MIN_SOURCE_DISTANCE: f64 = 1e-9;

/// Wavenumber and impedance for one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveContext<T: RealScalar> {
    /// Frequency in Hz.
    pub frequency: T,
    /// Wavenumber `k = 2 pi f / c`, rad/m.
    pub wavenumber: T,
    /// Free-space impedance, ohms.
    pub impedance: T,
}

impl<T: RealScalar> WaveContext<T> {
    /// Builds the context for a single frequency in Hz.
    pub fn new(frequency: T) -> Result<Self> {
        if !(frequency.is_finite() && frequency > T::zero()) {
            return Err(Error::Domain(format!(
                "frequency must be finite and positive, got {frequency}"
            )));
        }
        let c = T::from_f64_const(SPEED_OF_LIGHT);
        let two_pi = T::from_f64_const(2.0) * T::PI();
        Ok(Self {
            frequency,
            wavenumber: two_pi * frequency / c,
            impedance: T::from_f64_const(ETA_0),
        })
    }

    /// Free-space wavelength, m.
    pub fn wavelength(&self) -> T {
        T::from_f64_const(SPEED_OF_LIGHT) / self.frequency
    }
}

/// Exact electric field of a Hertzian dipole with complex moment `p` at
/// `source`, observed at `observer`:
///
/// ```text
/// E = -j k eta g(R) [ C_t (p - (p.Rhat) Rhat) + C_r (p.Rhat) Rhat ]
/// g(R) = e^{-j k R} / (4 pi R)
/// C_t  = 1 - j/(kR) - 1/(kR)^2        (transverse part)
/// C_r  = 2j/(kR) + 2/(kR)^2           (radial part)
/// ```
///
/// Both the radiating `1/R` term and the reactive `1/R^2`, `1/R^3` terms
/// are kept, so the result is valid from the near field outward. Fails
/// with [`Error::Singularity`] when the observer is within
/// [`MIN_SOURCE_DISTANCE`] of the source.
pub fn dipole_field<T: RealScalar>(
    wave: &WaveContext<T>,
    source: Vec3<T>,
    moment: CVec3<T>,
    observer: Vec3<T>,
) -> Result<CVec3<T>> {
    let rel = observer - source;
    let dist = rel.norm();
    if dist < T::from_f64_const(MIN_SOURCE_DISTANCE) {
        return Err(Error::Singularity(format!(
            "observer within {MIN_SOURCE_DISTANCE} m of a dipole at ({}, {}, {})",
            source.x, source.y, source.z
        )));
    }
    let r_hat = rel.scale(T::one() / dist);
    let k = wave.wavenumber;
    let kr = k * dist;
    let inv_kr = T::one() / kr;
    let inv_kr2 = inv_kr * inv_kr;

    let c_t = Complex::new(T::one() - inv_kr2, -inv_kr);
    let c_r = Complex::new(T::from_f64_const(2.0) * inv_kr2, T::from_f64_const(2.0) * inv_kr);

    let four_pi = T::from_f64_const(4.0) * T::PI();
    // -j k eta e^{-j k R} / (4 pi R)
    let green = Complex::new(T::zero(), -k * wave.impedance / (four_pi * dist))
        * Complex::new(T::zero(), -kr).exp();

    let radial = moment.dot_real(r_hat);
    let p_radial = CVec3::new(
        radial * Complex::from(r_hat.x),
        radial * Complex::from(r_hat.y),
        radial * Complex::from(r_hat.z),
    );
    let p_transverse = moment - p_radial;

    Ok((p_transverse.scale(c_t) + p_radial.scale(c_r)).scale(green))
}
