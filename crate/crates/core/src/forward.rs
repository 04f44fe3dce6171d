//! Measurement synthesis: exact dipole fields summed over the image
//! expansion, sampled on a rectangular plane, with optional additive
//! noise at a prescribed signal-to-noise ratio.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::em::wave::{dipole_field, WaveContext};
use crate::error::{Error, Result};
use crate::geometry::{CVec3, Vec3};
use crate::scene::Scene;

/// Image copies closer than this to a sample point make the synthesized
/// field meaningless; the simulation refuses rather than records spikes.
pub const MIN_SAMPLE_CLEARANCE: f64 = 1e-6;

/// Cartesian field component recorded by the probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldComponent {
    X,
    Y,
    Z,
}

impl FieldComponent {
    /// All three components, in storage order.
    pub const ALL: [FieldComponent; 3] = [FieldComponent::X, FieldComponent::Y, FieldComponent::Z];

    /// Picks this component out of a field vector.
    pub fn select(self, field: CVec3<f64>) -> Complex<f64> {
        match self {
            FieldComponent::X => field.x,
            FieldComponent::Y => field.y,
            FieldComponent::Z => field.z,
        }
    }

    /// Axis index (0, 1, 2).
    pub fn axis(self) -> usize {
        match self {
            FieldComponent::X => 0,
            FieldComponent::Y => 1,
            FieldComponent::Z => 2,
        }
    }
}

/// Rectangular sampling aperture with a regular cell-centered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlane {
    /// Aperture center.
    pub center: Vec3<f64>,
    /// Unit normal (probe boresight, toward the scene).
    pub normal: Vec3<f64>,
    /// Extent along the first in-plane axis, m.
    pub width: f64,
    /// Extent along the second in-plane axis, m.
    pub height: f64,
    /// Sample count along the width.
    pub nu: usize,
    /// Sample count along the height.
    pub nv: usize,
}

impl SamplePlane {
    pub fn new(
        center: Vec3<f64>,
        normal: Vec3<f64>,
        width: f64,
        height: f64,
        nu: usize,
        nv: usize,
    ) -> Result<Self> {
        let normal = normal
            .normalized()
            .ok_or_else(|| Error::Geometry("sample plane normal must be nonzero".into()))?;
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::Geometry(format!(
                "sample plane extent must be positive, got {width} x {height}"
            )));
        }
        if nu == 0 || nv == 0 {
            return Err(Error::Geometry("sample plane needs at least one sample".into()));
        }
        Ok(Self { center, normal, width, height, nu, nv })
    }

    /// Deterministic in-plane axes `(u, v)` with `u x v = normal`: `u` is
    /// built from the world axis least aligned with the normal, so nearly
    /// axis-aligned planes get the natural world axes.
    pub fn basis(&self) -> (Vec3<f64>, Vec3<f64>) {
        let candidates = [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()];
        let mut pick = candidates[0];
        let mut best = f64::INFINITY;
        for c in candidates {
            let align = c.dot(self.normal).abs();
            if align < best {
                best = align;
                pick = c;
            }
        }
        let u = pick
            .cross(self.normal)
            .normalized()
            .expect("axis least aligned with the normal cannot be parallel to it");
        let v = self.normal.cross(u);
        (u, v)
    }

    /// Number of sample points.
    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell-centered grid points, `v`-major (`index = iv * nu + iu`).
    pub fn points(&self) -> Vec<Vec3<f64>> {
        let (u, v) = self.basis();
        let du = self.width / self.nu as f64;
        let dv = self.height / self.nv as f64;
        let mut out = Vec::with_capacity(self.len());
        for iv in 0..self.nv {
            let sv = (iv as f64 + 0.5) - self.nv as f64 / 2.0;
            for iu in 0..self.nu {
                let su = (iu as f64 + 0.5) - self.nu as f64 / 2.0;
                out.push(self.center + u.scale(su * du) + v.scale(sv * dv));
            }
        }
        out
    }

    /// Area represented by one sample, m^2.
    pub fn cell_area(&self) -> f64 {
        (self.width / self.nu as f64) * (self.height / self.nv as f64)
    }
}

/// Sampled field data: `values[(ifreq * points + ipt) * comps + icomp]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub frequencies: Vec<f64>,
    pub points: Vec<Vec3<f64>>,
    pub components: Vec<FieldComponent>,
    pub values: Vec<Complex<f64>>,
}

impl MeasurementSet {
    /// Flat index of `(ifreq, ipt, icomp)`.
    pub fn index(&self, ifreq: usize, ipt: usize, icomp: usize) -> usize {
        (ifreq * self.points.len() + ipt) * self.components.len() + icomp
    }

    pub fn value(&self, ifreq: usize, ipt: usize, icomp: usize) -> Complex<f64> {
        self.values[self.index(ifreq, ipt, icomp)]
    }

    /// All values for one frequency, point-major.
    pub fn frequency_block(&self, ifreq: usize) -> &[Complex<f64>] {
        let n = self.points.len() * self.components.len();
        &self.values[ifreq * n..(ifreq + 1) * n]
    }

    /// Mean squared magnitude over every sample.
    pub fn mean_power(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }
}

/// Synthesizes the field of `scene` expanded to `max_image_order`
/// reflections at each plane point and frequency.
///
/// Every image copy radiates the exact dipole field, so this is the
/// reference data the inverse stages consume. Fails if any copy sits
/// within [`MIN_SAMPLE_CLEARANCE`] of a sample point.
pub fn simulate_measurements(
    scene: &Scene,
    max_image_order: usize,
    plane: &SamplePlane,
    frequencies: &[f64],
    components: &[FieldComponent],
) -> Result<MeasurementSet> {
    if frequencies.is_empty() {
        return Err(Error::Config("no frequencies to simulate".into()));
    }
    if components.is_empty() {
        return Err(Error::Config("no recorded components".into()));
    }
    let images = scene.image_sources(max_image_order)?;
    let points = plane.points();
    for img in &images {
        for (ipt, &p) in points.iter().enumerate() {
            if (p - img.position).norm() < MIN_SAMPLE_CLEARANCE {
                return Err(Error::Singularity(format!(
                    "image copy (order {}) within {MIN_SAMPLE_CLEARANCE} m of sample point {ipt}",
                    img.order
                )));
            }
        }
    }

    let contexts: Result<Vec<WaveContext<f64>>> =
        frequencies.iter().map(|&f| WaveContext::new(f)).collect();
    let contexts = contexts?;

    let mut values = vec![Complex::new(0.0, 0.0); frequencies.len() * points.len() * components.len()];
    let block = points.len() * components.len();
    values
        .par_chunks_mut(block)
        .zip(contexts.par_iter())
        .try_for_each(|(chunk, wave)| -> Result<()> {
            for (ipt, &p) in points.iter().enumerate() {
                let mut field = CVec3::zero();
                for img in &images {
                    field = field + dipole_field(wave, img.position, img.moment, p)?;
                }
                for (ic, comp) in components.iter().enumerate() {
                    chunk[ipt * components.len() + ic] = comp.select(field);
                }
            }
            Ok(())
        })?;

    Ok(MeasurementSet {
        frequencies: frequencies.to_vec(),
        points,
        components: components.to_vec(),
        values,
    })
}

/// Adds complex white Gaussian noise so the aggregate SNR over all
/// samples hits `snr_db`. `None` and non-finite targets leave the data
/// untouched. Seeded: the same seed reproduces the same noise.
pub fn add_noise(measurements: &mut MeasurementSet, snr_db: Option<f64>, seed: u64) {
    let Some(snr_db) = snr_db else { return };
    if !snr_db.is_finite() {
        return;
    }
    let signal_power = measurements.mean_power();
    if signal_power == 0.0 {
        return;
    }
    let noise_power = signal_power / 10.0f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt(); // per real part
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in measurements.values.iter_mut() {
        let (a, b) = gaussian_pair(&mut rng);
        *v += Complex::new(sigma * a, sigma * b);
    }
}

/// One Box-Muller draw: two independent standard normals.
fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Guard the log: gen() is in [0, 1), flip to (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    (r * phi.cos(), r * phi.sin())
}
