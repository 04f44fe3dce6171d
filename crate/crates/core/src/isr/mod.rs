//! Inverse source reconstruction: separate the outgoing plane-wave
//! spectrum of every source copy (original and mirror images) from one
//! set of measured fields.
//!
//! Each copy gets a bounding sphere ("source box"). Per frequency, the
//! unknowns are the two tangential components (theta, phi) of each box's
//! spectrum at the quadrature directions of a shared sphere rule — a
//! radiated plane-wave spectrum has no radial part, so tangentiality is
//! built into the parameterization rather than imposed as a constraint.
//! The forward map expands each sample to Cartesian through the local
//! basis and translates every box spectrum to every sample point through
//! the diagonal translation operator,
//!
//! ```text
//! E(r_m) = sum_i (-j k / 4 pi) sum_q w_q T_L(khat_q, r_m - c_i) x_i(khat_q)
//! ```
//!
//! and the least-squares solution is found by conjugate gradients on the
//! normal equations. Starting from zero, CG iterates stay in the row
//! space of the operator, so the minimum-norm solution is returned even
//! when the system is underdetermined.

pub mod operator;
pub mod solve;

pub use operator::IsrOperator;

use num_complex::Complex;

use crate::em::quadrature::SphericalGrid;
use crate::em::translation::translation_order;
use crate::em::wave::WaveContext;
use crate::error::{Error, Result};
use crate::forward::MeasurementSet;
use crate::geometry::{CVec3, Mat3, Vec3};
use crate::scene::Scene;

/// Bounding sphere for one source copy, tagged with how the copy was
/// produced so imaging can relocate and sign-correct it later.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBox {
    /// Sphere center (the copy position from the image expansion).
    pub center: Vec3<f64>,
    /// Sphere radius, m.
    pub radius: f64,
    /// Physical source this copy descends from.
    pub source_index: usize,
    /// Number of reflections behind this copy.
    pub order: usize,
    /// Reflector indices applied to the source, in order.
    pub plane_sequence: Vec<usize>,
    /// Composed moment map of those reflections.
    pub moment_map: Mat3,
}

/// Solver knobs; see the config layer for on-disk names and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Image-expansion order the boxes are built to.
    pub max_image_order: usize,
    /// Box radius, m.
    pub box_radius: f64,
    /// Accuracy parameter of the truncation rule (target digits).
    pub digits: f64,
    /// CG stop: relative normal-equation residual.
    pub tolerance: f64,
    /// CG stop: iteration cap.
    pub max_iterations: usize,
    /// Tikhonov weight (0 disables).
    pub tikhonov_weight: f64,
    /// Required ratio of measurement scalars to unknown scalars.
    pub min_measurement_fraction: f64,
    /// Extra clearance demanded between sample points and box spheres, m.
    pub separation_margin: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_image_order: 1,
            box_radius: 0.03,
            digits: 3.0,
            tolerance: 1e-8,
            max_iterations: 60,
            tikhonov_weight: 0.0,
            min_measurement_fraction: 1.0,
            separation_margin: 0.02,
        }
    }
}

/// Spectra for one frequency: `values[(ibox * grid.len() + q) * 2 + s]`
/// with `s = 0` the polar (theta) and `s = 1` the azimuthal (phi)
/// tangential component.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySpectra {
    pub frequency: f64,
    pub wavenumber: f64,
    pub order: usize,
    pub grid: SphericalGrid<f64>,
    pub values: Vec<Complex<f64>>,
}

impl FrequencySpectra {
    /// Spectrum of one box: `2 * grid.len()` values, direction-major.
    pub fn box_values(&self, ibox: usize) -> &[Complex<f64>] {
        let n = self.grid.len() * 2;
        &self.values[ibox * n..(ibox + 1) * n]
    }

    /// One direction of one box's spectrum, expanded to Cartesian through
    /// the direction's tangential basis.
    pub fn cartesian(&self, ibox: usize, q: usize) -> CVec3<f64> {
        let base = (ibox * self.grid.len() + q) * 2;
        let t = self.values[base];
        let p = self.values[base + 1];
        let th = self.grid.theta_hat()[q];
        let ph = self.grid.phi_hat()[q];
        CVec3::new(
            t.scale(th.x) + p.scale(ph.x),
            t.scale(th.y) + p.scale(ph.y),
            t.scale(th.z) + p.scale(ph.z),
        )
    }

    /// Quadrature-weighted energy of one box's spectrum. The tangential
    /// basis is orthonormal, so this equals the Cartesian energy.
    pub fn box_energy(&self, ibox: usize) -> f64 {
        let vals = self.box_values(ibox);
        self.grid
            .weights()
            .iter()
            .enumerate()
            .map(|(q, &w)| w * (vals[q * 2].norm_sqr() + vals[q * 2 + 1].norm_sqr()))
            .sum()
    }
}

/// Separated spectra for all boxes and frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSet {
    pub boxes: Vec<SourceBox>,
    pub per_frequency: Vec<FrequencySpectra>,
}

/// Convergence record of one frequency's CG run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub frequency: f64,
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`.
    pub relative_residual: f64,
    /// `||A^H (b - A x)|| / ||A^H b||` after each iteration.
    pub normal_residual_history: Vec<f64>,
    /// Spectrum energy per box (quadrature-weighted).
    pub box_energy: Vec<f64>,
}

/// Builds one source box per image copy of `scene` up to `max_order`.
pub fn source_boxes(scene: &Scene, max_order: usize, radius: f64) -> Result<Vec<SourceBox>> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Config(format!("box radius must be positive, got {radius}")));
    }
    let images = scene.image_sources(max_order)?;
    let boxes: Vec<SourceBox> = images
        .into_iter()
        .map(|img| SourceBox {
            center: img.position,
            radius,
            source_index: img.source_index,
            order: img.order,
            plane_sequence: img.plane_sequence,
            moment_map: img.moment_map,
        })
        .collect();
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            let gap = (boxes[i].center - boxes[j].center).norm();
            if gap < boxes[i].radius + boxes[j].radius {
                return Err(Error::Geometry(format!(
                    "source boxes {i} and {j} overlap: centers {gap:.4} m apart, radii sum {:.4} m",
                    boxes[i].radius + boxes[j].radius
                )));
            }
        }
    }
    Ok(boxes)
}

/// Exact outgoing spectrum of a Hertzian dipole at `position` with moment
/// `moment`, referenced to a box centered at `center`:
///
/// ```text
/// x(khat) = (-j k eta / 4 pi) (I - khat khat^T) p  e^{+j k khat . (position - center)}
/// ```
///
/// returned in the tangential basis — the transverse projector reduces to
/// plain dot products there, `x_theta = theta_hat . p`, `x_phi = phi_hat . p`.
/// Ground truth for round-trip tests: a dipole at the box center makes
/// the forward model exact (the spectrum is a degree-2 polynomial on the
/// sphere, inside the quadrature's design degree, with no offset phase).
pub fn dipole_spectrum(
    wave: &WaveContext<f64>,
    center: Vec3<f64>,
    position: Vec3<f64>,
    moment: CVec3<f64>,
    grid: &SphericalGrid<f64>,
) -> Vec<Complex<f64>> {
    let k = wave.wavenumber;
    let prefactor = Complex::new(0.0, -k * wave.impedance / (4.0 * std::f64::consts::PI));
    let offset = position - center;
    let mut out = Vec::with_capacity(grid.len() * 2);
    for (q, &khat) in grid.directions().iter().enumerate() {
        let phase = Complex::new(0.0, k * khat.dot(offset)).exp();
        let s = prefactor * phase;
        out.push(s * moment.dot_real(grid.theta_hat()[q]));
        out.push(s * moment.dot_real(grid.phi_hat()[q]));
    }
    out
}

/// Separates per-box spectra from `measurements` for every frequency.
///
/// Boxes are shared across frequencies; the quadrature order follows the
/// truncation rule at each frequency (diameter `2 * radius`). Fails fast
/// if sample points crowd the boxes, boxes overlap, or the measurement
/// count falls below `min_measurement_fraction` of the unknown count.
pub fn solve_isr(
    measurements: &MeasurementSet,
    boxes: &[SourceBox],
    settings: &SolverSettings,
) -> Result<(SpectrumSet, Vec<SolveDiagnostics>)> {
    if boxes.is_empty() {
        return Err(Error::Config("no source boxes to solve for".into()));
    }
    if measurements.frequencies.is_empty() || measurements.points.is_empty() {
        return Err(Error::StageInput("empty measurement set".into()));
    }
    let max_radius = boxes.iter().map(|b| b.radius).fold(0.0f64, f64::max);

    let mut per_frequency = Vec::with_capacity(measurements.frequencies.len());
    let mut diagnostics = Vec::with_capacity(measurements.frequencies.len());
    for (ifreq, &f) in measurements.frequencies.iter().enumerate() {
        let wave = WaveContext::new(f)?;
        let order = translation_order(wave.wavenumber, 2.0 * max_radius, settings.digits)?;
        let grid = SphericalGrid::new(order)?;

        let n_meas = measurements.points.len() * measurements.components.len();
        let n_unknown = boxes.len() * grid.len() * 2;
        let fraction = n_meas as f64 / n_unknown as f64;
        if fraction < settings.min_measurement_fraction {
            return Err(Error::Config(format!(
                "{n_meas} measurement scalars for {n_unknown} unknowns at {f:.3e} Hz \
                 (ratio {fraction:.3} < required {})",
                settings.min_measurement_fraction
            )));
        }

        let op = IsrOperator::new(
            wave.wavenumber,
            &measurements.points,
            &measurements.components,
            boxes,
            grid,
            order,
            settings.separation_margin,
        )?;
        let b = measurements.frequency_block(ifreq);
        let outcome = solve::cgls(
            &op,
            b,
            settings.tolerance,
            settings.max_iterations,
            settings.tikhonov_weight,
        )?;

        let spectra = FrequencySpectra {
            frequency: f,
            wavenumber: wave.wavenumber,
            order,
            grid: op.into_grid(),
            values: outcome.solution,
        };
        let box_energy = (0..boxes.len()).map(|i| spectra.box_energy(i)).collect();
        diagnostics.push(SolveDiagnostics {
            frequency: f,
            iterations: outcome.iterations,
            relative_residual: outcome.relative_residual,
            normal_residual_history: outcome.normal_residual_history,
            box_energy,
        });
        per_frequency.push(spectra);
    }

    Ok((SpectrumSet { boxes: boxes.to_vec(), per_frequency }, diagnostics))
}
