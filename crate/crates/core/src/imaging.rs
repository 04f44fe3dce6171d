//! Filtered back-propagation of separated spectra and the coherent
//! recombination that folds every mirror copy back onto the source.
//!
//! A box spectrum `x(khat)` referenced to its center back-propagates as
//!
//! ```text
//! I(r) = sum_q w_q F(khat_q . bhat) v(khat_q) e^{-j k khat_q . (r - a)}
//! ```
//!
//! where `v = x_theta thetahat + x_phi phihat` is the Cartesian radiator
//! vector and the anchor `a` sets where the blob lands. Anchoring at the
//! box center reproduces the radiator where it sits; anchoring a mirror
//! copy at the original source position is a pure Fourier shift that
//! relocates its blob onto the source without touching the spectrum. `F`
//! keeps only directions that actually cross the measurement aperture -
//! the rest of the sphere carries no information and only adds sidelobes.
//!
//! Each mirror copy radiates with component signs flipped by its moment
//! map, so the combination stage multiplies every relocated image by the
//! diagonal signs of that map before summing. Copies seen through
//! different plates reach the scene from different angles; their union
//! widens the effective aperture and sharpens the combined image.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::isr::SpectrumSet;

/// Angular weighting applied to spectrum directions before
/// back-propagation, as a function of `t = khat . bhat` where `bhat` is
/// the filter boresight. Every kind vanishes for `t <= 0`: the back
/// hemisphere never crosses the aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngularFilter {
    /// Keep the hemisphere facing the aperture (`t > 0`).
    ForwardHemisphere,
    /// Keep a hard cone of half-angle `half_angle` about the boresight.
    Cone { half_angle: f64 },
    /// Cone with a raised-cosine taper: full weight on boresight, zero at
    /// the cone edge: `F = 0.5 (1 + cos(pi (1 - t) / (1 - cos a)))`.
    RaisedCosine { half_angle: f64 },
}

impl AngularFilter {
    /// Validates the half-angle where one applies: `(0, pi/2]`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            AngularFilter::ForwardHemisphere => Ok(()),
            AngularFilter::Cone { half_angle } | AngularFilter::RaisedCosine { half_angle } => {
                if half_angle > 0.0 && half_angle <= std::f64::consts::FRAC_PI_2 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "filter half-angle must be in (0, pi/2], got {half_angle}"
                    )))
                }
            }
        }
    }

    /// Weight for direction cosine `t`, in `[0, 1]` and zero for
    /// `t <= 0`.
    pub fn weight(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            AngularFilter::ForwardHemisphere => 1.0,
            AngularFilter::Cone { half_angle } => {
                if t >= half_angle.cos() {
                    1.0
                } else {
                    0.0
                }
            }
            AngularFilter::RaisedCosine { half_angle } => {
                let edge = half_angle.cos();
                if t < edge {
                    0.0
                } else if edge >= 1.0 {
                    1.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * (1.0 - t) / (1.0 - edge)).cos())
                }
            }
        }
    }
}

/// Regular voxel grid centered on `center`, index
/// `(iz * ny + iy) * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub center: Vec3<f64>,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Voxel pitch, m (same along every axis).
    pub spacing: f64,
}

impl ImageGrid {
    pub fn new(center: Vec3<f64>, nx: usize, ny: usize, nz: usize, spacing: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Config("image grid needs at least one voxel per axis".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Config(format!("voxel spacing must be positive, got {spacing}")));
        }
        Ok(Self { center, nx, ny, nz, spacing })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset of index `i` from the grid center along an axis of `n`
    /// voxels, in meters.
    fn axis_offset(&self, i: usize, n: usize) -> f64 {
        (i as f64 - (n as f64 - 1.0) / 2.0) * self.spacing
    }

    pub fn position(&self, ix: usize, iy: usize, iz: usize) -> Vec3<f64> {
        self.center
            + Vec3::new(
                self.axis_offset(ix, self.nx),
                self.axis_offset(iy, self.ny),
                self.axis_offset(iz, self.nz),
            )
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.ny + iy) * self.nx + ix
    }

    /// Inverse of [`index`](Self::index).
    pub fn coords(&self, voxel: usize) -> (usize, usize, usize) {
        let ix = voxel % self.nx;
        let iy = (voxel / self.nx) % self.ny;
        let iz = voxel / (self.nx * self.ny);
        (ix, iy, iz)
    }

    /// Voxel whose cell contains `p` (clamped to the grid).
    pub fn nearest_voxel(&self, p: Vec3<f64>) -> usize {
        let clamp = |off: f64, n: usize| -> usize {
            let i = (off / self.spacing + (n as f64 - 1.0) / 2.0).round();
            i.clamp(0.0, n as f64 - 1.0) as usize
        };
        let d = p - self.center;
        self.index(clamp(d.x, self.nx), clamp(d.y, self.ny), clamp(d.z, self.nz))
    }
}

/// Complex vector image on a grid: three Cartesian components per voxel,
/// `values[voxel * 3 + comp]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelImage {
    pub grid: ImageGrid,
    pub values: Vec<Complex64>,
}

impl VoxelImage {
    pub fn zeros(grid: ImageGrid) -> Self {
        let n = grid.len() * 3;
        Self { grid, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn component(&self, voxel: usize, comp: usize) -> Complex64 {
        self.values[voxel * 3 + comp]
    }

    /// Vector magnitude at a voxel.
    pub fn magnitude(&self, voxel: usize) -> f64 {
        (self.values[voxel * 3].norm_sqr()
            + self.values[voxel * 3 + 1].norm_sqr()
            + self.values[voxel * 3 + 2].norm_sqr())
        .sqrt()
    }

    /// Adds `other` with per-component real weights (sign correction).
    pub fn accumulate_scaled(&mut self, other: &VoxelImage, signs: [f64; 3]) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("voxel images live on different grids".into()));
        }
        for (chunk, src) in self.values.chunks_mut(3).zip(other.values.chunks(3)) {
            for c in 0..3 {
                chunk[c] += src[c].scale(signs[c]);
            }
        }
        Ok(())
    }
}

/// Back-propagation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingOptions {
    pub filter: AngularFilter,
    /// Aperture center; each box's filter boresight points from the box
    /// toward this point unless `boresight` overrides it.
    pub plane_center: Vec3<f64>,
    /// Fixed boresight for every box (unit vector); `None` derives one
    /// per box from `plane_center`.
    pub boresight: Option<Vec3<f64>>,
    /// Anchor mirror-copy kernels at the original source position,
    /// landing their blobs on the source instead of the mirror position.
    pub relocate: bool,
    /// Use only boxes up to this reflection order (`None`: all).
    pub max_box_order: Option<usize>,
}

/// Diagonal sign vector of a moment map; fails if the map has
/// off-diagonal structure (non-axis-aligned reflectors).
pub fn sign_correction(map: &Mat3) -> Result<[f64; 3]> {
    if map.max_off_diagonal() > 1e-9 {
        return Err(Error::Geometry(
            "sign correction needs axis-aligned reflectors (moment map is not diagonal)".into(),
        ));
    }
    let d = map.diagonal();
    Ok([d[0].signum(), d[1].signum(), d[2].signum()])
}

/// Back-propagates one box's spectra (all frequencies summed coherently)
/// onto `grid`, anchoring the kernel phase at `anchor`: the blob of a
/// radiator at the box center lands on the anchor. No sign correction is
/// applied here.
pub fn backpropagate_box(
    spectra: &SpectrumSet,
    ibox: usize,
    anchor: Vec3<f64>,
    grid: &ImageGrid,
    options: &ImagingOptions,
) -> Result<VoxelImage> {
    options.filter.validate()?;
    let b = spectra
        .boxes
        .get(ibox)
        .ok_or_else(|| Error::Config(format!("box index {ibox} out of range")))?;
    let boresight = match options.boresight {
        Some(v) => v
            .normalized()
            .ok_or_else(|| Error::Config("filter boresight must be a nonzero vector".into()))?,
        None => (options.plane_center - b.center)
            .normalized()
            .ok_or_else(|| Error::Geometry("box sits on the aperture center".into()))?,
    };

    let mut image = VoxelImage::zeros(grid.clone());
    for fs in &spectra.per_frequency {
        let k = fs.wavenumber;
        let weights = fs.grid.weights();
        // Per-direction contribution: coeff * product of axis phasors.
        // r = grid.center + sum_i offset_i axis_i, so the exponent
        // -j k khat . (r - anchor) splits into per-axis tables.
        for (q, &khat) in fs.grid.directions().iter().enumerate() {
            let f_weight = options.filter.weight(khat.dot(boresight));
            if f_weight == 0.0 {
                continue;
            }
            let const_phase = -k * khat.dot(grid.center - anchor);
            let base = Complex64::new(0.0, const_phase).exp() * (weights[q] * f_weight);
            let cx: Vec<Complex64> = (0..grid.nx)
                .map(|i| Complex64::new(0.0, -k * khat.x * grid.axis_offset(i, grid.nx)).exp())
                .collect();
            let cy: Vec<Complex64> = (0..grid.ny)
                .map(|i| Complex64::new(0.0, -k * khat.y * grid.axis_offset(i, grid.ny)).exp())
                .collect();
            let cz: Vec<Complex64> = (0..grid.nz)
                .map(|i| Complex64::new(0.0, -k * khat.z * grid.axis_offset(i, grid.nz)).exp())
                .collect();
            let v = fs.cartesian(ibox, q);
            let sx = v.x * base;
            let sy = v.y * base;
            let sz = v.z * base;
            for iz in 0..grid.nz {
                let pz = cz[iz];
                for iy in 0..grid.ny {
                    let pyz = pz * cy[iy];
                    let row0 = grid.index(0, iy, iz) * 3;
                    let row = &mut image.values[row0..row0 + grid.nx * 3];
                    for (ix, chunk) in row.chunks_mut(3).enumerate() {
                        let phase = pyz * cx[ix];
                        chunk[0] += sx * phase;
                        chunk[1] += sy * phase;
                        chunk[2] += sz * phase;
                    }
                }
            }
        }
    }
    Ok(image)
}

/// Full reconstruction: back-propagates every box (optionally capped in
/// order), anchors each mirror copy at its source's true position when
/// relocating, corrects the copy's component signs, and sums everything
/// coherently. `source_positions` is indexed by each box's
/// `source_index`.
pub fn isr_image(
    spectra: &SpectrumSet,
    source_positions: &[Vec3<f64>],
    grid: &ImageGrid,
    options: &ImagingOptions,
) -> Result<VoxelImage> {
    let selected: Vec<usize> = spectra
        .boxes
        .iter()
        .enumerate()
        .filter(|(_, b)| options.max_box_order.map_or(true, |cap| b.order <= cap))
        .map(|(i, _)| i)
        .collect();
    if selected.is_empty() {
        return Err(Error::Config("no boxes selected for imaging".into()));
    }
    for &i in &selected {
        let b = &spectra.boxes[i];
        if options.relocate && b.source_index >= source_positions.len() {
            return Err(Error::Config(format!(
                "box {i} references source {} but only {} source positions were given",
                b.source_index,
                source_positions.len()
            )));
        }
    }
    let per_box: Result<Vec<(usize, VoxelImage)>> = selected
        .par_iter()
        .map(|&i| {
            let b = &spectra.boxes[i];
            let anchor =
                if options.relocate { source_positions[b.source_index] } else { b.center };
            Ok((i, backpropagate_box(spectra, i, anchor, grid, options)?))
        })
        .collect();
    let mut total = VoxelImage::zeros(grid.clone());
    for (i, img) in per_box? {
        let signs = sign_correction(&spectra.boxes[i].moment_map)?;
        total.accumulate_scaled(&img, signs)?;
    }
    Ok(total)
}

/// Convenience for tests and baselines: index of the voxel with the
/// largest value of `measure`.
pub fn argmax_voxel(image: &VoxelImage, measure: impl Fn(&VoxelImage, usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for v in 0..image.grid.len() {
        let val = measure(image, v);
        if val > best_val {
            best_val = val;
            best = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::quadrature::SphericalGrid;
    use crate::em::translation::translation_order;
    use crate::em::wave::WaveContext;
    use crate::geometry::CVec3;
    use crate::isr::{dipole_spectrum, FrequencySpectra, SourceBox};
    use crate::scene::PecPlane;
    use approx::assert_relative_eq;

    fn synthetic_spectra(
        freq: f64,
        boxes: Vec<SourceBox>,
        dipoles: &[(Vec3<f64>, CVec3<f64>)],
    ) -> SpectrumSet {
        let wave = WaveContext::<f64>::new(freq).unwrap();
        let radius = boxes.iter().map(|b| b.radius).fold(0.0f64, f64::max);
        let order = translation_order(wave.wavenumber, 2.0 * radius, 3.0).unwrap();
        let grid = SphericalGrid::new(order).unwrap();
        let mut values = Vec::new();
        for (b, (pos, mom)) in boxes.iter().zip(dipoles) {
            values.extend(dipole_spectrum(&wave, b.center, *pos, *mom, &grid));
        }
        SpectrumSet {
            boxes,
            per_frequency: vec![FrequencySpectra {
                frequency: freq,
                wavenumber: wave.wavenumber,
                order,
                grid,
                values,
            }],
        }
    }

    fn free_box(center: Vec3<f64>) -> SourceBox {
        SourceBox {
            center,
            radius: 0.02,
            source_index: 0,
            order: 0,
            plane_sequence: Vec::new(),
            moment_map: Mat3::identity(),
        }
    }

    fn hemisphere_toward(plane_center: Vec3<f64>) -> ImagingOptions {
        ImagingOptions {
            filter: AngularFilter::ForwardHemisphere,
            plane_center,
            boresight: None,
            relocate: false,
            max_box_order: None,
        }
    }

    #[test]
    fn filter_weights_behave() {
        assert!(AngularFilter::Cone { half_angle: 2.0 }.validate().is_err());
        assert!(AngularFilter::Cone { half_angle: 0.0 }.validate().is_err());
        let rc = AngularFilter::RaisedCosine { half_angle: 0.5 };
        rc.validate().unwrap();
        assert_relative_eq!(rc.weight(1.0), 1.0, max_relative = 1e-12);
        assert!(rc.weight(0.5f64.cos() - 1e-6) == 0.0);
        let mid = rc.weight(0.98);
        assert!(mid > 0.0 && mid < 1.0);
        let hemi = AngularFilter::ForwardHemisphere;
        assert_relative_eq!(hemi.weight(0.3), 1.0, max_relative = 1e-15);
        assert_relative_eq!(hemi.weight(-0.1), 0.0, max_relative = 1e-15);
        // No kind passes anything at or behind the terminator.
        let half_pi = AngularFilter::Cone { half_angle: std::f64::consts::FRAC_PI_2 };
        assert_eq!(half_pi.weight(0.0), 0.0);
        assert_eq!(rc.weight(0.0), 0.0);
    }

    #[test]
    fn uniform_spectrum_peaks_at_the_anchor() {
        // Flat single-component spectrum: all plane waves agree in phase
        // only where the kernel exponent vanishes, i.e. at the anchor.
        let anchor = Vec3::new(0.004, -0.006, 0.0);
        let wave = WaveContext::<f64>::new(10.0e9).unwrap();
        let grid_s = SphericalGrid::new(12).unwrap();
        let mut values = Vec::with_capacity(grid_s.len() * 2);
        for _ in 0..grid_s.len() {
            values.push(Complex64::new(1.0, 0.0));
            values.push(Complex64::new(0.0, 0.0));
        }
        let spectra = SpectrumSet {
            boxes: vec![free_box(anchor)],
            per_frequency: vec![FrequencySpectra {
                frequency: wave.frequency,
                wavenumber: wave.wavenumber,
                order: 12,
                grid: grid_s,
                values,
            }],
        };
        let grid = ImageGrid::new(Vec3::zero(), 41, 41, 1, 0.001).unwrap();
        let options = hemisphere_toward(Vec3::new(0.0, 0.0, 0.6));
        let img = backpropagate_box(&spectra, 0, anchor, &grid, &options).unwrap();
        let peak = argmax_voxel(&img, VoxelImage::magnitude);
        assert_eq!(peak, grid.nearest_voxel(anchor));
    }

    #[test]
    fn backpropagated_blob_peaks_at_the_dipole() {
        // Dipole offset from the box center: the blob must land offset
        // from the anchor by the same amount, not on the anchor itself.
        let dipole_pos = Vec3::new(0.012, -0.008, 0.0);
        let spectra = synthetic_spectra(
            10.0e9,
            vec![free_box(Vec3::zero())],
            &[(dipole_pos, CVec3::from_real(Vec3::new(1.0e-3, 0.0, 0.8e-3)))],
        );
        let grid = ImageGrid::new(Vec3::zero(), 81, 81, 1, 0.001).unwrap();
        let options = hemisphere_toward(Vec3::new(0.0, 0.0, 0.6));
        let img = backpropagate_box(&spectra, 0, Vec3::zero(), &grid, &options).unwrap();
        let peak = argmax_voxel(&img, VoxelImage::magnitude);
        let (ix, iy, _) = grid.coords(peak);
        let pos = grid.position(ix, iy, 0);
        assert!(
            (pos - dipole_pos).norm() <= 1.5 * grid.spacing,
            "peak at {pos:?}, dipole at {dipole_pos:?}"
        );
    }

    #[test]
    fn shift_anchor_relocates_exactly() {
        // The kernel never reads the box center: the same spectrum values
        // stored in a box at d and in a box at the origin produce
        // identical images for identical anchors and boresights.
        let d = Vec3::new(0.2, 0.0, 0.05);
        let moment = CVec3::from_real(Vec3::new(0.7e-3, 1.0e-3, 0.0));
        let wave = WaveContext::<f64>::new(9.0e9).unwrap();
        let order = translation_order(wave.wavenumber, 0.04, 3.0).unwrap();
        let grid_s = SphericalGrid::new(order).unwrap();
        let values = dipole_spectrum(&wave, d, d, moment, &grid_s);
        let make = |center: Vec3<f64>, vals: Vec<Complex64>| SpectrumSet {
            boxes: vec![free_box(center)],
            per_frequency: vec![FrequencySpectra {
                frequency: wave.frequency,
                wavenumber: wave.wavenumber,
                order,
                grid: grid_s.clone(),
                values: vals,
            }],
        };
        let at_d = make(d, values.clone());
        let at_origin = make(Vec3::zero(), values);
        let grid = ImageGrid::new(Vec3::zero(), 31, 31, 1, 0.002).unwrap();
        let options = ImagingOptions {
            boresight: Some(Vec3::unit_z()),
            ..hemisphere_toward(Vec3::new(0.0, 0.0, 1.0))
        };
        let img_d = backpropagate_box(&at_d, 0, Vec3::zero(), &grid, &options).unwrap();
        let img_0 = backpropagate_box(&at_origin, 0, Vec3::zero(), &grid, &options).unwrap();
        let max_diff = img_d
            .values
            .iter()
            .zip(&img_0.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max_diff == 0.0, "shifted images differ by {max_diff:e}");
    }

    #[test]
    fn relocation_moves_a_mirror_blob_onto_the_source() {
        // A copy mirrored in the z = 0 plate sits at -z; anchored at the
        // original +z position its blob must appear there.
        let plate = PecPlane::new(Vec3::zero(), Vec3::unit_z()).unwrap();
        let source_pos = Vec3::new(0.0, 0.0, 0.12);
        let mirror_pos = plate.mirror_point(source_pos);
        let map = Mat3::mirror_moment_map(plate.normal);
        let moment = CVec3::from_real(Vec3::new(0.9e-3, 0.0, 0.5e-3));
        let mirror_box = SourceBox {
            center: mirror_pos,
            radius: 0.02,
            source_index: 0,
            order: 1,
            plane_sequence: vec![0],
            moment_map: map,
        };
        let spectra =
            synthetic_spectra(10.0e9, vec![mirror_box], &[(mirror_pos, map.mul_cvec(moment))]);
        let grid = ImageGrid::new(source_pos, 41, 41, 1, 0.001).unwrap();
        let options = hemisphere_toward(Vec3::new(0.0, 0.0, 0.7));
        let img = backpropagate_box(&spectra, 0, source_pos, &grid, &options).unwrap();
        let peak = argmax_voxel(&img, VoxelImage::magnitude);
        let (ix, iy, _) = grid.coords(peak);
        let pos = grid.position(ix, iy, 0);
        assert!(
            (pos - source_pos).norm() <= 1.5 * grid.spacing,
            "relocated peak at {pos:?}, source at {source_pos:?}"
        );
    }

    #[test]
    fn sign_correction_requires_diagonal_maps() {
        let tilted = Mat3::mirror_moment_map(Vec3::new(1.0, 1.0, 0.0).normalized().unwrap());
        assert!(sign_correction(&tilted).is_err());
        let axis = Mat3::mirror_moment_map(Vec3::unit_y());
        assert_eq!(sign_correction(&axis).unwrap(), [-1.0, 1.0, -1.0]);
    }

    #[test]
    fn combined_image_reinforces_at_the_source() {
        // y-dipole against an x-normal plate: the first-order copy
        // carries s_y = -1, and the sign-corrected combination at the
        // source must beat the original-only image. Flipping the sign by
        // hand must instead cancel.
        let plate = PecPlane::new(Vec3::new(0.3, 0.0, 0.0), Vec3::unit_x()).unwrap();
        let source_pos = Vec3::zero();
        let moment = CVec3::from_real(Vec3::new(0.0, 1.0e-3, 0.0));
        let map = Mat3::mirror_moment_map(plate.normal);
        let mirror_pos = plate.mirror_point(source_pos);
        let boxes = vec![
            free_box(source_pos),
            SourceBox {
                center: mirror_pos,
                radius: 0.02,
                source_index: 0,
                order: 1,
                plane_sequence: vec![0],
                moment_map: map,
            },
        ];
        let dipoles = [(source_pos, moment), (mirror_pos, map.mul_cvec(moment))];
        let spectra = synthetic_spectra(10.0e9, boxes, &dipoles);
        let grid = ImageGrid::new(source_pos, 21, 21, 1, 0.001).unwrap();
        let options =
            ImagingOptions { relocate: true, ..hemisphere_toward(Vec3::new(0.0, 0.0, 0.8)) };
        let combined = isr_image(&spectra, &[source_pos], &grid, &options).unwrap();
        let direct_only = isr_image(
            &spectra,
            &[source_pos],
            &grid,
            &ImagingOptions { max_box_order: Some(0), ..options.clone() },
        )
        .unwrap();
        let center_voxel = grid.nearest_voxel(source_pos);
        let combined_peak = combined.component(center_voxel, 1).norm();
        let direct_peak = direct_only.component(center_voxel, 1).norm();
        assert!(
            combined_peak > 1.5 * direct_peak,
            "combination did not reinforce: {combined_peak} vs {direct_peak}"
        );

        // Deliberately wrong sign: accumulate the mirror image with +1
        // on y instead of the map's -1.
        let direct = backpropagate_box(&spectra, 0, source_pos, &grid, &options).unwrap();
        let mirror = backpropagate_box(&spectra, 1, source_pos, &grid, &options).unwrap();
        let mut flipped = VoxelImage::zeros(grid.clone());
        flipped.accumulate_scaled(&direct, [1.0, 1.0, 1.0]).unwrap();
        flipped.accumulate_scaled(&mirror, [1.0, 1.0, 1.0]).unwrap();
        assert!(
            flipped.component(center_voxel, 1).norm() < direct_peak,
            "wrong sign should cancel at the source"
        );
    }

    #[test]
    fn narrower_filters_widen_the_main_lobe() {
        // Sweep the cone half-angle on a centered dipole and measure the
        // -3 dB width along x: less angular support means less spatial
        // resolution.
        let moment = CVec3::from_real(Vec3::new(0.0, 1.0e-3, 0.0));
        let spectra = synthetic_spectra(10.0e9, vec![free_box(Vec3::zero())], &[(
            Vec3::zero(),
            moment,
        )]);
        let grid = ImageGrid::new(Vec3::zero(), 161, 1, 1, 0.001).unwrap();
        let width_at = |half_angle: f64| -> f64 {
            let options = ImagingOptions {
                filter: AngularFilter::Cone { half_angle },
                boresight: Some(Vec3::unit_z()),
                ..hemisphere_toward(Vec3::new(0.0, 0.0, 1.0))
            };
            let img = backpropagate_box(&spectra, 0, Vec3::zero(), &grid, &options).unwrap();
            let profile: Vec<f64> = (0..grid.nx).map(|i| img.component(i, 1).norm()).collect();
            let peak = profile.iter().cloned().fold(0.0f64, f64::max);
            let level = peak / 2.0f64.sqrt();
            let above = profile.iter().filter(|&&v| v >= level).count();
            above as f64 * grid.spacing
        };
        let w15 = width_at(15f64.to_radians());
        let w30 = width_at(30f64.to_radians());
        let w60 = width_at(60f64.to_radians());
        assert!(
            w15 > w30 && w30 > w60,
            "widths must shrink with aperture: {w15} {w30} {w60}"
        );
    }

    #[test]
    fn sign_corrections_compose_along_plane_sequences() {
        // Every enumerated box's diagonal signs must equal the product of
        // its plates' per-axis mirror signs, in any order.
        let scene = crate::scene::Scene::new(
            vec![crate::scene::DipoleSource {
                position: Vec3::new(0.05, 0.0, 0.1),
                moment: CVec3::from_real(Vec3::new(0.0, 1.0e-3, 0.0)),
            }],
            vec![
                PecPlane::new(Vec3::new(-0.5, 0.0, 0.0), Vec3::unit_x()).unwrap(),
                PecPlane::new(Vec3::new(0.5, 0.0, 0.0), Vec3::unit_x()).unwrap(),
            ],
        )
        .unwrap();
        let boxes = crate::isr::source_boxes(&scene, 3, 0.02).unwrap();
        assert!(boxes.iter().any(|b| b.order == 3));
        for b in &boxes {
            let signs = sign_correction(&b.moment_map).unwrap();
            let mut expected = [1.0f64; 3];
            for &ip in &b.plane_sequence {
                let plate_signs =
                    sign_correction(&Mat3::mirror_moment_map(scene.planes[ip].normal)).unwrap();
                for c in 0..3 {
                    expected[c] *= plate_signs[c];
                }
            }
            assert_eq!(signs, expected, "box order {} sequence {:?}", b.order, b.plane_sequence);
        }
    }
}
