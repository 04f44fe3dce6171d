//! Image metrics: resolution, peak extraction, and artifact levels.
//!
//! Everything here works on voxel magnitudes relative to the image's own
//! global peak, in amplitude decibels (`20 log10`), so the numbers are
//! invariant to overall scaling of the reconstruction. Each metric can
//! probe one Cartesian component (`Some(axis)`) or the vector magnitude
//! (`None`).

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::imaging::VoxelImage;

/// One extracted image peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    /// Linear voxel index.
    pub voxel: usize,
    /// Voxel position, m.
    pub position: Vec3<f64>,
    /// Magnitude normalized to the global image peak, `(0, 1]`.
    pub magnitude: f64,
    /// Level relative to the global image peak, dB.
    pub level_db: f64,
    /// Normalized height above the highest saddle toward any larger
    /// peak; the global peak's saddle is zero, so its prominence equals
    /// its (unit) magnitude.
    pub prominence: f64,
}

/// Peaks surviving the threshold and separation pruning, sorted by
/// descending magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
    /// Detection threshold the report was built with, dB.
    pub threshold_db: f64,
}

impl PeakReport {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

fn check_component(component: Option<usize>) -> Result<()> {
    match component {
        Some(c) if c > 2 => {
            Err(Error::Config(format!("component must be 0, 1 or 2, got {c}")))
        }
        _ => Ok(()),
    }
}

/// Probed magnitude at a voxel: one component's modulus or the vector
/// magnitude.
fn measure(image: &VoxelImage, voxel: usize, component: Option<usize>) -> f64 {
    match component {
        Some(c) => image.component(voxel, c).norm(),
        None => image.magnitude(voxel),
    }
}

fn voxel_position(image: &VoxelImage, voxel: usize) -> Vec3<f64> {
    let (ix, iy, iz) = image.grid.coords(voxel);
    image.grid.position(ix, iy, iz)
}

fn global_peak(image: &VoxelImage, component: Option<usize>) -> Result<(usize, f64)> {
    check_component(component)?;
    let mut best = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for v in 0..image.grid.len() {
        let m = measure(image, v, component);
        if !m.is_finite() {
            return Err(Error::Numerical(format!("non-finite image value at voxel {v}")));
        }
        if m > best_val {
            best_val = m;
            best = v;
        }
    }
    if best_val <= 0.0 {
        return Err(Error::Numerical("image is identically zero".into()));
    }
    Ok((best, best_val))
}

/// Full width of the main lobe at `level_db` below the peak (amplitude
/// dB, e.g. `-3.0` for half power) along one grid axis (`0..3`), in
/// meters, with linear interpolation between voxels.
///
/// The profile runs through the global peak voxel of the probed
/// component. Fails if either crossing is not bracketed inside the grid.
pub fn psf_width(
    image: &VoxelImage,
    component: Option<usize>,
    axis: usize,
    level_db: f64,
) -> Result<f64> {
    if axis > 2 {
        return Err(Error::Config(format!("axis must be 0, 1 or 2, got {axis}")));
    }
    if !(level_db < 0.0 && level_db.is_finite()) {
        return Err(Error::Config(format!("width level must be negative dB, got {level_db}")));
    }
    let (peak, peak_val) = global_peak(image, component)?;
    let (px, py, pz) = image.grid.coords(peak);
    let g = &image.grid;
    let (n, at) = match axis {
        0 => (g.nx, Box::new(move |i| g.index(i, py, pz)) as Box<dyn Fn(usize) -> usize>),
        1 => (g.ny, Box::new(move |i| g.index(px, i, pz)) as _),
        _ => (g.nz, Box::new(move |i| g.index(px, py, i)) as _),
    };
    let profile: Vec<f64> = (0..n).map(|i| measure(image, at(i), component)).collect();
    let peak_idx = match axis {
        0 => px,
        1 => py,
        _ => pz,
    };
    let level = peak_val * 10f64.powf(level_db / 20.0);

    // Walk outward from the peak to the first crossing on each side and
    // interpolate the fractional index where the profile hits `level`.
    let crossing = |dir: isize| -> Result<f64> {
        let mut i = peak_idx as isize;
        loop {
            let next = i + dir;
            if next < 0 || next as usize >= n {
                return Err(Error::Numerical(
                    "width level is not bracketed inside the image grid".into(),
                ));
            }
            let a = profile[i as usize];
            let b = profile[next as usize];
            if b <= level {
                let t = (a - level) / (a - b);
                return Ok(i as f64 + t * dir as f64);
            }
            i = next;
        }
    };
    let right = crossing(1)?;
    let left = crossing(-1)?;
    Ok((right - left) * g.spacing)
}

/// Smallest probed magnitude along the straight segment between two
/// voxel positions, sampled at half-voxel steps (endpoints excluded).
fn line_minimum(
    image: &VoxelImage,
    component: Option<usize>,
    a: Vec3<f64>,
    b: Vec3<f64>,
) -> f64 {
    let steps = ((b - a).norm() / (0.5 * image.grid.spacing)).ceil().max(2.0) as usize;
    let mut min = f64::INFINITY;
    for s in 1..steps {
        let t = s as f64 / steps as f64;
        let pos = a + (b - a).scale(t);
        let v = image.grid.nearest_voxel(pos);
        min = min.min(measure(image, v, component));
    }
    min
}

/// Local maxima of the probed magnitude above `threshold_db` (relative
/// to the global peak, so thresholds are negative), thinned so no two
/// peaks sit closer than `min_separation` meters.
///
/// A voxel qualifies when no neighbor in its 26-neighborhood exceeds it;
/// qualifying voxels are taken greedily in order of descending magnitude
/// (ties broken by voxel index), dropping any within the separation of an
/// already-kept peak. Prominence is approximated per kept peak as its
/// height above the highest straight-line saddle toward any larger kept
/// peak.
pub fn find_peaks(
    image: &VoxelImage,
    component: Option<usize>,
    threshold_db: f64,
    min_separation: f64,
) -> Result<PeakReport> {
    if !(min_separation >= 0.0 && min_separation.is_finite()) {
        return Err(Error::Config(format!(
            "peak separation must be finite and non-negative, got {min_separation}"
        )));
    }
    let (_, peak_val) = global_peak(image, component)?;
    let floor = peak_val * 10f64.powf(threshold_db / 20.0);
    let g = &image.grid;

    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for v in 0..g.len() {
        let m = measure(image, v, component);
        if m < floor || m == 0.0 {
            continue;
        }
        let (ix, iy, iz) = g.coords(v);
        let mut is_max = true;
        'neigh: for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (jx, jy, jz) = (ix as isize + dx, iy as isize + dy, iz as isize + dz);
                    if jx < 0 || jy < 0 || jz < 0 {
                        continue;
                    }
                    let (jx, jy, jz) = (jx as usize, jy as usize, jz as usize);
                    if jx >= g.nx || jy >= g.ny || jz >= g.nz {
                        continue;
                    }
                    if measure(image, g.index(jx, jy, jz), component) > m {
                        is_max = false;
                        break 'neigh;
                    }
                }
            }
        }
        if is_max {
            candidates.push((v, m));
        }
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut kept: Vec<Peak> = Vec::new();
    for (v, m) in candidates {
        let pos = voxel_position(image, v);
        if kept.iter().all(|p| (p.position - pos).norm() >= min_separation) {
            let saddle = kept
                .iter()
                .map(|p| line_minimum(image, component, pos, p.position))
                .fold(0.0f64, f64::max);
            kept.push(Peak {
                voxel: v,
                position: pos,
                magnitude: m / peak_val,
                level_db: 20.0 * (m / peak_val).log10(),
                prominence: ((m - saddle) / peak_val).max(0.0),
            });
        }
    }
    Ok(PeakReport { peaks: kept, threshold_db })
}

/// Highest probed magnitude, in dB relative to the global peak, over
/// voxels farther than `exclusion_radius` from every position in
/// `true_positions`. Returns `-inf` when the exclusions cover the whole
/// grid.
pub fn artifact_floor(
    image: &VoxelImage,
    component: Option<usize>,
    exclusion_radius: f64,
    true_positions: &[Vec3<f64>],
) -> Result<f64> {
    if !(exclusion_radius >= 0.0 && exclusion_radius.is_finite()) {
        return Err(Error::Config(format!(
            "exclusion radius must be finite and non-negative, got {exclusion_radius}"
        )));
    }
    let (_, peak_val) = global_peak(image, component)?;
    let mut worst = f64::NEG_INFINITY;
    for v in 0..image.grid.len() {
        let pos = voxel_position(image, v);
        if true_positions.iter().any(|&c| (pos - c).norm() <= exclusion_radius) {
            continue;
        }
        worst = worst.max(measure(image, v, component));
    }
    if worst == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (worst / peak_val).log10())
}

/// Checks for a spurious radiator at `position`: the vector magnitude,
/// maximized over the one-voxel neighborhood of the containing voxel, is
/// compared against `threshold_db` relative to the global peak. Returns
/// the verdict and the measured level in dB (`-inf` for an identically
/// zero image, which never flags).
pub fn ghost_check(
    image: &VoxelImage,
    position: Vec3<f64>,
    threshold_db: f64,
) -> Result<(bool, f64)> {
    let (_, peak_val) = match global_peak(image, None) {
        Ok(p) => p,
        Err(Error::Numerical(_)) => return Ok((false, f64::NEG_INFINITY)),
        Err(e) => return Err(e),
    };
    let g = &image.grid;
    let (ix, iy, iz) = g.coords(g.nearest_voxel(position));
    let mut local = 0.0f64;
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (jx, jy, jz) = (ix as isize + dx, iy as isize + dy, iz as isize + dz);
                if jx < 0 || jy < 0 || jz < 0 {
                    continue;
                }
                let (jx, jy, jz) = (jx as usize, jy as usize, jz as usize);
                if jx >= g.nx || jy >= g.ny || jz >= g.nz {
                    continue;
                }
                local = local.max(image.magnitude(g.index(jx, jy, jz)));
            }
        }
    }
    if local == 0.0 {
        return Ok((false, f64::NEG_INFINITY));
    }
    let level_db = 20.0 * (local / peak_val).log10();
    Ok((level_db > threshold_db, level_db))
}

/// Highest vector magnitude, in dB relative to the global peak, within
/// `radius` of `center`; `-inf` when no voxel falls inside the ball.
pub fn local_peak_db(image: &VoxelImage, center: Vec3<f64>, radius: f64) -> Result<f64> {
    let (_, peak_val) = global_peak(image, None)?;
    let mut best = f64::NEG_INFINITY;
    for v in 0..image.grid.len() {
        if (voxel_position(image, v) - center).norm() <= radius {
            best = best.max(image.magnitude(v));
        }
    }
    if best == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (best / peak_val).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::ImageGrid;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    /// Synthetic image: sum of isotropic Gaussian blobs `(center, sigma,
    /// amplitude)` written into the x component.
    fn gaussian_image(grid: ImageGrid, blobs: &[(Vec3<f64>, f64, f64)]) -> VoxelImage {
        let mut img = VoxelImage::zeros(grid);
        for v in 0..img.grid.len() {
            let pos = voxel_position(&img, v);
            let mut val = 0.0;
            for &(c, sigma, amp) in blobs {
                let d2 = (pos - c).norm().powi(2);
                val += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
            img.values[v * 3] = Complex64::new(val, 0.0);
        }
        img
    }

    /// Focused image of a point source seen through a uniform line
    /// aperture of width `d` at standoff `z`: the PSF is the aperture
    /// integral `sum_m e^{j k (|r_m - r| - |r_m|)}` over aperture points
    /// `r_m`, written into the x component over a row of voxels along x.
    fn aperture_psf(k: f64, d: f64, z: f64, nx: usize, spacing: f64) -> VoxelImage {
        let m = 301;
        let grid = ImageGrid::new(Vec3::zero(), nx, 1, 1, spacing).unwrap();
        let mut img = VoxelImage::zeros(grid);
        for v in 0..nx {
            let r = voxel_position(&img, v);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..m {
                let u = (i as f64 / (m - 1) as f64 - 0.5) * d;
                let rm = Vec3::new(u, 0.0, z);
                let phase = k * ((rm - r).norm() - rm.norm());
                acc += Complex64::new(0.0, phase).exp();
            }
            img.values[v * 3] = acc;
        }
        img
    }

    #[test]
    fn width_of_a_gaussian_matches_the_closed_form() {
        // Amplitude Gaussian exp(-x^2 / 2 sigma^2) crosses -3 dB at
        // x = sigma sqrt(0.3 ln 10), so the full width is twice that.
        let sigma = 0.0053;
        let grid = ImageGrid::new(Vec3::zero(), 101, 41, 1, 0.001).unwrap();
        let img = gaussian_image(grid, &[(Vec3::zero(), sigma, 3.2)]);
        let want = 2.0 * sigma * (0.3 * 10f64.ln()).sqrt();
        let got = psf_width(&img, Some(0), 0, -3.0).unwrap();
        assert_relative_eq!(got, want, max_relative = 2e-3);
        // The -6 dB width of the same Gaussian is sqrt(2) times wider.
        let got6 = psf_width(&img, Some(0), 0, -6.0).unwrap();
        assert_relative_eq!(got6, want * 2f64.sqrt(), max_relative = 2e-3);
        // Width scales linearly with the blob size.
        let wider = gaussian_image(
            ImageGrid::new(Vec3::zero(), 101, 41, 1, 0.001).unwrap(),
            &[(Vec3::zero(), 2.0 * sigma, 3.2)],
        );
        assert_relative_eq!(
            psf_width(&wider, Some(0), 0, -3.0).unwrap(),
            2.0 * want,
            max_relative = 2e-3
        );
    }

    #[test]
    fn aperture_psf_width_matches_the_diffraction_limit() {
        // Uniform aperture D at standoff z: the half-power width of the
        // sinc-shaped PSF is 0.886 lambda z / D.
        let lambda = 0.03;
        let k = 2.0 * std::f64::consts::PI / lambda;
        let (d, z) = (0.3, 0.6);
        let img = aperture_psf(k, d, z, 201, 0.001);
        let want = 0.886 * lambda * z / d;
        let got = psf_width(&img, Some(0), 0, -3.0).unwrap();
        assert_relative_eq!(got, want, max_relative = 0.1);
        // Enlarging the aperture can only sharpen the lobe.
        let sharper = aperture_psf(k, 1.5 * d, z, 201, 0.001);
        assert!(psf_width(&sharper, Some(0), 0, -3.0).unwrap() < got);
    }

    #[test]
    fn unbracketed_width_is_an_error() {
        // A blob far wider than the grid never falls to half power.
        let grid = ImageGrid::new(Vec3::zero(), 21, 5, 1, 0.001).unwrap();
        let img = gaussian_image(grid, &[(Vec3::zero(), 1.0, 1.0)]);
        assert!(matches!(psf_width(&img, Some(0), 0, -3.0), Err(Error::Numerical(_))));
        let empty = VoxelImage::zeros(ImageGrid::new(Vec3::zero(), 5, 5, 1, 0.001).unwrap());
        assert!(psf_width(&empty, None, 0, -3.0).is_err());
        // Bad parameters are config errors.
        let ok = gaussian_image(
            ImageGrid::new(Vec3::zero(), 21, 5, 1, 0.001).unwrap(),
            &[(Vec3::zero(), 0.002, 1.0)],
        );
        assert!(psf_width(&ok, Some(3), 0, -3.0).is_err());
        assert!(psf_width(&ok, Some(0), 0, 3.0).is_err());
    }

    #[test]
    fn peaks_are_found_ranked_and_thinned() {
        let grid = ImageGrid::new(Vec3::zero(), 81, 81, 1, 0.001).unwrap();
        let a = Vec3::new(-0.02, 0.0, 0.0);
        let b = Vec3::new(0.015, 0.012, 0.0);
        // Second blob at half amplitude (-6 dB).
        let img = gaussian_image(grid, &[(a, 0.003, 1.0), (b, 0.003, 0.5)]);
        let report = find_peaks(&img, Some(0), -10.0, 0.005).unwrap();
        assert_eq!(report.len(), 2);
        assert_eq!(report.threshold_db, -10.0);
        let peaks = &report.peaks;
        assert!((peaks[0].position - a).norm() <= 1.5e-3);
        assert!((peaks[1].position - b).norm() <= 1.5e-3);
        assert_relative_eq!(peaks[1].level_db, -6.0, epsilon = 0.2);
        assert!(peaks[0].magnitude >= peaks[1].magnitude, "sorted descending");
        // Well-separated blobs: the saddle between them is tiny, so each
        // peak's prominence is close to its own height.
        assert_relative_eq!(peaks[0].prominence, 1.0, epsilon = 1e-6);
        assert_relative_eq!(peaks[1].prominence, peaks[1].magnitude, epsilon = 0.01);
        // A -3 dB threshold keeps only the main blob.
        assert_eq!(find_peaks(&img, Some(0), -3.0, 0.005).unwrap().len(), 1);
        // A separation wider than the blob spacing merges them.
        assert_eq!(find_peaks(&img, Some(0), -10.0, 0.1).unwrap().len(), 1);
    }

    #[test]
    fn overlapping_blobs_lose_prominence() {
        // Two blobs close enough to ride on each other's shoulders: the
        // smaller one keeps a high saddle, so its prominence is well
        // below its magnitude.
        let grid = ImageGrid::new(Vec3::zero(), 81, 21, 1, 0.001).unwrap();
        let a = Vec3::new(-0.004, 0.0, 0.0);
        let b = Vec3::new(0.004, 0.0, 0.0);
        let img = gaussian_image(grid, &[(a, 0.003, 1.0), (b, 0.003, 0.8)]);
        let report = find_peaks(&img, Some(0), -20.0, 0.003).unwrap();
        assert_eq!(report.len(), 2);
        let minor = &report.peaks[1];
        assert!(
            minor.prominence < 0.5 * minor.magnitude,
            "prominence {} vs magnitude {}",
            minor.prominence,
            minor.magnitude
        );
    }

    #[test]
    fn artifact_floor_sees_only_unmasked_voxels() {
        let grid = ImageGrid::new(Vec3::zero(), 81, 81, 1, 0.001).unwrap();
        let main = Vec3::zero();
        let ghost = Vec3::new(0.025, -0.02, 0.0);
        let level = 10f64.powf(-17.0 / 20.0);
        let img = gaussian_image(grid, &[(main, 0.003, 1.0), (ghost, 0.003, level)]);
        let floor = artifact_floor(&img, Some(0), 0.01, &[main]).unwrap();
        assert_relative_eq!(floor, -17.0, epsilon = 0.1);
        // Masking both blobs leaves only the Gaussian tails.
        let tails = artifact_floor(&img, Some(0), 0.01, &[main, ghost]).unwrap();
        assert!(tails < -25.0, "tail floor {tails} dB");
        // A wider radius can only lower the floor.
        let wider = artifact_floor(&img, Some(0), 0.02, &[main, ghost]).unwrap();
        assert!(wider <= tails);
        // Masking everything yields -inf.
        let all = artifact_floor(&img, Some(0), 1.0, &[main]).unwrap();
        assert_eq!(all, f64::NEG_INFINITY);
    }

    #[test]
    fn ghost_check_flags_only_real_local_energy() {
        let grid = ImageGrid::new(Vec3::zero(), 61, 61, 1, 0.001).unwrap();
        let ghost = Vec3::new(0.02, 0.0, 0.0);
        let img = gaussian_image(grid, &[(Vec3::zero(), 0.003, 1.0), (ghost, 0.003, 0.1)]);
        let (flag, level) = ghost_check(&img, ghost, -25.0).unwrap();
        assert!(flag);
        assert_relative_eq!(level, -20.0, epsilon = 0.2);
        // A stricter threshold clears the same spot.
        let (flag, _) = ghost_check(&img, ghost, -15.0).unwrap();
        assert!(!flag);
        // A quiet spot stays quiet.
        let (flag, level) = ghost_check(&img, Vec3::new(-0.025, 0.025, 0.0), -30.0).unwrap();
        assert!(!flag, "quiet spot flagged at {level} dB");
        // An empty image never flags.
        let empty = VoxelImage::zeros(ImageGrid::new(Vec3::zero(), 5, 5, 1, 0.001).unwrap());
        assert_eq!(ghost_check(&empty, Vec3::zero(), -60.0).unwrap(), (false, f64::NEG_INFINITY));
    }

    #[test]
    fn local_levels_report_relative_to_the_peak() {
        let grid = ImageGrid::new(Vec3::zero(), 61, 61, 1, 0.001).unwrap();
        let ghost = Vec3::new(0.02, 0.0, 0.0);
        let img = gaussian_image(grid, &[(Vec3::zero(), 0.003, 1.0), (ghost, 0.003, 0.1)]);
        let db = local_peak_db(&img, ghost, 0.004).unwrap();
        assert_relative_eq!(db, -20.0, epsilon = 0.2);
        let nowhere = local_peak_db(&img, Vec3::new(9.0, 9.0, 9.0), 0.001).unwrap();
        assert_eq!(nowhere, f64::NEG_INFINITY);
    }

    #[test]
    fn metrics_ignore_global_complex_scaling() {
        let grid = ImageGrid::new(Vec3::zero(), 41, 41, 1, 0.001).unwrap();
        let ghost = Vec3::new(0.012, 0.0, 0.0);
        let img = gaussian_image(grid, &[(Vec3::zero(), 0.003, 1.0), (ghost, 0.003, 0.2)]);
        let mut scaled = img.clone();
        for v in &mut scaled.values {
            *v *= Complex64::new(0.0, -3.7);
        }
        assert_relative_eq!(
            psf_width(&img, Some(0), 0, -3.0).unwrap(),
            psf_width(&scaled, Some(0), 0, -3.0).unwrap(),
            max_relative = 1e-12
        );
        let (pa, pb) = (
            find_peaks(&img, Some(0), -20.0, 0.004).unwrap(),
            find_peaks(&scaled, Some(0), -20.0, 0.004).unwrap(),
        );
        assert_eq!(pa.len(), pb.len());
        for (a, b) in pa.peaks.iter().zip(&pb.peaks) {
            assert_relative_eq!(a.level_db, b.level_db, epsilon = 1e-9);
            assert_relative_eq!(a.prominence, b.prominence, epsilon = 1e-9);
        }
        assert_relative_eq!(
            artifact_floor(&img, Some(0), 0.008, &[Vec3::zero()]).unwrap(),
            artifact_floor(&scaled, Some(0), 0.008, &[Vec3::zero()]).unwrap(),
            epsilon = 1e-9
        );
        assert_relative_eq!(
            ghost_check(&img, ghost, -20.0).unwrap().1,
            ghost_check(&scaled, ghost, -20.0).unwrap().1,
            epsilon = 1e-9
        );
    }
}
