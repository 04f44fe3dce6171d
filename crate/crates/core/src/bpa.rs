//! Back-projection baselines: the plain matched-filter imager and its
//! reflection-aware variant.
//!
//! Plain back-projection focuses the recorded field by undoing the
//! free-space propagation phase voxel by voxel:
//!
//! ```text
//! I(r) = sum_f sum_m E(r_m) e^{+j k |r_m - r|} dA
//! ```
//!
//! The reflection-aware variant adds one such term per multipath route:
//! a bounce off the reflectors in sequence `rho` arrives with the path
//! length of the mirrored voxel `tau_rho(r)`, and with tangential moment
//! components sign-flipped, so each route focuses through
//! `e^{+j k |r_m - tau_rho(r)|}` with the route's component signs undone.
//! Both run the same kernel; they differ only in the route list.
//!
//! Each call images one recorded polarization `p` and writes it into the
//! matching component slot of the output, so baselines compare against
//! the same component of the reconstruction.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::em::wave::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::forward::{FieldComponent, MeasurementSet};
use crate::imaging::{sign_correction, ImageGrid, VoxelImage};
use crate::scene::{reflection_paths, PecPlane, ReflectionPath};

/// Wavenumber ladder of a measurement set, plus its uniform step when the
/// frequencies form an arithmetic grid (enabling one complex multiply per
/// frequency instead of one exp).
fn wavenumbers(meas: &MeasurementSet) -> Result<(Vec<f64>, Option<f64>)> {
    if meas.frequencies.is_empty() || meas.points.is_empty() || meas.components.is_empty() {
        return Err(Error::StageInput("measurement set is empty".into()));
    }
    let ks: Vec<f64> = meas
        .frequencies
        .iter()
        .map(|f| 2.0 * std::f64::consts::PI * f / SPEED_OF_LIGHT)
        .collect();
    if ks.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
        return Err(Error::StageInput("measurement frequencies must be positive".into()));
    }
    let step = if ks.len() >= 2 {
        let dk = ks[1] - ks[0];
        let uniform = ks
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dk).abs() <= 1e-9 * ks[0].abs());
        uniform.then_some(dk)
    } else {
        Some(0.0)
    };
    Ok((ks, step))
}

/// Shared kernel: back-projects one recorded component of `meas` through
/// every route in `paths`.
fn backproject(
    meas: &MeasurementSet,
    paths: &[ReflectionPath],
    grid: &ImageGrid,
    cell_area: f64,
    component: FieldComponent,
) -> Result<VoxelImage> {
    if !(cell_area.is_finite() && cell_area > 0.0) {
        return Err(Error::Config(format!("cell area must be positive, got {cell_area}")));
    }
    let (ks, uniform_step) = wavenumbers(meas)?;
    let ic = meas
        .components
        .iter()
        .position(|&c| c == component)
        .ok_or_else(|| {
            Error::Config(format!(
                "component {component:?} is not recorded in the measurement set"
            ))
        })?;
    let axis = component.axis();
    let signs: Result<Vec<f64>> = paths
        .iter()
        .map(|p| Ok(sign_correction(&p.moment_map)?[axis]))
        .collect();
    let signs = signs?;
    let n_pts = meas.points.len();
    let n_comp = meas.components.len();

    let mut image = VoxelImage::zeros(grid.clone());
    let nx = grid.nx;
    image
        .values
        .par_chunks_mut(3)
        .enumerate()
        .for_each(|(voxel, out)| {
            let ix = voxel % nx;
            let iy = (voxel / nx) % grid.ny;
            let iz = voxel / (nx * grid.ny);
            let r = grid.position(ix, iy, iz);
            for (path, &sgn) in paths.iter().zip(&signs) {
                let focus = path.apply(r);
                for (im, &pm) in meas.points.iter().enumerate() {
                    let dist = (pm - focus).norm();
                    let mut phasor =
                        Complex64::new(0.0, ks[0] * dist).exp() * (cell_area * sgn);
                    let step = uniform_step.map(|dk| Complex64::new(0.0, dk * dist).exp());
                    for (ifq, &k) in ks.iter().enumerate() {
                        let ph = match step {
                            Some(_) => phasor,
                            None => Complex64::new(0.0, k * dist).exp() * (cell_area * sgn),
                        };
                        let base = (ifq * n_pts + im) * n_comp;
                        out[axis] += meas.values[base + ic] * ph;
                        if let Some(s) = step {
                            phasor *= s;
                        }
                    }
                }
            }
        });
    Ok(image)
}

/// Plain free-space back-projection of one recorded component, written
/// into that component's slot of the output image.
pub fn bpa_image(
    meas: &MeasurementSet,
    grid: &ImageGrid,
    cell_area: f64,
    component: FieldComponent,
) -> Result<VoxelImage> {
    let direct = vec![ReflectionPath {
        order: 0,
        plane_sequence: Vec::new(),
        linear: crate::geometry::Mat3::identity(),
        offset: crate::geometry::Vec3::zero(),
        moment_map: crate::geometry::Mat3::identity(),
    }];
    backproject(meas, &direct, grid, cell_area, component)
}

/// Reflection-aware back-projection: focuses one recorded component
/// through every distinct multipath route up to `max_path_order` bounces
/// (0 reduces to [`bpa_image`]).
pub fn rt_bpa_image(
    meas: &MeasurementSet,
    planes: &[PecPlane],
    max_path_order: usize,
    grid: &ImageGrid,
    cell_area: f64,
    component: FieldComponent,
) -> Result<VoxelImage> {
    let paths = reflection_paths(planes, max_path_order)?;
    backproject(meas, &paths, grid, cell_area, component)
}
