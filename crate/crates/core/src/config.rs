//! Scenario files: one JSON document drives every pipeline stage.
//!
//! The schema mirrors the domain types one to one (`scene`,
//! `sample_plane`, `solver`, ...), with physical units spelled out in the
//! field names. Unknown fields are rejected so a typo cannot silently
//! fall back to a default. A SHA-256 over the canonical serialization
//! identifies the scenario; stage outputs embed it so downstream stages
//! can refuse inputs produced under a different configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::em::wave::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::forward::{FieldComponent, SamplePlane};
use crate::geometry::{CVec3, Vec3};
use crate::imaging::{AngularFilter, ImageGrid, ImagingOptions};
use crate::isr::SolverSettings;
use crate::scene::{DipoleSource, PecPlane, Scene};

fn vec3(a: [f64; 3]) -> Vec3<f64> {
    Vec3::new(a[0], a[1], a[2])
}

/// One radiating dipole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub position_m: [f64; 3],
    /// Real part of the moment, A*m.
    pub moment_re: [f64; 3],
    /// Imaginary part of the moment, A*m.
    #[serde(default)]
    pub moment_im: [f64; 3],
}

/// One flat conducting reflector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneConfig {
    pub point_m: [f64; 3],
    pub normal: [f64; 3],
}

/// Sources and reflectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub planes: Vec<PlaneConfig>,
}

/// Rectangular measurement aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePlaneConfig {
    pub center_m: [f64; 3],
    pub normal: [f64; 3],
    pub width_m: f64,
    pub height_m: f64,
    /// Sample count along the width.
    pub nu: usize,
    /// Sample count along the height.
    pub nv: usize,
}

/// Measurement-synthesis controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Image-expansion depth used to synthesize the data.
    pub max_image_order: usize,
    /// Additive-noise SNR in dB; omit for noiseless data.
    pub snr_db: Option<f64>,
    /// Noise seed.
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { max_image_order: 8, snr_db: None, seed: 0 }
    }
}

/// Inverse-solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Image-expansion depth the solver models (one box per copy).
    pub max_image_order: usize,
    /// Source-box radius; omit for two wavelengths at the mean frequency.
    pub box_radius_m: Option<f64>,
    /// Accuracy digits fed to the truncation-order rule.
    pub digits: f64,
    /// Relative normal-residual stopping tolerance.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Tikhonov weight on the spectrum norm.
    pub tikhonov_weight: f64,
    /// Least measurements-per-unknown ratio accepted.
    pub min_measurement_fraction: f64,
    /// Extra clearance demanded between boxes and sample points, m.
    pub separation_margin_m: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            max_image_order: s.max_image_order,
            box_radius_m: None,
            digits: s.digits,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            tikhonov_weight: s.tikhonov_weight,
            min_measurement_fraction: s.min_measurement_fraction,
            separation_margin_m: s.separation_margin,
        }
    }
}

/// Angular filter applied before back-propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    ForwardHemisphere,
    Cone { half_angle_rad: f64 },
    RaisedCosine { half_angle_rad: f64 },
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig::ForwardHemisphere
    }
}

/// Reconstruction voxel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageGridConfig {
    pub center_m: [f64; 3],
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub spacing_m: f64,
}

impl Default for ImageGridConfig {
    fn default() -> Self {
        Self { center_m: [0.0; 3], nx: 161, ny: 161, nz: 1, spacing_m: 0.001 }
    }
}

/// Back-projection baseline controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// Deepest multipath route the reflection-aware baseline focuses.
    pub max_path_order: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { max_path_order: 1 }
    }
}

/// Metric-extraction controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Grid axis the resolution width is measured along (0, 1, 2).
    pub psf_axis: usize,
    /// Width measurement level below the peak, dB (-3 is half power).
    pub psf_level_db: f64,
    /// Cartesian component the metrics probe (0, 1, 2); omit for the
    /// vector magnitude.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    /// Peak-detection threshold relative to the image maximum, dB.
    pub peak_threshold_db: f64,
    /// Least distance between reported peaks, m.
    pub peak_min_separation_m: f64,
    /// Radius masked around expected sources for the artifact floor, m.
    pub exclusion_radius_m: f64,
    /// Extra positions probed for ghost levels, m.
    pub probe_points_m: Vec<[f64; 3]>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            psf_axis: 0,
            psf_level_db: -3.0,
            component: None,
            peak_threshold_db: -10.0,
            peak_min_separation_m: 0.005,
            exclusion_radius_m: 0.01,
            probe_points_m: Vec::new(),
        }
    }
}

/// The complete scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scene: SceneConfig,
    pub sample_plane: SamplePlaneConfig,
    pub frequencies_hz: Vec<f64>,
    pub recorded_components: Vec<FieldComponent>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    /// Fixed filter boresight (unit direction); omit to aim each source
    /// box at the aperture center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_boresight: Option<[f64; 3]>,
    #[serde(default)]
    pub image_grid: ImageGridConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl ScenarioConfig {
    /// Parses a scenario from JSON, rejecting unknown fields.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario parse: {e}")))
    }

    /// Pretty-printed JSON for writing scenarios back out.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("scenario serialize: {e}")))
    }

    /// SHA-256 over the canonical (compact) serialization, hex encoded.
    ///
    /// Struct fields serialize in declaration order and floats print in
    /// shortest round-trip form, so equal configurations hash equally.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serialization cannot fail");
        let digest = Sha256::digest(&bytes);
        let mut out = String::with_capacity(64);
        for b in digest {
            use std::fmt::Write;
            write!(out, "{b:02x}").expect("writing to a string cannot fail");
        }
        out
    }

    /// Builds the validated scene.
    pub fn scene(&self) -> Result<Scene> {
        let sources = self
            .scene
            .sources
            .iter()
            .map(|s| DipoleSource {
                position: vec3(s.position_m),
                moment: CVec3::from_arrays(s.moment_re, s.moment_im),
            })
            .collect();
        let planes: Result<Vec<PecPlane>> = self
            .scene
            .planes
            .iter()
            .map(|p| PecPlane::new(vec3(p.point_m), vec3(p.normal)))
            .collect();
        Scene::new(sources, planes?)
    }

    /// Builds the validated sampling aperture.
    pub fn sample_plane(&self) -> Result<SamplePlane> {
        let p = &self.sample_plane;
        SamplePlane::new(vec3(p.center_m), vec3(p.normal), p.width_m, p.height_m, p.nu, p.nv)
    }

    /// Checks the frequency ladder (positive, strictly increasing) and
    /// returns it.
    pub fn frequencies(&self) -> Result<&[f64]> {
        if self.frequencies_hz.is_empty() {
            return Err(Error::Config("at least one frequency is required".into()));
        }
        for &f in &self.frequencies_hz {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Config(format!("frequencies must be positive, got {f}")));
            }
        }
        for pair in self.frequencies_hz.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config(format!(
                    "frequencies_hz must be strictly increasing: {} follows {}",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(&self.frequencies_hz)
    }

    /// Checks the recorded component list and returns it.
    pub fn components(&self) -> Result<&[FieldComponent]> {
        if self.recorded_components.is_empty() {
            return Err(Error::Config("at least one recorded component is required".into()));
        }
        for (i, c) in self.recorded_components.iter().enumerate() {
            if self.recorded_components[..i].contains(c) {
                return Err(Error::Config(format!("component {c:?} is listed twice")));
            }
        }
        Ok(&self.recorded_components)
    }

    /// Resolves the solver settings; an omitted box radius defaults to
    /// two wavelengths at the mean configured frequency.
    pub fn solver_settings(&self) -> Result<SolverSettings> {
        let freqs = self.frequencies()?;
        let mean = freqs.iter().sum::<f64>() / freqs.len() as f64;
        let radius = match self.solver.box_radius_m {
            Some(r) if r.is_finite() && r > 0.0 => r,
            Some(r) => {
                return Err(Error::Config(format!("box radius must be positive, got {r}")))
            }
            None => 2.0 * SPEED_OF_LIGHT / mean,
        };
        Ok(SolverSettings {
            max_image_order: self.solver.max_image_order,
            box_radius: radius,
            digits: self.solver.digits,
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            tikhonov_weight: self.solver.tikhonov_weight,
            min_measurement_fraction: self.solver.min_measurement_fraction,
            separation_margin: self.solver.separation_margin_m,
        })
    }

    /// Angular filter, validated.
    pub fn angular_filter(&self) -> Result<AngularFilter> {
        let filter = match self.filter {
            FilterConfig::ForwardHemisphere => AngularFilter::ForwardHemisphere,
            FilterConfig::Cone { half_angle_rad } => {
                AngularFilter::Cone { half_angle: half_angle_rad }
            }
            FilterConfig::RaisedCosine { half_angle_rad } => {
                AngularFilter::RaisedCosine { half_angle: half_angle_rad }
            }
        };
        filter.validate()?;
        Ok(filter)
    }

    /// Reconstruction grid, validated.
    pub fn image_grid(&self) -> Result<ImageGrid> {
        let g = &self.image_grid;
        ImageGrid::new(vec3(g.center_m), g.nx, g.ny, g.nz, g.spacing_m)
    }

    /// Back-propagation options for the reconstruction stage.
    pub fn imaging_options(&self) -> Result<ImagingOptions> {
        let boresight = match self.filter_boresight {
            None => None,
            Some(b) => Some(vec3(b).normalized().ok_or_else(|| {
                Error::Config("filter_boresight must be a nonzero vector".into())
            })?),
        };
        Ok(ImagingOptions {
            filter: self.angular_filter()?,
            plane_center: vec3(self.sample_plane.center_m),
            boresight,
            relocate: true,
            max_box_order: None,
        })
    }

    /// Runs every constructor once so a bad scenario fails before any
    /// stage starts, then checks the cross-cutting geometry: sources and
    /// sample points confined to one side of every plate, and source
    /// boxes that do not collide at the configured order and radius.
    pub fn validate(&self) -> Result<()> {
        let scene = self.scene()?;
        let plane = self.sample_plane()?;
        self.frequencies()?;
        self.components()?;
        let settings = self.solver_settings()?;
        self.angular_filter()?;
        self.imaging_options()?;
        self.image_grid()?;
        if self.metrics.psf_axis > 2 {
            return Err(Error::Config(format!(
                "metrics.psf_axis must be 0, 1 or 2, got {}",
                self.metrics.psf_axis
            )));
        }
        if let Some(c) = self.metrics.component {
            if c > 2 {
                return Err(Error::Config(format!(
                    "metrics.component must be 0, 1 or 2, got {c}"
                )));
            }
        }
        if !(self.metrics.psf_level_db < 0.0 && self.metrics.psf_level_db.is_finite()) {
            return Err(Error::Config(format!(
                "metrics.psf_level_db must be negative, got {}",
                self.metrics.psf_level_db
            )));
        }
        let samples = plane.points();
        for (ip, plate) in scene.planes.iter().enumerate() {
            let reference = plate.signed_distance(plane.center);
            if reference == 0.0 {
                return Err(Error::Config(format!(
                    "sample_plane center lies on plane {ip}"
                )));
            }
            for (is, source) in scene.sources.iter().enumerate() {
                if plate.signed_distance(source.position) * reference <= 0.0 {
                    return Err(Error::Config(format!(
                        "scene.sources[{is}] is not on the aperture side of plane {ip}"
                    )));
                }
            }
            if samples.iter().any(|&p| plate.signed_distance(p) * reference <= 0.0) {
                return Err(Error::Config(format!(
                    "sample_plane crosses plane {ip}"
                )));
            }
        }
        // A colliding box layout is a configuration problem (radius or
        // order chosen badly), not a runtime geometry failure.
        crate::isr::source_boxes(&scene, settings.max_image_order, settings.box_radius).map_err(
            |e| match e {
                Error::Geometry(msg) => Error::Config(msg),
                other => other,
            },
        )?;
        Ok(())
    }
}
