//! The staged pipeline the CLI runs: simulate, invert, image, baseline,
//! metrics, each reading its predecessor's files from one output
//! directory.
//!
//! A `manifest.json` in the directory records the scenario hash and what
//! each completed stage produced. Every data file embeds the hash too;
//! stages check it on read, so editing the scenario between stages fails
//! loudly instead of mixing results. Passing `force` skips those checks
//! and lets a fresh run overwrite a stale directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{artifact_floor, find_peaks, ghost_check, local_peak_db, psf_width};
use crate::bpa::{bpa_image, rt_bpa_image};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::forward::{add_noise, simulate_measurements};
use crate::geometry::Vec3;
use crate::imaging::{isr_image, VoxelImage};
use crate::io;
use crate::isr::{solve_isr, source_boxes};

/// Most peaks spelled out individually in the metrics file.
const MAX_REPORTED_PEAKS: usize = 8;

/// One pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Simulate,
    Invert,
    Image,
    Bpa,
    Metrics,
}

impl Stage {
    /// Every stage, in execution order.
    pub const ALL: [Stage; 5] =
        [Stage::Simulate, Stage::Invert, Stage::Image, Stage::Bpa, Stage::Metrics];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Invert => "invert",
            Stage::Image => "image",
            Stage::Bpa => "bpa",
            Stage::Metrics => "metrics",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "simulate" => Ok(Stage::Simulate),
            "invert" => Ok(Stage::Invert),
            "image" => Ok(Stage::Image),
            "bpa" => Ok(Stage::Bpa),
            "metrics" => Ok(Stage::Metrics),
            other => Err(Error::Config(format!(
                "unknown stage {other:?}; stages are simulate, invert, image, bpa, metrics"
            ))),
        }
    }
}

/// What one completed stage left behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
}

/// Run ledger stored as `manifest.json` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    fn load(path: &Path) -> Result<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        let m = serde_json::from_str(&text)
            .map_err(|e| Error::StageInput(format!("manifest parse: {e}")))?;
        Ok(Some(m))
    }

    fn store(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialize: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// A validated scenario bound to an output directory.
pub struct Pipeline {
    config: ScenarioConfig,
    out_dir: PathBuf,
    hash: String,
    force: bool,
}

impl Pipeline {
    /// Validates the scenario, prepares the output directory, and checks
    /// any existing manifest for a scenario mismatch (which `force`
    /// overrides by starting the directory over).
    pub fn new(config: ScenarioConfig, out_dir: &Path, force: bool) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        std::fs::create_dir_all(out_dir)?;
        let manifest_path = out_dir.join("manifest.json");
        match Manifest::load(&manifest_path)? {
            Some(m) if m.config_hash != hash => {
                if !force {
                    return Err(Error::StageInput(format!(
                        "{} holds results for scenario {}, the active scenario is {}; \
                         use a fresh directory or pass --force",
                        out_dir.display(),
                        &m.config_hash[..12.min(m.config_hash.len())],
                        &hash[..12]
                    )));
                }
                Manifest { config_hash: hash.clone(), stages: BTreeMap::new() }
                    .store(&manifest_path)?;
            }
            Some(_) => {}
            None => {
                Manifest { config_hash: hash.clone(), stages: BTreeMap::new() }
                    .store(&manifest_path)?;
            }
        }
        std::fs::write(out_dir.join("scenario.json"), config.to_json()?)?;
        Ok(Self { config, out_dir: out_dir.to_path_buf(), hash, force })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    /// Hash that readers must match; `force` disables the check.
    fn expected_hash(&self) -> Option<&str> {
        if self.force {
            None
        } else {
            Some(&self.hash)
        }
    }

    fn record(&self, stage: Stage, wall_seconds: f64, outputs: &[&Path]) -> Result<()> {
        let path = self.out_dir.join("manifest.json");
        let mut manifest = Manifest::load(&path)?
            .unwrap_or_else(|| Manifest { config_hash: self.hash.clone(), stages: BTreeMap::new() });
        manifest.config_hash = self.hash.clone();
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                wall_seconds,
                outputs: outputs
                    .iter()
                    .map(|p| {
                        p.file_name()
                            .map(|n| n.to_string_lossy().into_owned())
                            .unwrap_or_else(|| p.display().to_string())
                    })
                    .collect(),
            },
        );
        manifest.store(&path)
    }

    /// Path of the measurement file a previous simulate stage wrote.
    fn measurements_path(&self) -> Result<PathBuf> {
        for name in ["measurements.csv", "measurements.bin"] {
            let p = self.out_dir.join(name);
            if p.exists() {
                return Ok(p);
            }
        }
        Err(Error::StageInput(format!(
            "no measurements in {}; run the simulate stage first",
            self.out_dir.display()
        )))
    }

    fn require(&self, name: &str, produced_by: &str) -> Result<PathBuf> {
        let p = self.out_dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::StageInput(format!(
                "no {name} in {}; run the {produced_by} stage first",
                self.out_dir.display()
            )))
        }
    }

    /// Synthesizes the measurement set and writes it out.
    pub fn simulate(&self) -> Result<()> {
        let start = Instant::now();
        let scene = self.config.scene()?;
        let plane = self.config.sample_plane()?;
        let mut meas = simulate_measurements(
            &scene,
            self.config.simulation.max_image_order,
            &plane,
            self.config.frequencies()?,
            self.config.components()?,
        )?;
        add_noise(&mut meas, self.config.simulation.snr_db, self.config.simulation.seed);
        let path = io::write_measurements_auto(&self.out_dir, &meas, &self.hash)?;
        self.record(Stage::Simulate, start.elapsed().as_secs_f64(), &[&path])
    }

    /// Separates per-copy spectra from the measurements.
    pub fn invert(&self) -> Result<()> {
        let start = Instant::now();
        let (meas, _) = io::read_measurements(&self.measurements_path()?, self.expected_hash())?;
        let scene = self.config.scene()?;
        let settings = self.config.solver_settings()?;
        let boxes = source_boxes(&scene, settings.max_image_order, settings.box_radius)?;
        let (spectra, diagnostics) = solve_isr(&meas, &boxes, &settings)?;
        let spec_path = self.out_dir.join("spectra.bin");
        io::write_spectra(&spec_path, &spectra, &self.hash)?;
        let mut entries = Vec::new();
        for d in &diagnostics {
            let tag = format!("freq{:.0}mhz", d.frequency / 1.0e6);
            entries.push((format!("{tag}_iterations"), d.iterations.to_string()));
            entries.push((format!("{tag}_relative_residual"), format!("{:?}", d.relative_residual)));
            for (i, e) in d.box_energy.iter().enumerate() {
                entries.push((format!("{tag}_box{i}_energy"), format!("{e:?}")));
            }
        }
        let diag_path = self.out_dir.join("solver_diagnostics.txt");
        io::write_metrics(&diag_path, &entries, &self.hash)?;
        self.record(Stage::Invert, start.elapsed().as_secs_f64(), &[&spec_path, &diag_path])
    }

    /// Back-propagates the spectra into the combined reconstruction.
    pub fn image(&self) -> Result<()> {
        let start = Instant::now();
        let spec_path = self.require("spectra.bin", "invert")?;
        let (spectra, _) = io::read_spectra(&spec_path, self.expected_hash())?;
        let scene = self.config.scene()?;
        let grid = self.config.image_grid()?;
        let options = self.config.imaging_options()?;
        let positions: Vec<Vec3<f64>> = scene.sources.iter().map(|s| s.position).collect();
        let image = isr_image(&spectra, &positions, &grid, &options)?;
        let csv = self.out_dir.join("isr_image.csv");
        let pgm = self.out_dir.join("isr_image.pgm");
        io::write_image_csv(&csv, &image, &self.hash)?;
        io::write_image_pgm(&pgm, &image, &self.hash)?;
        self.record(Stage::Image, start.elapsed().as_secs_f64(), &[&csv, &pgm])
    }

    /// Runs both back-projection baselines on the measurements.
    pub fn bpa(&self) -> Result<()> {
        let start = Instant::now();
        let (meas, _) = io::read_measurements(&self.measurements_path()?, self.expected_hash())?;
        let scene = self.config.scene()?;
        let plane = self.config.sample_plane()?;
        let grid = self.config.image_grid()?;
        let area = plane.cell_area();
        // One back-projection per recorded polarization, merged into the
        // matching component slots of a single image per baseline.
        let mut plain = VoxelImage::zeros(grid.clone());
        let mut routed = VoxelImage::zeros(grid.clone());
        for &comp in &meas.components {
            plain.accumulate_scaled(&bpa_image(&meas, &grid, area, comp)?, [1.0; 3])?;
            routed.accumulate_scaled(
                &rt_bpa_image(
                    &meas,
                    &scene.planes,
                    self.config.baseline.max_path_order,
                    &grid,
                    area,
                    comp,
                )?,
                [1.0; 3],
            )?;
        }
        let mut outputs = Vec::new();
        for (name, image) in [("bpa_image", &plain), ("rtbpa_image", &routed)] {
            let csv = self.out_dir.join(format!("{name}.csv"));
            let pgm = self.out_dir.join(format!("{name}.pgm"));
            io::write_image_csv(&csv, image, &self.hash)?;
            io::write_image_pgm(&pgm, image, &self.hash)?;
            outputs.push(csv);
            outputs.push(pgm);
        }
        let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
        self.record(Stage::Bpa, start.elapsed().as_secs_f64(), &refs)
    }

    /// Extracts metrics from whichever reconstructions exist.
    pub fn metrics(&self) -> Result<()> {
        let start = Instant::now();
        let scene = self.config.scene()?;
        let sources: Vec<Vec3<f64>> = scene.sources.iter().map(|s| s.position).collect();

        let mut entries: Vec<(String, String)> = Vec::new();
        entries.push(("source_count".into(), scene.sources.len().to_string()));

        let mut measured_any = false;
        for (prefix, file) in
            [("isr", "isr_image.csv"), ("bpa", "bpa_image.csv"), ("rtbpa", "rtbpa_image.csv")]
        {
            let path = self.out_dir.join(file);
            if !path.exists() {
                continue;
            }
            measured_any = true;
            let (image, _) = io::read_image_csv(&path, self.expected_hash())?;
            self.image_metrics(prefix, &image, &sources, &mut entries)?;
        }
        if !measured_any {
            return Err(Error::StageInput(format!(
                "no reconstructions in {}; run the image or bpa stage first",
                self.out_dir.display()
            )));
        }
        let path = self.out_dir.join("metrics.txt");
        io::write_metrics(&path, &entries, &self.hash)?;
        self.record(Stage::Metrics, start.elapsed().as_secs_f64(), &[&path])
    }

    fn image_metrics(
        &self,
        prefix: &str,
        image: &VoxelImage,
        sources: &[Vec3<f64>],
        entries: &mut Vec<(String, String)>,
    ) -> Result<()> {
        let m = &self.config.metrics;
        let width = psf_width(image, m.component, m.psf_axis, m.psf_level_db)?;
        entries.push((format!("{prefix}_psf_width_m"), format!("{width:?}")));
        let report =
            find_peaks(image, m.component, m.peak_threshold_db, m.peak_min_separation_m)?;
        entries.push((format!("{prefix}_peak_count"), report.len().to_string()));
        for (i, p) in report.peaks.iter().take(MAX_REPORTED_PEAKS).enumerate() {
            entries.push((format!("{prefix}_peak{i}_x_m"), format!("{:?}", p.position.x)));
            entries.push((format!("{prefix}_peak{i}_y_m"), format!("{:?}", p.position.y)));
            entries.push((format!("{prefix}_peak{i}_z_m"), format!("{:?}", p.position.z)));
            entries.push((format!("{prefix}_peak{i}_level_db"), format!("{:?}", p.level_db)));
            entries.push((format!("{prefix}_peak{i}_prominence"), format!("{:?}", p.prominence)));
        }
        let floor = artifact_floor(image, m.component, m.exclusion_radius_m, sources)?;
        entries.push((format!("{prefix}_artifact_floor_db"), format!("{floor:?}")));
        for (i, probe) in m.probe_points_m.iter().enumerate() {
            let probe = Vec3::new(probe[0], probe[1], probe[2]);
            let level = local_peak_db(image, probe, m.exclusion_radius_m)?;
            entries.push((format!("{prefix}_probe{i}_db"), format!("{level:?}")));
            let (flagged, local) = ghost_check(image, probe, m.peak_threshold_db)?;
            entries.push((format!("{prefix}_probe{i}_ghost"), flagged.to_string()));
            entries.push((format!("{prefix}_probe{i}_ghost_db"), format!("{local:?}")));
        }
        Ok(())
    }

    /// Runs `stages` in pipeline order regardless of the order given.
    pub fn run(&self, stages: &[Stage]) -> Result<()> {
        for stage in Stage::ALL {
            if !stages.contains(&stage) {
                continue;
            }
            match stage {
                Stage::Simulate => self.simulate()?,
                Stage::Invert => self.invert()?,
                Stage::Image => self.image()?,
                Stage::Bpa => self.bpa()?,
                Stage::Metrics => self.metrics()?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_scenario() -> ScenarioConfig {
        ScenarioConfig::from_json(
            r#"{
                "scene": {
                    "sources": [
                        { "position_m": [0.0, 0.0, 0.0], "moment_re": [1.0e-3, 0.0, 0.0] }
                    ],
                    "planes": [
                        { "point_m": [0.0, 0.0, -0.08], "normal": [0.0, 0.0, 1.0] }
                    ]
                },
                "sample_plane": {
                    "center_m": [0.0, 0.0, 0.45],
                    "normal": [0.0, 0.0, 1.0],
                    "width_m": 0.3, "height_m": 0.3, "nu": 13, "nv": 13
                },
                "frequencies_hz": [8.0e9, 10.0e9],
                "recorded_components": ["x", "y", "z"],
                "simulation": { "max_image_order": 1 },
                "solver": {
                    "max_image_order": 1,
                    "box_radius_m": 0.02,
                    "max_iterations": 25,
                    "min_measurement_fraction": 0.1
                },
                "image_grid": { "nx": 41, "ny": 41, "nz": 1, "spacing_m": 0.002 },
                "metrics": { "probe_points_m": [[0.0, 0.0, -0.16]] }
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn stages_parse_by_name() {
        assert_eq!("invert".parse::<Stage>().unwrap(), Stage::Invert);
        assert!("invurt".parse::<Stage>().is_err());
    }

    #[test]
    fn full_run_produces_all_outputs_and_is_deterministic() {
        let cfg = small_scenario();
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        for dir in [&dir_a, &dir_b] {
            let pipe = Pipeline::new(cfg.clone(), dir.path(), false).unwrap();
            pipe.run(&Stage::ALL).unwrap();
        }
        for name in
            ["measurements.csv", "spectra.bin", "isr_image.csv", "rtbpa_image.csv", "metrics.txt"]
        {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
        let manifest =
            Manifest::load(&dir_a.path().join("manifest.json")).unwrap().expect("manifest");
        assert_eq!(manifest.config_hash, cfg.hash());
        assert_eq!(manifest.stages.len(), 5);
        assert!(manifest.stages["simulate"].outputs.contains(&"measurements.csv".to_string()));

        // The ISR reconstruction must place its peak on the source.
        let (img, _) =
            io::read_image_csv(&dir_a.path().join("isr_image.csv"), Some(&cfg.hash())).unwrap();
        let report = crate::analysis::find_peaks(&img, None, -6.0, 0.004).unwrap();
        assert!(
            report.peaks[0].position.norm() <= 0.004,
            "ISR peak at {:?}, source at the origin",
            report.peaks[0].position
        );
    }

    #[test]
    fn out_of_order_stages_are_refused() {
        let cfg = small_scenario();
        let dir = tempdir().unwrap();
        let pipe = Pipeline::new(cfg, dir.path(), false).unwrap();
        assert!(matches!(pipe.invert(), Err(Error::StageInput(_))));
        assert!(matches!(pipe.image(), Err(Error::StageInput(_))));
        assert!(matches!(pipe.metrics(), Err(Error::StageInput(_))));
    }

    #[test]
    fn scenario_mismatch_needs_force() {
        let cfg = small_scenario();
        let dir = tempdir().unwrap();
        let pipe = Pipeline::new(cfg.clone(), dir.path(), false).unwrap();
        pipe.simulate().unwrap();

        let mut changed = cfg.clone();
        changed.simulation.seed = 99;
        changed.simulation.snr_db = Some(40.0);
        // Binding the directory to a different scenario is refused...
        assert!(matches!(
            Pipeline::new(changed.clone(), dir.path(), false),
            Err(Error::StageInput(_))
        ));
        // ...unless forced, which restarts the ledger and reruns cleanly.
        let forced = Pipeline::new(changed.clone(), dir.path(), true).unwrap();
        forced.simulate().unwrap();
        let manifest = Manifest::load(&dir.path().join("manifest.json")).unwrap().unwrap();
        assert_eq!(manifest.config_hash, changed.hash());
    }
}
