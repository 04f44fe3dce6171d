//! On-disk formats for stage outputs.
//!
//! * Measurements: CSV for small sets, a packed little-endian binary twin
//!   for large ones; readers sniff the magic bytes, so either loads from
//!   the same call.
//! * Spectra: packed binary (they are bulky and never hand-edited).
//! * Images: a full CSV dump plus an 8-bit grayscale preview (binary PGM)
//!   with a fixed dB floor.
//! * Metrics: flat `key=value` text.
//!
//! Every file embeds the scenario hash it was produced under. Readers
//! take the expected hash and refuse a mismatched input - a later stage
//! cannot silently consume data from a different scenario - unless the
//! caller passes `None` (the CLI's `--force`).
//!
//! Floats are written in shortest round-trip form, so write-read cycles
//! reproduce values bit for bit.

use std::fs;
use std::io::{BufWriter, Read, Write as _};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{FieldComponent, MeasurementSet};
use crate::geometry::{Mat3, Vec3};
use crate::imaging::{ImageGrid, VoxelImage};
use crate::isr::{FrequencySpectra, SourceBox, SpectrumSet};

/// Above this many complex samples, measurements go to the binary format.
pub const MEASUREMENT_BINARY_THRESHOLD: usize = 200_000;

/// Preview images clip this far below the peak, dB.
pub const PGM_FLOOR_DB: f64 = -40.0;

const MEAS_MAGIC: &[u8; 8] = b"MPIMEAS\x01";
const SPEC_MAGIC: &[u8; 8] = b"MPISPEC\x02";

/// Largest element count a binary header may claim; anything bigger is a
/// corrupt or hostile file, not data.
const MAX_BINARY_ELEMENTS: u64 = 1 << 32;

fn check_hash(found: &str, expected: Option<&str>) -> Result<()> {
    match expected {
        Some(want) if want != found => Err(Error::StageInput(format!(
            "input was produced under scenario {}, the active scenario is {}; \
             rerun the earlier stages or pass --force",
            &found[..found.len().min(12)],
            &want[..want.len().min(12)],
        ))),
        _ => Ok(()),
    }
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::StageInput(format!("{what}: cannot parse number from {text:?}")))
}

// ---------------------------------------------------------------------------
// Little-endian binary primitives.
// ---------------------------------------------------------------------------

struct BinReader<R> {
    inner: R,
}

impl<R: Read> BinReader<R> {
    fn new(inner: R) -> Self {
        Self { inner }
    }

    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::StageInput("binary file is truncated".into()))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.bytes(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("read_exact returned 8 bytes")))
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_BINARY_ELEMENTS {
            return Err(Error::StageInput(format!("implausible {what} count {n}")));
        }
        Ok(n as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.bytes(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("read_exact returned 8 bytes")))
    }

    fn vec3(&mut self) -> Result<Vec3<f64>> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }

    fn complex_values(&mut self, n: usize) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(Complex64::new(self.f64()?, self.f64()?));
        }
        Ok(out)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.count("string length")?;
        String::from_utf8(self.bytes(n)?)
            .map_err(|_| Error::StageInput("binary file holds a non-UTF-8 string".into()))
    }
}

fn put_u64(w: &mut impl std::io::Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(w: &mut impl std::io::Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_vec3(w: &mut impl std::io::Write, v: Vec3<f64>) -> Result<()> {
    put_f64(w, v.x)?;
    put_f64(w, v.y)?;
    put_f64(w, v.z)
}

fn put_string(w: &mut impl std::io::Write, s: &str) -> Result<()> {
    put_u64(w, s.len() as u64)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Measurements.
// ---------------------------------------------------------------------------

fn component_suffix(c: FieldComponent) -> &'static str {
    match c {
        FieldComponent::X => "ex",
        FieldComponent::Y => "ey",
        FieldComponent::Z => "ez",
    }
}

fn component_from_suffix(s: &str) -> Result<FieldComponent> {
    match s {
        "ex" => Ok(FieldComponent::X),
        "ey" => Ok(FieldComponent::Y),
        "ez" => Ok(FieldComponent::Z),
        other => Err(Error::StageInput(format!("unknown field column suffix {other:?}"))),
    }
}

/// Writes measurements as CSV: comment lines, a header naming the
/// recorded components, then one row per (frequency, point).
pub fn write_measurements_csv(
    path: &Path,
    meas: &MeasurementSet,
    config_hash: &str,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(
        w,
        "# frequencies={} points={} components={}",
        meas.frequencies.len(),
        meas.points.len(),
        meas.components.len()
    )?;
    let mut header = String::from("x_m,y_m,z_m,freq_hz");
    for &c in &meas.components {
        let s = component_suffix(c);
        header.push_str(&format!(",re_{s},im_{s}"));
    }
    writeln!(w, "{header}")?;
    for (ifq, &f) in meas.frequencies.iter().enumerate() {
        for (ipt, &p) in meas.points.iter().enumerate() {
            write!(w, "{:?},{:?},{:?},{:?}", p.x, p.y, p.z, f)?;
            for ic in 0..meas.components.len() {
                let v = meas.value(ifq, ipt, ic);
                write!(w, ",{:?},{:?}", v.re, v.im)?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes measurements in the packed binary layout.
pub fn write_measurements_binary(
    path: &Path,
    meas: &MeasurementSet,
    config_hash: &str,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MEAS_MAGIC)?;
    put_string(&mut w, config_hash)?;
    put_u64(&mut w, meas.frequencies.len() as u64)?;
    put_u64(&mut w, meas.points.len() as u64)?;
    put_u64(&mut w, meas.components.len() as u64)?;
    for &f in &meas.frequencies {
        put_f64(&mut w, f)?;
    }
    for &p in &meas.points {
        put_vec3(&mut w, p)?;
    }
    for &c in &meas.components {
        w.write_all(&[c.axis() as u8])?;
    }
    for v in &meas.values {
        put_f64(&mut w, v.re)?;
        put_f64(&mut w, v.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes measurements under `dir`, choosing CSV for small sets and the
/// binary twin above [`MEASUREMENT_BINARY_THRESHOLD`] samples. Returns
/// the path written.
pub fn write_measurements_auto(
    dir: &Path,
    meas: &MeasurementSet,
    config_hash: &str,
) -> Result<PathBuf> {
    if meas.values.len() > MEASUREMENT_BINARY_THRESHOLD {
        let path = dir.join("measurements.bin");
        write_measurements_binary(&path, meas, config_hash)?;
        Ok(path)
    } else {
        let path = dir.join("measurements.csv");
        write_measurements_csv(&path, meas, config_hash)?;
        Ok(path)
    }
}

fn read_measurements_binary(bytes: &[u8], expected: Option<&str>) -> Result<(MeasurementSet, String)> {
    let mut r = BinReader::new(&bytes[MEAS_MAGIC.len()..]);
    let hash = r.string()?;
    check_hash(&hash, expected)?;
    let n_freq = r.count("frequency")?;
    let n_pts = r.count("point")?;
    let n_comp = r.count("component")?;
    let mut frequencies = Vec::with_capacity(n_freq);
    for _ in 0..n_freq {
        frequencies.push(r.f64()?);
    }
    let mut points = Vec::with_capacity(n_pts);
    for _ in 0..n_pts {
        points.push(r.vec3()?);
    }
    let mut components = Vec::with_capacity(n_comp);
    for b in r.bytes(n_comp)? {
        components.push(match b {
            0 => FieldComponent::X,
            1 => FieldComponent::Y,
            2 => FieldComponent::Z,
            other => {
                return Err(Error::StageInput(format!("invalid component tag {other}")));
            }
        });
    }
    let n = n_freq
        .checked_mul(n_pts)
        .and_then(|n| n.checked_mul(n_comp))
        .ok_or_else(|| Error::StageInput("measurement counts overflow".into()))?;
    let values = r.complex_values(n)?;
    Ok((MeasurementSet { frequencies, points, components, values }, hash))
}

fn read_measurements_csv(text: &str, expected: Option<&str>) -> Result<(MeasurementSet, String)> {
    let mut hash = None;
    let mut header: Option<Vec<FieldComponent>> = None;
    let mut frequencies: Vec<f64> = Vec::new();
    let mut points: Vec<Vec3<f64>> = Vec::new();
    let mut per_freq: Vec<Vec<Complex64>> = Vec::new();
    let mut first_block_done = false;
    let mut block_pt = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(h) = rest.trim().strip_prefix("config_hash=") {
                hash = Some(h.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let components = match &header {
            None => {
                // Header row: fixed coordinate columns then re/im pairs.
                if fields.len() < 6
                    || fields[..4] != ["x_m", "y_m", "z_m", "freq_hz"]
                    || (fields.len() - 4) % 2 != 0
                {
                    return Err(Error::StageInput(format!(
                        "line {}: malformed measurement header",
                        lineno + 1
                    )));
                }
                let mut comps = Vec::new();
                for pair in fields[4..].chunks(2) {
                    let re = pair[0].strip_prefix("re_");
                    let im = pair[1].strip_prefix("im_");
                    match (re, im) {
                        (Some(a), Some(b)) if a == b => comps.push(component_from_suffix(a)?),
                        _ => {
                            return Err(Error::StageInput(format!(
                                "line {}: field columns must come in re_/im_ pairs",
                                lineno + 1
                            )))
                        }
                    }
                }
                header = Some(comps);
                continue;
            }
            Some(c) => c,
        };
        let n_comp = components.len();
        if fields.len() != 4 + 2 * n_comp {
            return Err(Error::StageInput(format!(
                "line {}: expected {} columns, found {}",
                lineno + 1,
                4 + 2 * n_comp,
                fields.len()
            )));
        }
        let what = "measurement row";
        let p = Vec3::new(
            parse_f64(fields[0], what)?,
            parse_f64(fields[1], what)?,
            parse_f64(fields[2], what)?,
        );
        let f = parse_f64(fields[3], what)?;
        if frequencies.last() != Some(&f) {
            // New frequency block begins.
            if !frequencies.is_empty() {
                if block_pt != points.len() {
                    return Err(Error::StageInput(format!(
                        "line {}: frequency block ended after {} of {} points",
                        lineno + 1,
                        block_pt,
                        points.len()
                    )));
                }
                first_block_done = true;
            }
            if frequencies.contains(&f) {
                return Err(Error::StageInput(format!(
                    "line {}: frequency {f} appears in two separate blocks",
                    lineno + 1
                )));
            }
            frequencies.push(f);
            per_freq.push(Vec::new());
            block_pt = 0;
        }
        if first_block_done {
            let want = points.get(block_pt).ok_or_else(|| {
                Error::StageInput(format!("line {}: more points than the first block", lineno + 1))
            })?;
            if (p - *want).norm() != 0.0 {
                return Err(Error::StageInput(format!(
                    "line {}: point {:?} does not match the first block's {:?}",
                    lineno + 1,
                    p,
                    want
                )));
            }
        } else {
            points.push(p);
        }
        let block = per_freq.last_mut().expect("a frequency block is open");
        for pair in fields[4..].chunks(2) {
            block.push(Complex64::new(parse_f64(pair[0], what)?, parse_f64(pair[1], what)?));
        }
        block_pt += 1;
    }

    let components = header
        .ok_or_else(|| Error::StageInput("measurement file has no header row".into()))?;
    if frequencies.is_empty() {
        return Err(Error::StageInput("measurement file has no data rows".into()));
    }
    if block_pt != points.len() {
        return Err(Error::StageInput(format!(
            "last frequency block has {} of {} points",
            block_pt,
            points.len()
        )));
    }
    let hash = hash
        .ok_or_else(|| Error::StageInput("measurement file lacks a config_hash comment".into()))?;
    check_hash(&hash, expected)?;
    let values: Vec<Complex64> = per_freq.into_iter().flatten().collect();
    Ok((MeasurementSet { frequencies, points, components, values }, hash))
}

/// Loads measurements from either on-disk format, sniffing the magic
/// bytes, and checks the embedded scenario hash against `expected`.
pub fn read_measurements(path: &Path, expected: Option<&str>) -> Result<(MeasurementSet, String)> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MEAS_MAGIC) {
        read_measurements_binary(&bytes, expected)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| {
            Error::StageInput("measurement file is neither the binary format nor UTF-8".into())
        })?;
        read_measurements_csv(text, expected)
    }
}

// ---------------------------------------------------------------------------
// Spectra.
// ---------------------------------------------------------------------------

/// Writes a spectrum set in the packed binary layout.
pub fn write_spectra(path: &Path, spectra: &SpectrumSet, config_hash: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(SPEC_MAGIC)?;
    put_string(&mut w, config_hash)?;
    put_u64(&mut w, spectra.boxes.len() as u64)?;
    for b in &spectra.boxes {
        put_vec3(&mut w, b.center)?;
        put_f64(&mut w, b.radius)?;
        put_u64(&mut w, b.source_index as u64)?;
        put_u64(&mut w, b.order as u64)?;
        put_u64(&mut w, b.plane_sequence.len() as u64)?;
        for &q in &b.plane_sequence {
            put_u64(&mut w, q as u64)?;
        }
        for row in &b.moment_map.rows {
            for &v in row {
                put_f64(&mut w, v)?;
            }
        }
    }
    put_u64(&mut w, spectra.per_frequency.len() as u64)?;
    for fs_ in &spectra.per_frequency {
        put_f64(&mut w, fs_.frequency)?;
        put_f64(&mut w, fs_.wavenumber)?;
        put_u64(&mut w, fs_.order as u64)?;
        put_u64(&mut w, fs_.values.len() as u64)?;
        for v in &fs_.values {
            put_f64(&mut w, v.re)?;
            put_f64(&mut w, v.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a spectrum set and checks its scenario hash against `expected`.
pub fn read_spectra(path: &Path, expected: Option<&str>) -> Result<(SpectrumSet, String)> {
    let bytes = fs::read(path)?;
    if !bytes.starts_with(SPEC_MAGIC) {
        return Err(Error::StageInput(format!(
            "{} is not a spectrum file (bad magic)",
            path.display()
        )));
    }
    let mut r = BinReader::new(&bytes[SPEC_MAGIC.len()..]);
    let hash = r.string()?;
    check_hash(&hash, expected)?;
    let n_boxes = r.count("box")?;
    let mut boxes = Vec::with_capacity(n_boxes);
    for _ in 0..n_boxes {
        let center = r.vec3()?;
        let radius = r.f64()?;
        let source_index = r.count("source index")?;
        let order = r.count("order")?;
        let seq_len = r.count("sequence")?;
        let mut plane_sequence = Vec::with_capacity(seq_len);
        for _ in 0..seq_len {
            plane_sequence.push(r.count("reflector index")?);
        }
        let mut rows = [[0.0; 3]; 3];
        for row in &mut rows {
            for v in row.iter_mut() {
                *v = r.f64()?;
            }
        }
        boxes.push(SourceBox {
            center,
            radius,
            source_index,
            order,
            plane_sequence,
            moment_map: Mat3 { rows },
        });
    }
    let n_freq = r.count("frequency")?;
    let mut per_frequency = Vec::with_capacity(n_freq);
    for _ in 0..n_freq {
        let frequency = r.f64()?;
        let wavenumber = r.f64()?;
        let order = r.count("quadrature order")?;
        let n_values = r.count("value")?;
        let grid = crate::em::quadrature::SphericalGrid::new(order)?;
        if n_values != boxes.len() * grid.len() * 2 {
            return Err(Error::StageInput(format!(
                "spectrum block claims {n_values} values, layout needs {}",
                boxes.len() * grid.len() * 2
            )));
        }
        let values = r.complex_values(n_values)?;
        per_frequency.push(FrequencySpectra { frequency, wavenumber, order, grid, values });
    }
    Ok((SpectrumSet { boxes, per_frequency }, hash))
}

// ---------------------------------------------------------------------------
// Images.
// ---------------------------------------------------------------------------

/// Writes a voxel image as CSV with the grid geometry in comments, one
/// row per voxel in storage order.
pub fn write_image_csv(path: &Path, image: &VoxelImage, config_hash: &str) -> Result<()> {
    let g = &image.grid;
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(w, "# grid_center_m={:?},{:?},{:?}", g.center.x, g.center.y, g.center.z)?;
    writeln!(w, "# grid_shape={},{},{}", g.nx, g.ny, g.nz)?;
    writeln!(w, "# grid_spacing_m={:?}", g.spacing)?;
    writeln!(w, "x_m,y_m,z_m,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez")?;
    for iz in 0..g.nz {
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let p = g.position(ix, iy, iz);
                let v = g.index(ix, iy, iz);
                write!(w, "{:?},{:?},{:?}", p.x, p.y, p.z)?;
                for c in 0..3 {
                    let val = image.component(v, c);
                    write!(w, ",{:?},{:?}", val.re, val.im)?;
                }
                writeln!(w)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads an image CSV and checks its scenario hash against `expected`.
pub fn read_image_csv(path: &Path, expected: Option<&str>) -> Result<(VoxelImage, String)> {
    let text = fs::read_to_string(path)?;
    let mut hash = None;
    let mut center = None;
    let mut shape = None;
    let mut spacing = None;
    let mut values: Vec<Complex64> = Vec::new();
    let mut saw_header = false;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(h) = rest.strip_prefix("config_hash=") {
                hash = Some(h.trim().to_string());
            } else if let Some(c) = rest.strip_prefix("grid_center_m=") {
                let parts: Vec<&str> = c.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::StageInput("malformed grid_center_m comment".into()));
                }
                center = Some(Vec3::new(
                    parse_f64(parts[0], "grid center")?,
                    parse_f64(parts[1], "grid center")?,
                    parse_f64(parts[2], "grid center")?,
                ));
            } else if let Some(s) = rest.strip_prefix("grid_shape=") {
                let parts: Vec<&str> = s.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::StageInput("malformed grid_shape comment".into()));
                }
                let dim = |t: &str| {
                    t.trim().parse::<usize>().map_err(|_| {
                        Error::StageInput(format!("grid shape: cannot parse {t:?}"))
                    })
                };
                shape = Some((dim(parts[0])?, dim(parts[1])?, dim(parts[2])?));
            } else if let Some(s) = rest.strip_prefix("grid_spacing_m=") {
                spacing = Some(parse_f64(s, "grid spacing")?);
            }
            continue;
        }
        if !saw_header {
            if line != "x_m,y_m,z_m,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez" {
                return Err(Error::StageInput(format!(
                    "line {}: malformed image header",
                    lineno + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::StageInput(format!(
                "line {}: expected 9 columns, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        for pair in fields[3..].chunks(2) {
            values.push(Complex64::new(
                parse_f64(pair[0], "image row")?,
                parse_f64(pair[1], "image row")?,
            ));
        }
    }

    let hash =
        hash.ok_or_else(|| Error::StageInput("image file lacks a config_hash comment".into()))?;
    check_hash(&hash, expected)?;
    let (nx, ny, nz) =
        shape.ok_or_else(|| Error::StageInput("image file lacks a grid_shape comment".into()))?;
    let center =
        center.ok_or_else(|| Error::StageInput("image file lacks a grid_center_m comment".into()))?;
    let spacing = spacing
        .ok_or_else(|| Error::StageInput("image file lacks a grid_spacing_m comment".into()))?;
    let grid = ImageGrid::new(center, nx, ny, nz, spacing)?;
    if values.len() != grid.len() * 3 {
        return Err(Error::StageInput(format!(
            "image file has {} voxels, grid shape needs {}",
            values.len() / 3,
            grid.len()
        )));
    }
    Ok((VoxelImage { grid, values }, hash))
}

/// Writes an 8-bit grayscale preview (binary PGM) of the voxel
/// magnitude, clipped [`PGM_FLOOR_DB`] below the peak. Multi-slice
/// images are collapsed by a maximum projection along z.
pub fn write_image_pgm(path: &Path, image: &VoxelImage, config_hash: &str) -> Result<()> {
    let g = &image.grid;
    let mut peak = 0.0f64;
    for v in 0..g.len() {
        peak = peak.max(image.magnitude(v));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "P5")?;
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(w, "{} {}", g.nx, g.ny)?;
    writeln!(w, "255")?;
    let mut row = Vec::with_capacity(g.nx);
    for iy in 0..g.ny {
        row.clear();
        for ix in 0..g.nx {
            let mut mag = 0.0f64;
            for iz in 0..g.nz {
                mag = mag.max(image.magnitude(g.index(ix, iy, iz)));
            }
            let byte = if peak <= 0.0 || mag <= 0.0 {
                0u8
            } else {
                let db = (20.0 * (mag / peak).log10()).clamp(PGM_FLOOR_DB, 0.0);
                ((db - PGM_FLOOR_DB) / -PGM_FLOOR_DB * 255.0).round() as u8
            };
            row.push(byte);
        }
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Metrics.
// ---------------------------------------------------------------------------

/// Writes metrics as flat `key=value` lines, in the order given.
pub fn write_metrics(path: &Path, entries: &[(String, String)], config_hash: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# config_hash={config_hash}")?;
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Loads metrics and checks the scenario hash against `expected`.
pub fn read_metrics(path: &Path, expected: Option<&str>) -> Result<(Vec<(String, String)>, String)> {
    let text = fs::read_to_string(path)?;
    let mut hash = None;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(h) = rest.trim().strip_prefix("config_hash=") {
                hash = Some(h.trim().to_string());
            }
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::StageInput(format!("line {}: metrics rows are key=value", lineno + 1))
        })?;
        entries.push((k.to_string(), v.to_string()));
    }
    let hash =
        hash.ok_or_else(|| Error::StageInput("metrics file lacks a config_hash comment".into()))?;
    check_hash(&hash, expected)?;
    Ok((entries, hash))
}
