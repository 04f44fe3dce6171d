//! Scene geometry: dipole sources, flat conducting reflectors, and the
//! image-source expansion that turns reflections into extra sources.
//!
//! A perfectly conducting plane with unit normal `n` through point `a`
//! mirrors a dipole at `p` to `p' = p - 2 ((p - a) . n) n`, and maps its
//! moment through `M = 2 n n^T - I` (normal component kept, tangential
//! flipped), so that the tangential electric field of source plus image
//! vanishes on the plane. Multiple reflectors compound: reflecting images
//! in turn yields higher-order copies, exact for perpendicular corners
//! and geometrically convergent for parallel pairs.

use crate::error::{Error, Result};
use crate::geometry::{CVec3, Mat3, Vec3};

/// Sources closer than this to a reflector are rejected as degenerate.
pub const MIN_PLANE_CLEARANCE: f64 = 1e-6;

/// Two image copies whose positions and moment maps agree within this are
/// the same term of the expansion (e.g. the two bounce orders around a
/// perpendicular corner) and are kept once.
const IMAGE_DEDUP_TOL: f64 = 1e-9;

/// Hard cap on the expansion size; hitting it means a runaway scene.
const MAX_IMAGE_COUNT: usize = 10_000;

/// Infinite perfectly conducting plane reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PecPlane {
    /// A point on the plane.
    pub point: Vec3<f64>,
    /// Unit normal.
    pub normal: Vec3<f64>,
}

impl PecPlane {
    /// Builds a plane through `point`; `normal` is normalized and must be
    /// nonzero and finite.
    pub fn new(point: Vec3<f64>, normal: Vec3<f64>) -> Result<Self> {
        if !point.is_finite() || !normal.is_finite() {
            return Err(Error::Geometry(
                "reflector point and normal must be finite".into(),
            ));
        }
        let normal = normal.normalized().ok_or_else(|| {
            Error::Geometry("reflector normal must be nonzero".into())
        })?;
        Ok(Self { point, normal })
    }

    /// Distance from `p` to the plane, signed along the normal.
    pub fn signed_distance(&self, p: Vec3<f64>) -> f64 {
        (p - self.point).dot(self.normal)
    }

    /// Mirror image of `p` across the plane.
    pub fn mirror_point(&self, p: Vec3<f64>) -> Vec3<f64> {
        p - self.normal.scale(2.0 * self.signed_distance(p))
    }

    /// Map applied to a dipole moment under mirroring: `2 n n^T - I`.
    pub fn moment_map(&self) -> Mat3 {
        Mat3::mirror_moment_map(self.normal)
    }
}

/// Physical radiator: a Hertzian dipole with complex moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleSource {
    pub position: Vec3<f64>,
    pub moment: CVec3<f64>,
}

/// One term of the image expansion: the original source (`order` 0) or a
/// mirror copy of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    /// Index into [`Scene::sources`] of the physical dipole this copies.
    pub source_index: usize,
    /// Number of reflections applied.
    pub order: usize,
    /// Reflector indices in the order applied to the source.
    pub plane_sequence: Vec<usize>,
    /// Copy position.
    pub position: Vec3<f64>,
    /// Copy moment (the source moment through [`Self::moment_map`]).
    pub moment: CVec3<f64>,
    /// Composed moment map; diagonal `+-1` for axis-aligned reflectors.
    pub moment_map: Mat3,
}

/// Sources plus reflectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub sources: Vec<DipoleSource>,
    pub planes: Vec<PecPlane>,
}

impl Scene {
    /// Validates that every source is finite, radiates, and keeps clear of
    /// every reflector.
    pub fn new(sources: Vec<DipoleSource>, planes: Vec<PecPlane>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Geometry("scene needs at least one source".into()));
        }
        for (i, s) in sources.iter().enumerate() {
            if !s.position.is_finite() || !s.moment.is_finite() {
                return Err(Error::Geometry(format!("source {i} is not finite")));
            }
            if s.moment.norm() == 0.0 {
                return Err(Error::Geometry(format!("source {i} has zero moment")));
            }
            for (p, plane) in planes.iter().enumerate() {
                if plane.signed_distance(s.position).abs() < MIN_PLANE_CLEARANCE {
                    return Err(Error::Geometry(format!(
                        "source {i} lies on reflector {p} (clearance < {MIN_PLANE_CLEARANCE} m)"
                    )));
                }
            }
        }
        Ok(Self { sources, planes })
    }

    /// Applies the reflections in `sequence` (indices into
    /// [`Self::planes`]) to a point, in order.
    pub fn apply_reflections(&self, sequence: &[usize], p: Vec3<f64>) -> Vec3<f64> {
        sequence
            .iter()
            .fold(p, |acc, &q| self.planes[q].mirror_point(acc))
    }

    /// Enumerates the original sources and every distinct image copy up to
    /// `max_order` reflections.
    ///
    /// Breadth-first over reflection sequences, skipping an immediate
    /// repeat (reflecting twice in a row in the same plane undoes itself)
    /// and merging copies that land on an already-found one with the same
    /// moment map - the corner-reflector double bounces, and foldbacks
    /// like mirror-in-0, mirror-in-1, mirror-in-0 again for perpendicular
    /// planes, which reproduces the order-1 copy.
    pub fn image_sources(&self, max_order: usize) -> Result<Vec<ImageSource>> {
        let mut accepted: Vec<ImageSource> = Vec::new();
        for (i, s) in self.sources.iter().enumerate() {
            accepted.push(ImageSource {
                source_index: i,
                order: 0,
                plane_sequence: Vec::new(),
                position: s.position,
                moment: s.moment,
                moment_map: Mat3::identity(),
            });
        }
        let mut frontier: Vec<usize> = (0..accepted.len()).collect();
        for order in 1..=max_order {
            let mut next = Vec::new();
            for &idx in &frontier {
                let parent = accepted[idx].clone();
                for q in 0..self.planes.len() {
                    if parent.plane_sequence.last() == Some(&q) {
                        continue;
                    }
                    let plane = &self.planes[q];
                    let position = plane.mirror_point(parent.position);
                    let moment_map = plane.moment_map().mul_mat(&parent.moment_map);
                    let duplicate = accepted.iter().any(|img| {
                        img.source_index == parent.source_index
                            && (img.position - position).norm() < IMAGE_DEDUP_TOL
                            && img.moment_map.max_abs_diff(&moment_map) < IMAGE_DEDUP_TOL
                    });
                    if duplicate {
                        continue;
                    }
                    let mut plane_sequence = parent.plane_sequence.clone();
                    plane_sequence.push(q);
                    let moment = moment_map.mul_cvec(self.sources[parent.source_index].moment);
                    accepted.push(ImageSource {
                        source_index: parent.source_index,
                        order,
                        plane_sequence,
                        position,
                        moment,
                        moment_map,
                    });
                    if accepted.len() > MAX_IMAGE_COUNT {
                        return Err(Error::Geometry(format!(
                            "image expansion exceeded {MAX_IMAGE_COUNT} copies at order {order}"
                        )));
                    }
                    next.push(accepted.len() - 1);
                }
            }
            frontier = next;
        }
        Ok(accepted)
    }
}

/// Composed affine map of a reflection sequence, `tau(r) = L r + t`.
///
/// Fails if the sequence names a reflector the slice does not have.
pub fn sequence_map(planes: &[PecPlane], sequence: &[usize]) -> Result<(Mat3, Vec3<f64>)> {
    let mut linear = Mat3::identity();
    let mut offset = Vec3::zero();
    for &q in sequence {
        let plane = planes.get(q).ok_or_else(|| {
            Error::Geometry(format!(
                "sequence references reflector {q}, scene has {}",
                planes.len()
            ))
        })?;
        // One mirror is affine: h(r) = r - 2 ((r - p) . n) n
        //                            = (I - 2 n n^T) r + 2 (p . n) n.
        let h = Mat3::reflection(plane.normal);
        let shift = plane.normal.scale(2.0 * plane.normal.dot(plane.point));
        linear = h.mul_mat(&linear);
        offset = h.mul_vec(offset) + shift;
    }
    Ok((linear, offset))
}

/// One distinct multipath route: the affine point map and moment map of a
/// reflection sequence, independent of any particular source.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionPath {
    /// Number of bounces (0 is the direct path).
    pub order: usize,
    /// Reflector indices in bounce order.
    pub plane_sequence: Vec<usize>,
    /// Linear part of the point map.
    pub linear: Mat3,
    /// Translation part of the point map.
    pub offset: Vec3<f64>,
    /// Composed moment map.
    pub moment_map: Mat3,
}

impl ReflectionPath {
    /// Applies the point map to `r`.
    pub fn apply(&self, r: Vec3<f64>) -> Vec3<f64> {
        self.linear.mul_vec(r) + self.offset
    }
}

/// Enumerates every distinct reflection path up to `max_order` bounces:
/// the direct path plus one entry per distinct mirror map, with the same
/// skip-immediate-repeat and merge rules as [`Scene::image_sources`]
/// (two routes with equal point and moment maps act identically on every
/// source, so only one is kept).
pub fn reflection_paths(planes: &[PecPlane], max_order: usize) -> Result<Vec<ReflectionPath>> {
    let mut accepted = vec![ReflectionPath {
        order: 0,
        plane_sequence: Vec::new(),
        linear: Mat3::identity(),
        offset: Vec3::zero(),
        moment_map: Mat3::identity(),
    }];
    let mut frontier = vec![0usize];
    for order in 1..=max_order {
        let mut next = Vec::new();
        for &idx in &frontier {
            let parent = accepted[idx].clone();
            for q in 0..planes.len() {
                if parent.plane_sequence.last() == Some(&q) {
                    continue;
                }
                let plane = &planes[q];
                let h = Mat3::reflection(plane.normal);
                let shift = plane.normal.scale(2.0 * plane.normal.dot(plane.point));
                let linear = h.mul_mat(&parent.linear);
                let offset = h.mul_vec(parent.offset) + shift;
                let moment_map = plane.moment_map().mul_mat(&parent.moment_map);
                let duplicate = accepted.iter().any(|p| {
                    p.linear.max_abs_diff(&linear) < IMAGE_DEDUP_TOL
                        && (p.offset - offset).norm() < IMAGE_DEDUP_TOL
                        && p.moment_map.max_abs_diff(&moment_map) < IMAGE_DEDUP_TOL
                });
                if duplicate {
                    continue;
                }
                let mut plane_sequence = parent.plane_sequence.clone();
                plane_sequence.push(q);
                accepted.push(ReflectionPath {
                    order,
                    plane_sequence,
                    linear,
                    offset,
                    moment_map,
                });
                if accepted.len() > MAX_IMAGE_COUNT {
                    return Err(Error::Geometry(format!(
                        "path expansion exceeded {MAX_IMAGE_COUNT} routes at order {order}"
                    )));
                }
                next.push(accepted.len() - 1);
            }
        }
        frontier = next;
    }
    Ok(accepted)
}
