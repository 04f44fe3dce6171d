//! Matrix-free forward operator and adjoint for the source-separation
//! least-squares problem, at one frequency.
//!
//! Unknowns are the two tangential spectrum components per quadrature
//! direction per box — `x[i, q, {theta, phi}]` — expanded on the fly to
//! Cartesian through the direction's local basis, since a radiated
//! plane-wave spectrum carries no radial component. The direct evaluation
//! of
//!
//! ```text
//! y[p, c] = sum_i (-j k / 4 pi) sum_q w_q T_L(khat_q, r_p - c_i) v[i, q, c],
//! v[i, q, .] = x[i, q, theta] theta_hat_q + x[i, q, phi] phi_hat_q
//! ```
//!
//! costs `points x boxes x directions` per apply. The fast path used here
//! rewrites the direction sum through the addition theorem: `T_L` is a
//! degree-L polynomial on the sphere, so
//!
//! ```text
//! sum_q w_q T_L(khat_q, X) x(khat_q)
//!   = sum_{l,m} 4 pi (-j)^l h_l^(2)(k|X|) conj(Y_lm(Xhat)) [sum_q w_q Y_lm(khat_q) x(khat_q)]
//! ```
//!
//! which is an *identity* for the discrete sums - finite sums reordered,
//! no added approximation - so the fast and direct routes agree to
//! rounding. The analysis sum in brackets is shared by all points
//! (`O(L^3)` per box via separated azimuth/polar passes), and the
//! per-point gather costs `O(L^2)` against cached per-pair tables:
//! associated Legendre values of the translation direction, its azimuth
//! phasor, and the radial row `-j k (-j)^l h_l^(2)(k|X|)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::em::quadrature::SphericalGrid;
use crate::em::sph_harm::{normalized_assoc_legendre_into, sh_index, sh_len, tri_index, tri_len};
use crate::em::special::spherical_hankel2_sequence;
use crate::em::translation::translation_operator;
use crate::error::{Error, Result};
use crate::forward::FieldComponent;
use crate::geometry::Vec3;
use crate::isr::SourceBox;

/// Per-(point, box) tables for the fast gather/scatter.
struct PairCache {
    /// Normalized associated Legendre values at the translation polar
    /// angle, tri-packed (`tri_index`).
    pbar: Vec<f64>,
    /// `e^{+j phi}` of the translation direction.
    e_phi: Complex64,
    /// `-j k (-j)^l h_l^(2)(k |X|)` for `l <= order`.
    wc: Vec<Complex64>,
}

/// One-frequency forward operator.
pub struct IsrOperator {
    wavenumber: f64,
    points: Vec<Vec3<f64>>,
    components: Vec<FieldComponent>,
    n_boxes: usize,
    box_centers: Vec<Vec3<f64>>,
    grid: SphericalGrid<f64>,
    order: usize,
    /// Per polar ring: tri-packed normalized associated Legendre table.
    ring_pbar: Vec<Vec<f64>>,
    /// `e^{+j 2 pi t / n_azimuth}` for `t` in `[0, n_azimuth)`.
    azimuth_table: Vec<Complex64>,
    /// Row-major `point * n_boxes + ibox`.
    pairs: Vec<PairCache>,
}

impl IsrOperator {
    /// Validates the layout and precomputes every geometry-dependent
    /// table. `separation_margin` is the clearance demanded between each
    /// sample point and each box sphere.
    pub fn new(
        wavenumber: f64,
        points: &[Vec3<f64>],
        components: &[FieldComponent],
        boxes: &[SourceBox],
        grid: SphericalGrid<f64>,
        order: usize,
        separation_margin: f64,
    ) -> Result<Self> {
        if points.is_empty() || components.is_empty() || boxes.is_empty() {
            return Err(Error::Config(
                "operator needs points, components, and boxes".into(),
            ));
        }
        if grid.order() != order {
            return Err(Error::Config(format!(
                "grid order {} does not match operator order {order}",
                grid.order()
            )));
        }
        for i in 0..boxes.len() {
            for j in (i + 1)..boxes.len() {
                let gap = (boxes[i].center - boxes[j].center).norm();
                if gap < boxes[i].radius + boxes[j].radius {
                    return Err(Error::Geometry(format!(
                        "source boxes {i} and {j} overlap ({gap:.4} m apart)"
                    )));
                }
            }
        }

        // Ring tables for analysis/synthesis over the quadrature grid.
        let mut ring_pbar = Vec::with_capacity(grid.n_polar());
        for ip in 0..grid.n_polar() {
            let ct = grid.cos_polar()[ip];
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            let mut tbl = vec![0.0; tri_len(order)];
            normalized_assoc_legendre_into(order, ct, st, &mut tbl);
            ring_pbar.push(tbl);
        }
        let n_az = grid.n_azimuth();
        let azimuth_table: Vec<Complex64> = (0..n_az)
            .map(|t| {
                Complex64::new(0.0, 2.0 * std::f64::consts::PI * t as f64 / n_az as f64).exp()
            })
            .collect();

        // Per-pair tables; parallel over points, deterministic layout.
        let pairs: Result<Vec<Vec<PairCache>>> = points
            .par_iter()
            .enumerate()
            .map(|(ipt, &p)| {
                boxes
                    .iter()
                    .enumerate()
                    .map(|(ibox, b)| {
                        let rel = p - b.center;
                        let dist = rel.norm();
                        if dist < b.radius + separation_margin {
                            return Err(Error::Geometry(format!(
                                "sample point {ipt} is {dist:.4} m from box {ibox}, \
                                 inside radius {:.4} + margin {separation_margin:.4}",
                                b.radius
                            )));
                        }
                        let x_hat = rel.scale(1.0 / dist);
                        let ct = x_hat.z;
                        let st = (x_hat.x * x_hat.x + x_hat.y * x_hat.y).sqrt();
                        let e_phi = if st > f64::EPSILON {
                            Complex64::new(x_hat.x / st, x_hat.y / st)
                        } else {
                            Complex64::new(1.0, 0.0)
                        };
                        let mut pbar = vec![0.0; tri_len(order)];
                        normalized_assoc_legendre_into(order, ct, st, &mut pbar);
                        let h = spherical_hankel2_sequence(order, wavenumber * dist)?;
                        let minus_j = Complex64::new(0.0, -1.0);
                        let mut factor = Complex64::new(0.0, -wavenumber); // -j k (-j)^l
                        let wc = h
                            .into_iter()
                            .map(|hl| {
                                let v = factor * hl;
                                factor *= minus_j;
                                v
                            })
                            .collect();
                        Ok(PairCache { pbar, e_phi, wc })
                    })
                    .collect()
            })
            .collect();
        let pairs = pairs?.into_iter().flatten().collect();

        Ok(Self {
            wavenumber,
            points: points.to_vec(),
            components: components.to_vec(),
            n_boxes: boxes.len(),
            box_centers: boxes.iter().map(|b| b.center).collect(),
            grid,
            order,
            ring_pbar,
            azimuth_table,
            pairs,
        })
    }

    /// Unknown count: `boxes * directions * 2` (tangential components).
    pub fn n_unknowns(&self) -> usize {
        self.n_boxes * self.grid.len() * 2
    }

    /// Measurement count: `points * components`.
    pub fn n_measurements(&self) -> usize {
        self.points.len() * self.components.len()
    }

    /// Quadrature grid the spectra live on.
    pub fn grid(&self) -> &SphericalGrid<f64> {
        &self.grid
    }

    /// Consumes the operator, handing the grid to the caller.
    pub fn into_grid(self) -> SphericalGrid<f64> {
        self.grid
    }

    /// `e^{+j m phi}` from the precomputed azimuth table
    /// (`phi = 2 pi ia / n_azimuth`, any sign of `m`).
    fn azimuth_phase(&self, m: isize, ia: usize) -> Complex64 {
        let n = self.azimuth_table.len() as isize;
        let t = (m * ia as isize).rem_euclid(n) as usize;
        self.azimuth_table[t]
    }

    /// Analysis of one box/component slice: `c_lm = sum_q w_q Y_lm(q) x_q`.
    fn analyze(&self, x: &[Complex64], ibox: usize, comp: usize, coeffs: &mut [Complex64]) {
        let order = self.order;
        let n_az = self.grid.n_azimuth();
        let q0 = ibox * self.grid.len();
        let n_m = 2 * order + 1;
        // Ring transforms: g[m + order] per ring, weights folded in.
        let mut ring_g = vec![Complex64::new(0.0, 0.0); self.grid.n_polar() * n_m];
        for ip in 0..self.grid.n_polar() {
            let w_ring = self.grid.polar_weights()[ip] * 2.0 * std::f64::consts::PI / n_az as f64;
            for mi in 0..n_m {
                let m = mi as isize - order as isize;
                let mut g = Complex64::new(0.0, 0.0);
                for ia in 0..n_az {
                    let q = q0 + ip * n_az + ia;
                    g += self.azimuth_phase(m, ia) * x[q * 3 + comp];
                }
                ring_g[ip * n_m + mi] = g * w_ring;
            }
        }
        // Polar contraction against the Legendre tables.
        for c in coeffs.iter_mut() {
            *c = Complex64::new(0.0, 0.0);
        }
        for ip in 0..self.grid.n_polar() {
            let pbar = &self.ring_pbar[ip];
            for m in 0..=order {
                let g_plus = ring_g[ip * n_m + (m + order)];
                let g_minus = if m > 0 {
                    ring_g[ip * n_m + (order - m)]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
                for l in m..=order {
                    let p = pbar[tri_index(l, m)];
                    coeffs[sh_index(l, m as isize)] += g_plus * p;
                    if m > 0 {
                        coeffs[sh_index(l, -(m as isize))] += g_minus * (parity * p);
                    }
                }
            }
        }
    }

    /// Translation row contraction: `sum_lm R_lm c_lm` for one pair.
    fn gather(pair: &PairCache, order: usize, coeffs: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        // m = 0.
        for l in 0..=order {
            acc += pair.wc[l] * pair.pbar[tri_index(l, 0)] * coeffs[sh_index(l, 0)];
        }
        // conj(Y_lm(Xhat)) = Pbar e^{-j m phi} for m > 0; pair up +-m.
        let mut e_minus = Complex64::new(1.0, 0.0);
        for m in 1..=order {
            e_minus *= pair.e_phi.conj();
            let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mut t_plus = Complex64::new(0.0, 0.0);
            let mut t_minus = Complex64::new(0.0, 0.0);
            for l in m..=order {
                let wp = pair.wc[l] * pair.pbar[tri_index(l, m)];
                t_plus += wp * coeffs[sh_index(l, m as isize)];
                t_minus += wp * coeffs[sh_index(l, -(m as isize))];
            }
            acc += e_minus * t_plus + e_minus.conj() * (parity * t_minus);
        }
        acc
    }

    /// Adjoint of [`Self::gather`]: `d_lm += conj(R_lm) y`.
    fn scatter(pair: &PairCache, order: usize, y: Complex64, coeffs: &mut [Complex64]) {
        for l in 0..=order {
            coeffs[sh_index(l, 0)] += pair.wc[l].conj() * pair.pbar[tri_index(l, 0)] * y;
        }
        let mut e_plus = Complex64::new(1.0, 0.0);
        for m in 1..=order {
            e_plus *= pair.e_phi;
            let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
            let z_plus = e_plus * y;
            let z_minus = e_plus.conj() * y * parity;
            for l in m..=order {
                let wp = pair.wc[l].conj() * pair.pbar[tri_index(l, m)];
                coeffs[sh_index(l, m as isize)] += wp * z_plus;
                coeffs[sh_index(l, -(m as isize))] += wp * z_minus;
            }
        }
    }

    /// Expands tangential unknowns to Cartesian grid values,
    /// `v = x_theta theta_hat + x_phi phi_hat` per (box, direction).
    fn expand_tangential(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n_q = self.grid.len();
        let mut cart = vec![Complex64::new(0.0, 0.0); self.n_boxes * n_q * 3];
        for ibox in 0..self.n_boxes {
            for q in 0..n_q {
                let t = x[(ibox * n_q + q) * 2];
                let p = x[(ibox * n_q + q) * 2 + 1];
                let th = self.grid.theta_hat()[q];
                let ph = self.grid.phi_hat()[q];
                let base = (ibox * n_q + q) * 3;
                cart[base] = t.scale(th.x) + p.scale(ph.x);
                cart[base + 1] = t.scale(th.y) + p.scale(ph.y);
                cart[base + 2] = t.scale(th.z) + p.scale(ph.z);
            }
        }
        cart
    }

    /// Adjoint of [`Self::expand_tangential`]: projects Cartesian grid
    /// values onto the tangential basis (the basis is real, so no
    /// conjugation appears).
    fn project_tangential(&self, cart: &[Complex64]) -> Vec<Complex64> {
        let n_q = self.grid.len();
        let mut x = vec![Complex64::new(0.0, 0.0); self.n_boxes * n_q * 2];
        for ibox in 0..self.n_boxes {
            for q in 0..n_q {
                let base = (ibox * n_q + q) * 3;
                let th = self.grid.theta_hat()[q];
                let ph = self.grid.phi_hat()[q];
                x[(ibox * n_q + q) * 2] =
                    cart[base].scale(th.x) + cart[base + 1].scale(th.y) + cart[base + 2].scale(th.z);
                x[(ibox * n_q + q) * 2 + 1] =
                    cart[base].scale(ph.x) + cart[base + 1].scale(ph.y) + cart[base + 2].scale(ph.z);
            }
        }
        x
    }

    /// Forward map through the fast path. `x` has length
    /// [`Self::n_unknowns`], output length [`Self::n_measurements`].
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n_unknowns());
        let cart = self.expand_tangential(x);
        let n_c = self.components.len();
        let n_sh = sh_len(self.order);

        // Stage 1: per-box, per-component spherical-harmonic analysis.
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.n_boxes * n_c * n_sh];
        coeffs
            .par_chunks_mut(n_sh)
            .enumerate()
            .for_each(|(slot, chunk)| {
                let ibox = slot / n_c;
                let comp = self.components[slot % n_c].axis();
                self.analyze(&cart, ibox, comp, chunk);
            });

        // Stage 2: per-point gather over boxes.
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_measurements()];
        y.par_chunks_mut(n_c).enumerate().for_each(|(ipt, out)| {
            for ibox in 0..self.n_boxes {
                let pair = &self.pairs[ipt * self.n_boxes + ibox];
                for (ic, slot) in out.iter_mut().enumerate() {
                    let c = &coeffs[(ibox * n_c + ic) * n_sh..(ibox * n_c + ic + 1) * n_sh];
                    *slot += Self::gather(pair, self.order, c);
                }
            }
        });
        y
    }

    /// Conjugate-transpose map through the fast path.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(y.len(), self.n_measurements());
        let n_c = self.components.len();
        let n_sh = sh_len(self.order);

        // Stage 1: per-box scatter of the measurements (loops points in
        // order, so the result does not depend on thread count).
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.n_boxes * n_c * n_sh];
        coeffs
            .par_chunks_mut(n_c * n_sh)
            .enumerate()
            .for_each(|(ibox, chunk)| {
                for ipt in 0..self.points.len() {
                    let pair = &self.pairs[ipt * self.n_boxes + ibox];
                    for ic in 0..n_c {
                        Self::scatter(
                            pair,
                            self.order,
                            y[ipt * n_c + ic],
                            &mut chunk[ic * n_sh..(ic + 1) * n_sh],
                        );
                    }
                }
            });

        // Stage 2: synthesis back onto the quadrature grid, then
        // projection onto the tangential basis.
        let mut cart = vec![Complex64::new(0.0, 0.0); self.n_boxes * self.grid.len() * 3];
        let block = self.grid.len() * 3;
        cart.par_chunks_mut(block).enumerate().for_each(|(ibox, chunk)| {
            for ic in 0..n_c {
                let comp = self.components[ic].axis();
                let c = &coeffs[(ibox * n_c + ic) * n_sh..(ibox * n_c + ic + 1) * n_sh];
                self.synthesize(c, comp, chunk);
            }
        });
        self.project_tangential(&cart)
    }

    /// Adjoint of [`Self::analyze`], writing one box's grid slice:
    /// `x_q += w_q sum_lm conj(Y_lm(q)) d_lm`.
    fn synthesize(&self, coeffs: &[Complex64], comp: usize, x: &mut [Complex64]) {
        let order = self.order;
        let n_az = self.grid.n_azimuth();
        let n_m = 2 * order + 1;
        let mut ring_s = vec![Complex64::new(0.0, 0.0); self.grid.n_polar() * n_m];
        for ip in 0..self.grid.n_polar() {
            let pbar = &self.ring_pbar[ip];
            for m in 0..=order {
                let mut s_plus = Complex64::new(0.0, 0.0);
                let mut s_minus = Complex64::new(0.0, 0.0);
                let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
                for l in m..=order {
                    let p = pbar[tri_index(l, m)];
                    s_plus += coeffs[sh_index(l, m as isize)] * p;
                    if m > 0 {
                        s_minus += coeffs[sh_index(l, -(m as isize))] * (parity * p);
                    }
                }
                ring_s[ip * n_m + (m + order)] = s_plus;
                if m > 0 {
                    ring_s[ip * n_m + (order - m)] = s_minus;
                }
            }
        }
        for ip in 0..self.grid.n_polar() {
            let w_ring = self.grid.polar_weights()[ip] * 2.0 * std::f64::consts::PI / n_az as f64;
            for ia in 0..n_az {
                let q = ip * n_az + ia;
                let mut acc = Complex64::new(0.0, 0.0);
                for mi in 0..n_m {
                    let m = mi as isize - order as isize;
                    acc += self.azimuth_phase(-m, ia) * ring_s[ip * n_m + mi];
                }
                x[q * 3 + comp] += acc * w_ring;
            }
        }
    }

    /// Forward map through the direct quadrature sum - the slow
    /// reference the fast path is tested against.
    pub fn apply_reference(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        debug_assert_eq!(x.len(), self.n_unknowns());
        let cart = self.expand_tangential(x);
        let n_c = self.components.len();
        let gamma_w: Vec<Complex64> = self
            .grid
            .weights()
            .iter()
            .map(|&w| Complex64::new(0.0, -self.wavenumber / (4.0 * std::f64::consts::PI)) * w)
            .collect();
        let boxes_per_pt = self.n_boxes;
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_measurements()];
        for (ipt, &p) in self.points.iter().enumerate() {
            for ibox in 0..boxes_per_pt {
                let center = self.box_centers[ibox];
                let t = translation_operator(
                    self.order,
                    self.wavenumber,
                    p - center,
                    self.grid.directions(),
                )?;
                for (q, tq) in t.iter().enumerate() {
                    let base = (ibox * self.grid.len() + q) * 3;
                    for ic in 0..n_c {
                        let comp = self.components[ic].axis();
                        y[ipt * n_c + ic] += gamma_w[q] * tq * cart[base + comp];
                    }
                }
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::wave::WaveContext;
    use crate::forward::{simulate_measurements, FieldComponent, SamplePlane};
    use crate::geometry::CVec3;
    use crate::isr::{dipole_spectrum, source_boxes};
    use crate::scene::{DipoleSource, Scene};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    fn small_operator(order: usize) -> IsrOperator {
        let scene = Scene::new(
            vec![
                DipoleSource {
                    position: Vec3::new(-0.08, 0.0, 0.0),
                    moment: CVec3::from_real(Vec3::unit_z()),
                },
                DipoleSource {
                    position: Vec3::new(0.09, 0.02, 0.01),
                    moment: CVec3::from_real(Vec3::unit_x()),
                },
            ],
            Vec::new(),
        )
        .unwrap();
        let boxes = source_boxes(&scene, 0, 0.03).unwrap();
        let plane = SamplePlane::new(
            Vec3::new(0.0, 0.0, 0.6),
            Vec3::new(0.0, 0.0, -1.0),
            0.5,
            0.4,
            5,
            4,
        )
        .unwrap();
        let wave = WaveContext::<f64>::new(9.0e9).unwrap();
        let grid = SphericalGrid::new(order).unwrap();
        IsrOperator::new(
            wave.wavenumber,
            &plane.points(),
            &[FieldComponent::X, FieldComponent::Z],
            &boxes,
            grid,
            order,
            0.02,
        )
        .unwrap()
    }

    #[test]
    fn fast_path_matches_direct_quadrature() {
        let op = small_operator(7);
        let x = random_complex_vec(op.n_unknowns(), 11);
        let fast = op.apply(&x);
        let direct = op.apply_reference(&x).unwrap();
        let scale: f64 = direct.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&direct) {
            assert!(
                (a - b).norm() <= 1e-12 * scale,
                "fast/direct mismatch: {a} vs {b} (scale {scale:.3e})"
            );
        }
    }

    #[test]
    fn adjoint_is_the_conjugate_transpose() {
        let op = small_operator(2);
        let n = op.n_unknowns();
        let m = op.n_measurements();
        // Dense A from forward applies of unit vectors.
        let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; m];
        for col in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[col] = Complex64::new(1.0, 0.0);
            let y = op.apply(&e);
            for row in 0..m {
                a[row][col] = y[row];
            }
        }
        // Dense A^H from adjoint applies of unit vectors.
        let mut scale: f64 = 0.0;
        for row in &a {
            for v in row {
                scale = scale.max(v.norm());
            }
        }
        for row in 0..m {
            let mut e = vec![Complex64::new(0.0, 0.0); m];
            e[row] = Complex64::new(1.0, 0.0);
            let xt = op.apply_adjoint(&e);
            for col in 0..n {
                let want = a[row][col].conj();
                assert!(
                    (xt[col] - want).norm() <= 1e-12 * scale.max(1.0),
                    "adjoint mismatch at ({row}, {col}): {} vs {want}",
                    xt[col]
                );
            }
        }
    }

    #[test]
    fn inner_product_identity_holds() {
        let op = small_operator(6);
        let x = random_complex_vec(op.n_unknowns(), 3);
        let y = random_complex_vec(op.n_measurements(), 4);
        let ax = op.apply(&x);
        let aty = op.apply_adjoint(&y);
        let lhs: Complex64 = ax.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let rhs: Complex64 = x.iter().zip(&aty).map(|(a, b)| a.conj() * b).sum();
        assert!(
            (lhs - rhs).norm() <= 1e-10 * lhs.norm().max(rhs.norm()),
            "<Ax, y> = {lhs} but <x, A^H y> = {rhs}"
        );
    }

    #[test]
    fn centered_dipole_spectrum_reproduces_the_exact_field() {
        // A dipole at a box center is exactly representable: its spectrum
        // is degree 2, within the quadrature design degree, with no
        // offset phase to truncate.
        let source = DipoleSource {
            position: Vec3::new(0.04, -0.02, 0.01),
            moment: CVec3::from_arrays([0.5e-3, 0.0, 1.0e-3], [0.0, 0.2e-3, 0.0]),
        };
        let scene = Scene::new(vec![source], Vec::new()).unwrap();
        let boxes = source_boxes(&scene, 0, 0.02).unwrap();
        let plane = SamplePlane::new(
            Vec3::new(0.0, 0.0, 0.5),
            Vec3::new(0.0, 0.0, -1.0),
            0.4,
            0.3,
            6,
            5,
        )
        .unwrap();
        let wave = WaveContext::<f64>::new(10.0e9).unwrap();
        let order = 12;
        let grid = SphericalGrid::new(order).unwrap();
        let op = IsrOperator::new(
            wave.wavenumber,
            &plane.points(),
            &FieldComponent::ALL,
            &boxes,
            grid,
            order,
            0.02,
        )
        .unwrap();
        let x = dipole_spectrum(
            &wave,
            boxes[0].center,
            source.position,
            source.moment,
            op.grid(),
        );
        let y = op.apply(&x);
        let truth = simulate_measurements(&scene, 0, &plane, &[10.0e9], &FieldComponent::ALL)
            .unwrap();
        let scale: f64 = truth.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (got, want) in y.iter().zip(&truth.values) {
            assert!(
                (got - want).norm() <= 1e-10 * scale,
                "centered dipole not exact: {got} vs {want}"
            );
        }
    }

    #[test]
    fn offcenter_dipole_is_accurate_to_the_truncation_target() {
        let center = Vec3::new(0.0, 0.0, 0.0);
        let source = DipoleSource {
            // Offset half the radius from the box center.
            position: Vec3::new(0.01, -0.005, 0.008),
            moment: CVec3::from_real(Vec3::new(0.0, 0.8e-3, 1.0e-3)),
        };
        let scene = Scene::new(vec![source], Vec::new()).unwrap();
        let radius = 0.025;
        let plane = SamplePlane::new(
            Vec3::new(0.0, 0.0, 0.45),
            Vec3::new(0.0, 0.0, -1.0),
            0.5,
            0.4,
            7,
            6,
        )
        .unwrap();
        let wave = WaveContext::<f64>::new(10.0e9).unwrap();
        let order =
            crate::em::translation::translation_order(wave.wavenumber, 2.0 * radius, 3.0).unwrap();
        let grid = SphericalGrid::new(order).unwrap();
        let boxes = vec![SourceBox {
            center,
            radius,
            source_index: 0,
            order: 0,
            plane_sequence: Vec::new(),
            moment_map: crate::geometry::Mat3::identity(),
        }];
        let op = IsrOperator::new(
            wave.wavenumber,
            &plane.points(),
            &FieldComponent::ALL,
            &boxes,
            grid,
            order,
            0.02,
        )
        .unwrap();
        let x = dipole_spectrum(&wave, center, source.position, source.moment, op.grid());
        let y = op.apply(&x);
        let truth = simulate_measurements(&scene, 0, &plane, &[10.0e9], &FieldComponent::ALL)
            .unwrap();
        let scale: f64 = truth.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let err: f64 = y
            .iter()
            .zip(&truth.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(
            err <= 1e-2 * scale,
            "off-center dipole error {:.3e} above truncation target",
            err / scale
        );
    }

    #[test]
    fn crowded_sample_point_is_rejected() {
        let scene = Scene::new(
            vec![DipoleSource {
                position: Vec3::zero(),
                moment: CVec3::from_real(Vec3::unit_z()),
            }],
            Vec::new(),
        )
        .unwrap();
        let boxes = source_boxes(&scene, 0, 0.05).unwrap();
        let plane = SamplePlane::new(
            Vec3::new(0.0, 0.0, 0.06),
            Vec3::new(0.0, 0.0, -1.0),
            0.2,
            0.2,
            3,
            3,
        )
        .unwrap();
        let grid = SphericalGrid::new(4).unwrap();
        let err = IsrOperator::new(
            2.0,
            &plane.points(),
            &FieldComponent::ALL,
            &boxes,
            grid,
            4,
            0.02,
        );
        assert!(matches!(err, Err(Error::Geometry(_))));
    }
}
