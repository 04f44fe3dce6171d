//! Far-field translation operator and its truncation rule.
//!
//! For a translation vector `X` and truncation degree `L`,
//!
//! ```text
//! T_L(khat, X) = sum_{l=0}^{L} (-j)^l (2l+1) h_l^(2)(k |X|) P_l(khat . Xhat)
//! ```
//!
//! diagonalizes the outgoing Green's function over plane-wave spectra:
//! integrating `T_L(khat, X) e^{-j k khat . d}` over the unit sphere with
//! the prefactor `-j k / (4 pi)` reproduces `e^{-j k |X + d|} / |X + d|`
//! whenever `|d|` stays well inside `|X|`. The truncation rule below keeps
//! the relative error of that reproduction under about `1e-3` for
//! `|d| <= 0.3 |X|` via the excess-bandwidth formula.

use num_complex::Complex;

use crate::em::special::{legendre_sequence, spherical_hankel2_sequence};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::RealScalar;

/// Truncation degree for a source region of diameter `diameter` at
/// wavenumber `k`, with `digits` controlling the excess bandwidth
/// (`digits = 3` targets ~3 correct digits):
///
/// ```text
/// L = ceil( kd/2 sqrt(3) + 1.8 digits^(2/3) (kd/2 sqrt(3))^(1/3) )
/// ```
pub fn translation_order<T: RealScalar>(wavenumber: T, diameter: T, digits: T) -> Result<usize> {
    if !(wavenumber.is_finite() && wavenumber > T::zero()) {
        return Err(Error::Domain(format!(
            "wavenumber must be positive, got {wavenumber}"
        )));
    }
    if !(diameter.is_finite() && diameter > T::zero()) {
        return Err(Error::Domain(format!(
            "diameter must be positive, got {diameter}"
        )));
    }
    if !(digits.is_finite() && digits > T::zero()) {
        return Err(Error::Domain(format!("digits must be positive, got {digits}")));
    }
    let base = wavenumber * diameter / T::from_f64_const(2.0) * T::from_f64_const(3.0).sqrt();
    let excess = T::from_f64_const(1.8)
        * digits.powf(T::from_f64_const(2.0 / 3.0))
        * base.cbrt();
    let order = (base + excess).ceil();
    order
        .to_usize()
        .ok_or_else(|| Error::Numerical(format!("translation order overflow: {order}")))
}

/// Radial part of the translation operator: coefficient of `P_l` for each
/// `l <= order`, i.e. `(-j)^l (2l+1) h_l^(2)(k |X|)`.
pub fn translation_coefficients<T: RealScalar>(
    order: usize,
    wavenumber: T,
    distance: T,
) -> Result<Vec<Complex<T>>> {
    if !(distance.is_finite() && distance > T::zero()) {
        return Err(Error::Singularity(format!(
            "translation distance must be positive, got {distance}"
        )));
    }
    let hankel = spherical_hankel2_sequence(order, wavenumber * distance)?;
    let mut out = Vec::with_capacity(order + 1);
    let mut minus_j_pow = Complex::new(T::one(), T::zero());
    let minus_j = Complex::new(T::zero(), -T::one());
    for (l, h) in hankel.into_iter().enumerate() {
        let weight = T::from_usize(2 * l + 1).unwrap();
        out.push(minus_j_pow * h.scale(weight));
        minus_j_pow = minus_j_pow * minus_j;
        let _ = l;
    }
    Ok(out)
}

/// Evaluates `T_L(khat, X)` for every direction in `directions`.
/// `directions` must hold unit vectors; `translation` must be nonzero.
pub fn translation_operator<T: RealScalar>(
    order: usize,
    wavenumber: T,
    translation: Vec3<T>,
    directions: &[Vec3<T>],
) -> Result<Vec<Complex<T>>> {
    let distance = translation.norm();
    let coeffs = translation_coefficients(order, wavenumber, distance)?;
    let x_hat = translation.scale(T::one() / distance);
    let mut legendre = vec![T::zero(); order + 1];
    let mut out = Vec::with_capacity(directions.len());
    for &khat in directions {
        let mut cos_gamma = khat.dot(x_hat);
        // Unit-vector dot products can drift just past +-1 in floating point.
        if cos_gamma > T::one() {
            cos_gamma = T::one();
        } else if cos_gamma < -T::one() {
            cos_gamma = -T::one();
        }
        legendre_sequence(cos_gamma, &mut legendre);
        let mut acc = Complex::new(T::zero(), T::zero());
        for (c, p) in coeffs.iter().zip(legendre.iter()) {
            acc += c.scale(*p);
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::quadrature::SphericalGrid;
    use crate::em::special::{spherical_bessel_jy, spherical_hankel2_sequence};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    /// Gegenbauer partial sum for e^{-j k |X + d|} / |X + d|: with
    /// cos(gamma) = dhat . Xhat and d < X,
    ///
    ///   -j k sum_l (-1)^l (2l+1) j_l(k d) h_l^(2)(k X) P_l(cos gamma)
    ///
    /// Independent route to the same kernel: no quadrature involved.
    fn gegenbauer_sum(order: usize, k: f64, x: Vec3<f64>, d: Vec3<f64>) -> Complex64 {
        let xn = x.norm();
        let dn = d.norm();
        let cos_gamma = if dn > 0.0 {
            (d.dot(x) / (dn * xn)).clamp(-1.0, 1.0)
        } else {
            1.0
        };
        let (j, _) = spherical_bessel_jy(order, k * dn.max(1e-300)).unwrap();
        let h = spherical_hankel2_sequence(order, k * xn).unwrap();
        let mut p = vec![0.0; order + 1];
        legendre_sequence(cos_gamma, &mut p);
        let mut sum = Complex64::new(0.0, 0.0);
        for l in 0..=order {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            let jl = if dn > 0.0 {
                j[l]
            } else if l == 0 {
                1.0
            } else {
                0.0
            };
            sum += h[l].scale(sign * (2.0 * l as f64 + 1.0) * jl * p[l]);
        }
        Complex64::new(0.0, -k) * sum
    }

    /// Quadrature route: (-j k / 4 pi) sum_q w_q T_L(khat_q, X) e^{-j k khat_q . d}.
    fn factorized_kernel(order: usize, k: f64, x: Vec3<f64>, d: Vec3<f64>) -> Complex64 {
        let grid = SphericalGrid::<f64>::new(order).unwrap();
        let t = translation_operator(order, k, x, grid.directions()).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        for (q, &w) in grid.weights().iter().enumerate() {
            let khat = grid.directions()[q];
            let phase = Complex64::new(0.0, -k * khat.dot(d)).exp();
            acc += t[q] * phase * w;
        }
        acc * Complex64::new(0.0, -k / (4.0 * std::f64::consts::PI))
    }

    fn exact_kernel(k: f64, x: Vec3<f64>, d: Vec3<f64>) -> Complex64 {
        let r = (x + d).norm();
        Complex64::new(0.0, -k * r).exp() / r
    }

    #[test]
    fn order_rule_matches_hand_computed_values() {
        // L = ceil(s + 1.8 d0^(2/3) s^(1/3)), s = (kd/2) sqrt(3).
        let k = 2.0 * std::f64::consts::PI * 10.0e9 / 299_792_458.0;
        let d = 0.06;
        let s = k * d / 2.0 * 3.0f64.sqrt();
        let want = (s + 1.8 * 3.0f64.powf(2.0 / 3.0) * s.cbrt()).ceil() as usize;
        assert_eq!(translation_order(k, d, 3.0).unwrap(), want);
        // Monotone in each argument.
        assert!(translation_order(2.0 * k, d, 3.0).unwrap() > want);
        assert!(translation_order(k, 2.0 * d, 3.0).unwrap() > want);
        assert!(translation_order(k, d, 6.0).unwrap() > want);
        assert!(translation_order(0.0, d, 3.0).is_err());
        assert!(translation_order(k, -1.0, 3.0).is_err());
    }

    #[test]
    fn coefficients_match_definition() {
        let k = 400.0;
        let r = 0.75;
        let coeffs = translation_coefficients(6, k, r).unwrap();
        let h = spherical_hankel2_sequence(6, k * r).unwrap();
        let minus_j = Complex64::new(0.0, -1.0);
        for l in 0..=6usize {
            let want = minus_j.powu(l as u32) * h[l].scale(2.0 * l as f64 + 1.0);
            assert_relative_eq!(coeffs[l].re, want.re, max_relative = 1e-13);
            assert_relative_eq!(coeffs[l].im, want.im, max_relative = 1e-13);
        }
        assert!(translation_coefficients(6, k, 0.0).is_err());
    }

    #[test]
    fn operator_equals_gegenbauer_series_route() {
        // Same series evaluated two ways: via P_l of the dot product per
        // direction (operator) and via the closed partial sum with d
        // collinear to khat. Checking T itself: set d = |d| khat so the
        // plane-wave factor is constant, then both routes share the series.
        let k = 300.0;
        let x = Vec3::new(0.4, -0.2, 0.9);
        let order = 24;
        let dirs: [Vec3<f64>; 3] = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 0.0).normalized().unwrap(),
            Vec3::new(-0.5, 0.7, 0.3).normalized().unwrap(),
        ];
        let t = translation_operator(order, k, x, &dirs).unwrap();
        let h = spherical_hankel2_sequence(order, k * x.norm()).unwrap();
        let x_hat = x.normalized().unwrap();
        let minus_j = Complex64::new(0.0, -1.0);
        for (i, &khat) in dirs.iter().enumerate() {
            let mut p = vec![0.0; order + 1];
            legendre_sequence(khat.dot(x_hat).clamp(-1.0f64, 1.0), &mut p);
            let mut want = Complex64::new(0.0, 0.0);
            for l in 0..=order {
                want += minus_j.powu(l as u32) * h[l].scale((2.0 * l as f64 + 1.0) * p[l]);
            }
            assert_relative_eq!(t[i].re, want.re, max_relative = 1e-12);
            assert_relative_eq!(t[i].im, want.im, max_relative = 1e-12);
        }
    }

    #[test]
    fn factorization_reproduces_greens_kernel() {
        // The quadrature route must reproduce e^{-jk|X+d|}/|X+d| to better
        // than 1e-3 relative for |d| <= 0.3 |X| at the rule's order, and
        // must agree with the Gegenbauer partial sum far more tightly:
        // the routes share the truncation, and the leftover difference is
        // the plane-wave tail beyond degree L+1 aliased by the quadrature,
        // which the excess-bandwidth margin keeps orders below the target.
        let x = Vec3::new(0.0, 0.1, 1.0);
        let xn = x.norm();
        let d_hat = Vec3::new(0.6, -0.3, 0.74).normalized().unwrap();
        for &kd in &[2.0, 5.0, 10.0, 20.0] {
            for &ratio in &[0.15, 0.3] {
                let dn = ratio * xn;
                let d = d_hat.scale(dn);
                let k = kd / dn; // so k |d| = kd
                let order = translation_order(k, 2.0 * dn, 3.0).unwrap();
                let got = factorized_kernel(order, k, x, d);
                let series = gegenbauer_sum(order, k, x, d);
                let exact = exact_kernel(k, x, d);
                let quad_vs_series = (got - series).norm() / series.norm();
                assert!(
                    quad_vs_series < 1e-5,
                    "quadrature and series routes disagree: {quad_vs_series:.3e} at kd={kd}, ratio={ratio}"
                );
                let rel = (got - exact).norm() / exact.norm();
                assert!(
                    rel < 1e-3,
                    "factorization error {rel:.3e} at kd={kd}, ratio={ratio}, order={order}"
                );
            }
        }
    }

    #[test]
    fn factorization_error_decreases_with_order() {
        // k|d| ~ 19.4 puts the minimal bandwidth at (kd/2) sqrt(3) ~ 16.8;
        // orders sweeping past it must converge superalgebraically.
        let k = 500.0;
        let x = Vec3::new(0.2, 0.0, 1.1);
        let d = Vec3::new(0.03, 0.02, -0.015);
        let exact = exact_kernel(k, x, d);
        let errs: Vec<f64> = [20usize, 26, 34]
            .iter()
            .map(|&order| {
                let got = factorized_kernel(order, k, x, d);
                (got - exact).norm() / exact.norm()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "errors not decreasing: {errs:?}");
        assert!(errs[2] < 1e-6, "converged error too large: {:.3e}", errs[2]);
    }

    #[test]
    fn zero_translation_is_rejected() {
        let dirs = [Vec3::new(0.0, 0.0, 1.0)];
        assert!(translation_operator(4, 100.0, Vec3::zero(), &dirs).is_err());
    }
}
