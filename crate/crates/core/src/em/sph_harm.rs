//! Scalar spherical harmonics with orthonormal normalization.
//!
//! `Y_lm(theta, phi) = Pbar_l^m(cos theta) e^{j m phi}` where `Pbar` is the
//! fully normalized associated Legendre function (Condon-Shortley phase
//! included), so that
//!
//! ```text
//! integral over the sphere of Y_lm conj(Y_l'm') = delta_ll' delta_mm'
//! sum_m Y_lm(a) conj(Y_lm(b)) = (2l+1)/(4 pi) P_l(a . b)   (addition theorem)
//! ```
//!
//! The degree-L translation operator is a polynomial of degree L on the
//! sphere, so expanding it in this basis is exact; the solver's fast path
//! relies on that together with the quadrature's `2L + 1` design degree.

use num_complex::Complex;

use crate::geometry::Vec3;
use crate::scalar::RealScalar;

/// Number of `(l, m)` pairs with `l <= l_max` (full basis, both signs of m).
pub fn sh_len(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Packed index of `(l, m)` with `-l <= m <= l`: `l^2 + l + m`.
pub fn sh_index(l: usize, m: isize) -> usize {
    ((l * l + l) as isize + m) as usize
}

/// Number of `(l, m)` pairs with `0 <= m <= l <= l_max`.
pub fn tri_len(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 2) / 2
}

/// Packed index for the non-negative-m triangle: `l (l+1) / 2 + m`.
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fills `out[tri_index(l, m)] = Pbar_l^m(cos_theta)` for all
/// `0 <= m <= l <= l_max`. `sin_theta` must be the non-negative sine
/// matching `cos_theta`. `out` must have length `tri_len(l_max)`.
pub fn normalized_assoc_legendre_into<T: RealScalar>(
    l_max: usize,
    cos_theta: T,
    sin_theta: T,
    out: &mut [T],
) {
    debug_assert_eq!(out.len(), tri_len(l_max));
    let four_pi = T::from_f64_const(4.0) * T::PI();
    out[0] = (T::one() / four_pi).sqrt();
    if l_max == 0 {
        return;
    }
    // Diagonal: Pbar_mm = -sqrt((2m+1)/(2m)) sin(theta) Pbar_{m-1,m-1}.
    for m in 1..=l_max {
        let mf = T::from_usize(m).unwrap();
        let factor = -((T::from_f64_const(2.0) * mf + T::one())
            / (T::from_f64_const(2.0) * mf))
        .sqrt();
        out[tri_index(m, m)] = factor * sin_theta * out[tri_index(m - 1, m - 1)];
    }
    // First off-diagonal: Pbar_{m+1,m} = sqrt(2m+3) cos(theta) Pbar_mm.
    for m in 0..l_max {
        let f = T::from_usize(2 * m + 3).unwrap().sqrt();
        out[tri_index(m + 1, m)] = f * cos_theta * out[tri_index(m, m)];
    }
    // Upward in l for fixed m.
    for m in 0..=l_max {
        for l in (m + 2)..=l_max {
            let lf = T::from_usize(l).unwrap();
            let mf = T::from_usize(m).unwrap();
            let a = ((T::from_f64_const(4.0) * lf * lf - T::one())
                / (lf * lf - mf * mf))
            .sqrt();
            let lm1 = lf - T::one();
            let b = ((lm1 * lm1 - mf * mf)
                / (T::from_f64_const(4.0) * lm1 * lm1 - T::one()))
            .sqrt();
            out[tri_index(l, m)] = a
                * (cos_theta * out[tri_index(l - 1, m)] - b * out[tri_index(l - 2, m)]);
        }
    }
}

/// Evaluates `Y_lm(dir)` for all `l <= l_max`, packed by [`sh_index`].
/// `dir` must be a unit vector.
pub fn spherical_harmonics<T: RealScalar>(l_max: usize, dir: Vec3<T>) -> Vec<Complex<T>> {
    let ct = dir.z;
    let st = (dir.x * dir.x + dir.y * dir.y).sqrt();
    // Azimuth phasor; arbitrary at the poles where m != 0 terms vanish.
    let e_phi = if st > T::epsilon() {
        Complex::new(dir.x / st, dir.y / st)
    } else {
        Complex::new(T::one(), T::zero())
    };

    let mut pbar = vec![T::zero(); tri_len(l_max)];
    normalized_assoc_legendre_into(l_max, ct, st, &mut pbar);

    let mut out = vec![Complex::new(T::zero(), T::zero()); sh_len(l_max)];
    let mut phase = Complex::new(T::one(), T::zero()); // e^{j m phi}
    for m in 0..=l_max {
        for l in m..=l_max {
            let v = phase.scale(pbar[tri_index(l, m)]);
            out[sh_index(l, m as isize)] = v;
            if m > 0 {
                // Y_{l,-m} = (-1)^m conj(Y_{l,m}).
                let sign = if m % 2 == 0 { T::one() } else { -T::one() };
                out[sh_index(l, -(m as isize))] = v.conj().scale(sign);
            }
        }
        phase = phase * e_phi;
    }
    out
}
