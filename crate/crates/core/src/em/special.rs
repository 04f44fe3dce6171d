//! Special functions for wave expansions: Legendre polynomials,
//! Gauss-Legendre rules, and spherical Bessel / Hankel functions.
//!
//! Conventions (time dependence `e^{+j 2 pi f t}` everywhere):
//!
//! ```text
//! h_l^(2)(x) = j_l(x) - j y_l(x)        outgoing spherical wave
//! h_0^(2)(x) = j e^{-jx} / x
//! ```
//!
//! `j_l` is evaluated by Miller's downward recurrence (stable for all
//! orders), `y_l` by upward recurrence (stable), and the two are
//! cross-checked in the tests through the Wronskian-type identity
//! `j_{l+1} y_l - j_l y_{l+1} = 1/x^2`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::RealScalar;

/// Slack accepted on the Legendre domain boundary |x| <= 1, to absorb
/// rounding in dot products of unit vectors.
const LEGENDRE_DOMAIN_SLACK: f64 = 1e-12;

/// Legendre polynomial `P_l(x)` for `|x| <= 1` (within rounding slack).
///
/// Uses the upward three-term recurrence
///
/// ```text
/// (l+1) P_{l+1}(x) = (2l+1) x P_l(x) - l P_{l-1}(x)
/// ```
pub fn legendre<T: RealScalar>(l: usize, x: T) -> Result<T> {
    let x = clamp_legendre_argument(x)?;
    let mut pm1 = T::one();
    if l == 0 {
        return Ok(pm1);
    }
    let mut p = x;
    for n in 1..l {
        let nf = T::from_usize(n).unwrap();
        let next = ((T::from_usize(2 * n + 1).unwrap() * x * p) - nf * pm1)
            / T::from_usize(n + 1).unwrap();
        pm1 = p;
        p = next;
    }
    Ok(p)
}

/// Fills `out[l] = P_l(x)` for `l = 0..out.len()-1` without domain checks;
/// intended for hot loops where `x` is a dot product of unit vectors.
pub fn legendre_sequence<T: RealScalar>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    out[0] = T::one();
    if out.len() == 1 {
        return;
    }
    out[1] = x;
    for n in 1..out.len() - 1 {
        let nf = T::from_usize(n).unwrap();
        out[n + 1] = ((T::from_usize(2 * n + 1).unwrap() * x * out[n]) - nf * out[n - 1])
            / T::from_usize(n + 1).unwrap();
    }
}

fn clamp_legendre_argument<T: RealScalar>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("legendre argument not finite: {x}")));
    }
    let one = T::one();
    let slack = T::from_f64_const(LEGENDRE_DOMAIN_SLACK);
    if x.abs() > one + slack {
        return Err(Error::Domain(format!(
            "legendre argument out of range: |{x}| > 1"
        )));
    }
    Ok(x.max(-one).min(one))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are returned in ascending order. Computed by Newton iteration on
/// `P_n` with the standard Chebyshev initial guess; weights are
/// `w_i = 2 / ((1 - x_i^2) P_n'(x_i)^2)`.
pub fn gauss_legendre<T: RealScalar>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n == 0 {
        return Err(Error::Domain("gauss_legendre needs n >= 1".into()));
    }
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::from_usize(n).unwrap();
    let half = T::from_f64_const(0.5);
    let two = T::from_f64_const(2.0);
    let tol = T::epsilon() * T::from_f64_const(4.0);

    // Roots come in +/- pairs; solve for the non-negative half and mirror.
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess for the (i+1)-th root counted from +1 downwards.
        let theta = T::PI() * (T::from_usize(i).unwrap() + T::from_f64_const(0.75))
            / (nf + half);
        let mut x = theta.cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= tol {
                break;
            }
        }
        // One clean-up iteration to settle the weight's derivative.
        let (p, dp) = legendre_with_derivative(n, x);
        x = x - p / dp;
        let w = two / ((T::one() - x * x) * dp * dp);
        // x decreases with i here; store mirrored so nodes end up ascending.
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // The middle node of an odd rule is exactly zero.
        nodes[n / 2] = T::zero();
        let (_, d) = legendre_with_derivative(n, T::zero());
        weights[n / 2] = two / (d * d);
    }
    Ok((nodes, weights))
}

/// Returns `(P_n(x), P_n'(x))` by the recurrence plus
/// `P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)`.
fn legendre_with_derivative<T: RealScalar>(n: usize, x: T) -> (T, T) {
    let mut pm1 = T::one();
    let mut p = x;
    if n == 0 {
        return (T::one(), T::zero());
    }
    for k in 1..n {
        let kf = T::from_usize(k).unwrap();
        let next = ((T::from_usize(2 * k + 1).unwrap() * x * p) - kf * pm1)
            / T::from_usize(k + 1).unwrap();
        pm1 = p;
        p = next;
    }
    let nf = T::from_usize(n).unwrap();
    let denom = x * x - T::one();
    let d = if denom.abs() > T::epsilon() {
        nf * (x * p - pm1) / denom
    } else {
        // |x| = 1: P_n'(+-1) = (+-1)^{n-1} n (n+1) / 2.
        let sign = if x > T::zero() || n % 2 == 1 {
            T::one()
        } else {
            -T::one()
        };
        sign * nf * (nf + T::one()) / T::from_f64_const(2.0)
    };
    (p, d)
}

/// Threshold and factor for the overflow guard in Miller's recurrence.
const MILLER_RESCALE_LIMIT: f64 = 1e250;

/// Spherical Bessel functions `j_l(x)` and `y_l(x)` for `l = 0..=l_max`,
/// `x > 0`.
pub fn spherical_bessel_jy<T: RealScalar>(l_max: usize, x: T) -> Result<(Vec<T>, Vec<T>)> {
    if !(x.is_finite() && x > T::zero()) {
        return Err(Error::Domain(format!(
            "spherical Bessel argument must be positive and finite, got {x}"
        )));
    }
    let j = spherical_j_miller(l_max, x);
    let y = spherical_y_upward(l_max, x);
    Ok((j, y))
}

fn spherical_j_miller<T: RealScalar>(l_max: usize, x: T) -> Vec<T> {
    let mut j = vec![T::zero(); l_max + 1];
    // Start the downward recurrence well above both l_max and the turning
    // point l ~ x: below the turning point both solutions oscillate and the
    // minimal one cannot be singled out, so the start must sit deep enough
    // in the decaying region for the contaminant to die off.
    let turning = x.to_f64().map(|v| v.ceil() as usize).unwrap_or(0);
    let base = l_max.max(turning);
    let extra = 16 + (40.0 * (base as f64 + 1.0)).sqrt().ceil() as usize;
    let start = base + extra;

    let limit = T::from_f64_const(MILLER_RESCALE_LIMIT);
    let rescale = T::one() / limit;
    let mut fp1 = T::zero(); // f_{l+1}
    let mut f = T::from_f64_const(1e-30); // f_l at l = start
    for l in (0..=start).rev() {
        if l <= l_max {
            j[l] = f;
        }
        if l == 0 {
            break;
        }
        let lf = T::from_usize(2 * l + 1).unwrap();
        let fm1 = lf / x * f - fp1;
        fp1 = f;
        f = fm1;
        if f.abs() > limit {
            fp1 = fp1 * rescale;
            f = f * rescale;
            for v in j.iter_mut() {
                *v = *v * rescale;
            }
        }
    }
    // j[0] currently holds the unnormalized f_0 (loop wrote it at l = 0).
    let j0_true = x.sin() / x;
    let j1_true = x.sin() / (x * x) - x.cos() / x;
    let scale = if l_max >= 1 && j[1].abs() > j[0].abs() {
        j1_true / j[1]
    } else if j[0].abs() > T::zero() {
        j0_true / j[0]
    } else {
        T::zero()
    };
    for v in j.iter_mut() {
        *v = *v * scale;
    }
    j[0] = j0_true;
    if l_max >= 1 {
        j[1] = j1_true;
    }
    j
}

fn spherical_y_upward<T: RealScalar>(l_max: usize, x: T) -> Vec<T> {
    let mut y = vec![T::zero(); l_max + 1];
    y[0] = -x.cos() / x;
    if l_max == 0 {
        return y;
    }
    y[1] = -x.cos() / (x * x) - x.sin() / x;
    for l in 1..l_max {
        let lf = T::from_usize(2 * l + 1).unwrap();
        y[l + 1] = lf / x * y[l] - y[l - 1];
    }
    y
}

/// Outgoing spherical Hankel function `h_l^(2)(x) = j_l(x) - j y_l(x)`.
pub fn spherical_hankel2<T: RealScalar>(l: usize, x: T) -> Result<Complex<T>> {
    let seq = spherical_hankel2_sequence(l, x)?;
    Ok(seq[l])
}

/// `h_l^(2)(x)` for all `l = 0..=l_max` at once.
pub fn spherical_hankel2_sequence<T: RealScalar>(
    l_max: usize,
    x: T,
) -> Result<Vec<Complex<T>>> {
    let (j, y) = spherical_bessel_jy(l_max, x)?;
    Ok(j.iter()
        .zip(y.iter())
        .map(|(&jj, &yy)| Complex::new(jj, -yy))
        .collect())
}
