//! Conjugate gradients on the normal equations (CGLS), with optional
//! Tikhonov damping.
//!
//! Solves `min_x ||A x - b||^2 + lambda^2 ||x||^2` using only
//! forward/adjoint applies. Starting from zero keeps every iterate in
//! the row space of `A`, so the converged answer is the minimum-norm
//! least-squares solution when the system is underdetermined. The
//! normal-equation residual `||A^H r - lambda^2 x||` decreases
//! monotonically in exact arithmetic and is the stopping quantity.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::isr::IsrOperator;

/// Converged (or capped) CGLS state.
pub struct CglsOutcome {
    pub solution: Vec<Complex64>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` recomputed from the final iterate (not the
    /// recurrence residual, which can drift over many iterations).
    pub relative_residual: f64,
    /// `||A^H r - lambda^2 x|| / ||A^H b||` after each iteration.
    pub normal_residual_history: Vec<f64>,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Runs CGLS until the relative normal residual drops below `tolerance`
/// or `max_iterations` is hit. `tikhonov` is the damping weight
/// `lambda` (0 disables). Fails with [`Error::Numerical`] if the
/// iteration produces non-finite values.
pub fn cgls(
    op: &IsrOperator,
    b: &[Complex64],
    tolerance: f64,
    max_iterations: usize,
    tikhonov: f64,
) -> Result<CglsOutcome> {
    if b.len() != op.n_measurements() {
        return Err(Error::GridMismatch(format!(
            "right-hand side has {} entries, operator expects {}",
            b.len(),
            op.n_measurements()
        )));
    }
    let n = op.n_unknowns();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        // Zero data: the minimum-norm answer is zero, no iterations.
        return Ok(CglsOutcome {
            solution: vec![Complex64::new(0.0, 0.0); n],
            iterations: 0,
            relative_residual: 0.0,
            normal_residual_history: Vec::new(),
        });
    }
    let lambda_sqr = tikhonov * tikhonov;

    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut r = b.to_vec(); // b - A x, x = 0
    let mut s = op.apply_adjoint(&r); // A^H r - lambda^2 x, x = 0
    let s0_norm = norm(&s);
    if s0_norm == 0.0 {
        // b is orthogonal to the range of A; nothing to recover.
        return Ok(CglsOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 1.0,
            normal_residual_history: Vec::new(),
        });
    }
    let mut p = s.clone();
    let mut gamma = norm_sqr(&s);
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iterations {
        let q = op.apply(&p);
        let delta = norm_sqr(&q) + lambda_sqr * norm_sqr(&p);
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Numerical(format!(
                "CGLS search direction degenerated (delta = {delta})"
            )));
        }
        let alpha = gamma / delta;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += pi.scale(alpha);
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= qi.scale(alpha);
        }
        s = op.apply_adjoint(&r);
        if lambda_sqr > 0.0 {
            for (si, xi) in s.iter_mut().zip(&x) {
                *si -= xi.scale(lambda_sqr);
            }
        }
        let gamma_next = norm_sqr(&s);
        if !gamma_next.is_finite() {
            return Err(Error::Numerical("CGLS normal residual went non-finite".into()));
        }
        iterations += 1;
        let rel_normal = gamma_next.sqrt() / s0_norm;
        history.push(rel_normal);
        if rel_normal <= tolerance {
            break;
        }
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + pi.scale(beta);
        }
    }

    let final_residual: f64 = op
        .apply(&x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| (ax - bi).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(CglsOutcome {
        relative_residual: final_residual / b_norm,
        solution: x,
        iterations,
        normal_residual_history: history,
    })
}
