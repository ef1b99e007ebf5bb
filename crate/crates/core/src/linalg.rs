//! Small numeric helpers shared across the crate: angle wrapping,
//! symmetrization, and positive-semidefiniteness repair.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

/// Wrap the components of `v` flagged in `angle_mask` into (-pi, pi].
pub fn wrap_masked(v: &mut DVector<f64>, angle_mask: &[bool]) {
    for (i, &is_angle) in angle_mask.iter().enumerate() {
        if is_angle {
            v[i] = wrap_angle(v[i]);
        }
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Jitter magnitude used when retrying a Cholesky factorization.
pub fn jitter_of(m: &DMatrix<f64>) -> f64 {
    1e-12 * m.trace().abs() / m.nrows().max(1) as f64
}

/// Cholesky factorization with the crate's repair policy: plain attempt,
/// jittered retry, then eigenvalue clamping. Returns the factorization and
/// whether a repair step was required.
pub fn cholesky_with_repair(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, bool)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, false));
    }
    let n = m.nrows();
    let jittered = m + DMatrix::identity(n, n) * jitter_of(m);
    if let Some(c) = Cholesky::new(jittered) {
        return Ok((c, true));
    }
    let repaired = clamp_psd(m);
    let jittered = &repaired + DMatrix::identity(n, n) * jitter_of(&repaired);
    match Cholesky::new(jittered) {
        Some(c) => Ok((c, true)),
        None => Err(Error::Numerical(
            "matrix not positive semidefinite after repair".into(),
        )),
    }
}

/// Symmetrize and clamp negative eigenvalues to zero.
pub fn clamp_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    symmetrize(&mut s);
    let eig = s.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Symmetrize in place, then clamp eigenvalues if the matrix has a negative
/// eigenvalue. Returns true when clamping was necessary.
pub fn repair_covariance(m: &mut DMatrix<f64>) -> bool {
    symmetrize(m);
    if min_eigenvalue(m) < 0.0 {
        *m = clamp_psd(m);
        true
    } else {
        false
    }
}

pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m).trace().sqrt()
}

/// Condition number estimate of a symmetric matrix from its eigenvalues.
pub fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    let eig = s.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a: f64, &b| a.min(b.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
