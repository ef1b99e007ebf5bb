//! Moment transforms: given a Gaussian prior and a nonlinear measurement
//! model, compute the predicted measurement mean, the innovation covariance
//! and the state-measurement cross covariance.
//!
//! Four routes are provided: first-order linearization, the scaled unscented
//! transform, the third-degree spherical-radial cubature rule, and the
//! randomized stochastic integration rule whose iteration average converges
//! to the exact Gaussian-weighted integrals.
//!
//! All point-based transforms accumulate measurement statistics in residual
//! space about h(prior mean), with angle components wrapped per residual, so
//! that angular measurements straddling the +-pi cut average correctly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_repair, repair_covariance, symmetrize, wrap_angle, wrap_masked};
use crate::models::{GaussianDensity, MeasurementModel};

/// Weighted point set approximating a Gaussian density.
#[derive(Debug, Clone)]
pub struct SigmaPointSet {
    pub points: Vec<DVector<f64>>,
    pub weights_mean: Vec<f64>,
    pub weights_cov: Vec<f64>,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One random draw of the stochastic spherical-radial rule: a Haar-random
/// rotation and a chi-distributed radius.
#[derive(Debug, Clone)]
pub struct SifRuleDraw {
    pub rotation: DMatrix<f64>,
    pub radius: f64,
}

/// Output of a moment transform.
#[derive(Debug, Clone)]
pub struct TransformResult {
    pub z_mean: DVector<f64>,
    pub cov_zz: DMatrix<f64>,
    pub cov_xz: DMatrix<f64>,
}

/// First-order linearization about the prior mean.
pub fn transform_linearize(
    model: &MeasurementModel,
    prior: &GaussianDensity,
) -> Result<TransformResult> {
    let z_mean = model.evaluate(prior.mean())?;
    let jac = model.jacobian_at(prior.mean())?;
    let mut cov_zz = &jac * prior.cov() * jac.transpose() + &model.noise;
    symmetrize(&mut cov_zz);
    let cov_xz = prior.cov() * jac.transpose();
    Ok(TransformResult { z_mean, cov_zz, cov_xz })
}

/// Scaled unscented transform sigma points (2n+1 points).
pub fn unscented_points(
    prior: &GaussianDensity,
    alpha: f64,
    beta: f64,
    kappa: f64,
) -> Result<SigmaPointSet> {
    let n = prior.dim();
    let nf = n as f64;
    if (nf + kappa) * alpha * alpha <= 0.0 {
        return Err(Error::InvalidArgument(
            "unscented parameters require (n + kappa) * alpha^2 > 0".into(),
        ));
    }
    let lambda = alpha * alpha * (nf + kappa) - nf;
    let (chol, _) = cholesky_with_repair(prior.cov())?;
    let l = chol.l();
    let scale = (nf + lambda).sqrt();

    let mut points = Vec::with_capacity(2 * n + 1);
    let mut weights_mean = Vec::with_capacity(2 * n + 1);
    let mut weights_cov = Vec::with_capacity(2 * n + 1);
    points.push(prior.mean().clone());
    weights_mean.push(lambda / (nf + lambda));
    weights_cov.push(lambda / (nf + lambda) + (1.0 - alpha * alpha + beta));
    let wi = 1.0 / (2.0 * (nf + lambda));
    for i in 0..n {
        let col = l.column(i) * scale;
        points.push(prior.mean() + &col);
        points.push(prior.mean() - &col);
        weights_mean.push(wi);
        weights_mean.push(wi);
        weights_cov.push(wi);
        weights_cov.push(wi);
    }
    Ok(SigmaPointSet { points, weights_mean, weights_cov })
}

/// Third-degree spherical-radial cubature points (2n points, equal weights).
pub fn cubature_points(prior: &GaussianDensity) -> Result<SigmaPointSet> {
    let n = prior.dim();
    let nf = n as f64;
    let (chol, _) = cholesky_with_repair(prior.cov())?;
    let l = chol.l();
    let w = 1.0 / (2.0 * nf);
    let mut points = Vec::with_capacity(2 * n);
    for i in 0..n {
        let col = l.column(i) * nf.sqrt();
        points.push(prior.mean() + &col);
        points.push(prior.mean() - &col);
    }
    Ok(SigmaPointSet {
        points,
        weights_mean: vec![w; 2 * n],
        weights_cov: vec![w; 2 * n],
    })
}

/// Evaluate the three moment integrals on an explicit point set.
pub fn points_transform(
    model: &MeasurementModel,
    prior: &GaussianDensity,
    points: &SigmaPointSet,
) -> Result<TransformResult> {
    let n = prior.dim();
    if points.points.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidArgument(
            "sigma point dimension does not match prior".into(),
        ));
    }
    let z0 = model.evaluate(prior.mean())?;
    let n_z = z0.len();

    // Residuals about h(mean), wrapped on angle components.
    let mut residuals = Vec::with_capacity(points.len());
    for p in &points.points {
        let z = model.evaluate(p)?;
        let mut d = z - &z0;
        for (i, &is_angle) in model.angle_mask.iter().enumerate() {
            if is_angle {
                d[i] = wrap_angle(d[i]);
            }
        }
        residuals.push(d);
    }

    let mut d_mean = DVector::zeros(n_z);
    for (d, &w) in residuals.iter().zip(&points.weights_mean) {
        d_mean += d * w;
    }
    let mut cov_zz = DMatrix::zeros(n_z, n_z);
    let mut cov_xz = DMatrix::zeros(n, n_z);
    for ((d, p), &w) in residuals.iter().zip(&points.points).zip(&points.weights_cov) {
        let dc = d - &d_mean;
        cov_zz += &dc * dc.transpose() * w;
        cov_xz += (p - prior.mean()) * dc.transpose() * w;
    }
    cov_zz += &model.noise;
    symmetrize(&mut cov_zz);

    let mut z_mean = z0 + d_mean;
    wrap_masked(&mut z_mean, &model.angle_mask);
    Ok(TransformResult { z_mean, cov_zz, cov_xz })
}

/// Draw the random parameters of one stochastic rule iteration: rotation via
/// QR orthogonalization of a standard-normal matrix, radius from chi(n+2).
pub fn draw_sif_rule<R: Rng>(n: usize, rng: &mut R) -> SifRuleDraw {
    let gauss = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix signs so the distribution is Haar over the orthogonal group.
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for row in 0..n {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    let chi2 = ChiSquared::new((n + 2) as f64).expect("valid dof");
    let radius = chi2.sample(rng).sqrt();
    SifRuleDraw { rotation: q, radius }
}

/// Point set of one stochastic rule iteration: {mean} plus mean +- rho L Q e_i
/// with weights w0 = 1 - n/rho^2 and wi = 1/(2 rho^2).
pub fn sif_rule_points(
    prior: &GaussianDensity,
    chol_l: &DMatrix<f64>,
    draw: &SifRuleDraw,
) -> SigmaPointSet {
    let n = prior.dim();
    let nf = n as f64;
    let rho = draw.radius;
    let w0 = 1.0 - nf / (rho * rho);
    let wi = 1.0 / (2.0 * rho * rho);
    let directions = chol_l * &draw.rotation;
    let mut points = Vec::with_capacity(2 * n + 1);
    let mut weights = Vec::with_capacity(2 * n + 1);
    points.push(prior.mean().clone());
    weights.push(w0);
    for i in 0..n {
        let col = directions.column(i) * rho;
        points.push(prior.mean() + &col);
        points.push(prior.mean() - &col);
        weights.push(wi);
        weights.push(wi);
    }
    SigmaPointSet { points, weights_mean: weights.clone(), weights_cov: weights }
}

/// Stochastic integration transform: average of `iterations` randomized
/// third-degree spherical-radial rule evaluations.
pub fn sif_transform<R: Rng>(
    model: &MeasurementModel,
    prior: &GaussianDensity,
    iterations: usize,
    rng: &mut R,
) -> Result<TransformResult> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    let n = prior.dim();
    let (chol, _) = cholesky_with_repair(prior.cov())?;
    let l: DMatrix<f64> = chol.l();
    let z0 = model.evaluate(prior.mean())?;
    let n_z = z0.len();

    // Running means of the residual-space integrands:
    //   i1 = E[d], i2 = E[d d^T], i3 = E[(x - mean) d^T], d = wrap(h(x) - h(mean)).
    let mut i1 = DVector::zeros(n_z);
    let mut i2 = DMatrix::zeros(n_z, n_z);
    let mut i3 = DMatrix::zeros(n, n_z);

    for m in 1..=iterations {
        let draw = draw_sif_rule(n, rng);
        let set = sif_rule_points(prior, &l, &draw);
        let mut s1 = DVector::zeros(n_z);
        let mut s2 = DMatrix::zeros(n_z, n_z);
        let mut s3 = DMatrix::zeros(n, n_z);
        for (p, &w) in set.points.iter().zip(&set.weights_mean) {
            let z = model.evaluate(p)?;
            let mut d = z - &z0;
            for (i, &is_angle) in model.angle_mask.iter().enumerate() {
                if is_angle {
                    d[i] = wrap_angle(d[i]);
                }
            }
            s1 += &d * w;
            s2 += &d * d.transpose() * w;
            s3 += (p - prior.mean()) * d.transpose() * w;
        }
        let mf = m as f64;
        i1 += (s1 - &i1) / mf;
        i2 += (s2 - &i2) / mf;
        i3 += (s3 - &i3) / mf;
    }

    let mut cov_zz = i2 - &i1 * i1.transpose() + &model.noise;
    symmetrize(&mut cov_zz);
    repair_covariance(&mut cov_zz);
    let mut z_mean = z0 + i1;
    wrap_masked(&mut z_mean, &model.angle_mask);
    Ok(TransformResult { z_mean, cov_zz, cov_xz: i3 })
}
