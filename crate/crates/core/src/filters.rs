//! Generic local filter recursion: linear-Gaussian prediction plus a
//! measurement update parameterized by a moment transform. EKF, UKF, CKF
//! and the stochastic integration filter are configurations of the same
//! update.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_with_repair, min_eigenvalue, repair_covariance, symmetric_condition, wrap_angle,
};
use crate::models::{GaussianDensity, LinearDynamics, MeasurementModel};
use crate::transforms::{
    cubature_points, points_transform, sif_transform, transform_linearize, unscented_points,
    TransformResult,
};

/// Gaussian state estimate with a scenario timestamp in seconds.
#[derive(Debug, Clone)]
pub struct GaussianState {
    pub density: GaussianDensity,
    pub timestamp: f64,
}

impl GaussianState {
    pub fn new(density: GaussianDensity, timestamp: f64) -> Self {
        Self { density, timestamp }
    }

    pub fn mean(&self) -> &DVector<f64> {
        self.density.mean()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        self.density.cov()
    }
}

/// Local filter selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Ekf,
    /// Scaled unscented transform; `kappa: None` means the 3 - n default.
    Ukf { alpha: f64, beta: f64, kappa: Option<f64> },
    Ckf,
    Sif { iterations: usize },
}

impl FilterKind {
    pub fn ukf_defaults() -> Self {
        FilterKind::Ukf { alpha: 0.5, beta: 2.0, kappa: None }
    }

    pub fn sif_default() -> Self {
        FilterKind::Sif { iterations: 10 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FilterKind::Ekf => "EKF",
            FilterKind::Ukf { .. } => "UKF",
            FilterKind::Ckf => "CKF",
            FilterKind::Sif { .. } => "SIF",
        }
    }
}

/// Compute the measurement moments for the given filter kind.
pub fn measurement_transform<R: Rng>(
    kind: &FilterKind,
    model: &MeasurementModel,
    prior: &GaussianDensity,
    rng: &mut R,
) -> Result<TransformResult> {
    match *kind {
        FilterKind::Ekf => transform_linearize(model, prior),
        FilterKind::Ukf { alpha, beta, kappa } => {
            let kappa = kappa.unwrap_or(3.0 - prior.dim() as f64);
            let points = unscented_points(prior, alpha, beta, kappa)?;
            points_transform(model, prior, &points)
        }
        FilterKind::Ckf => {
            let points = cubature_points(prior)?;
            points_transform(model, prior, &points)
        }
        FilterKind::Sif { iterations } => sif_transform(model, prior, iterations, rng),
    }
}

/// Predict a Gaussian state through linear dynamics to `to_time`.
pub fn predict(state: &GaussianState, dynamics: &LinearDynamics, to_time: f64) -> Result<GaussianState> {
    if to_time < state.timestamp {
        return Err(Error::InvalidArgument(format!(
            "prediction time {to_time} precedes state time {}",
            state.timestamp
        )));
    }
    let f = &dynamics.transition;
    let mean = f * state.mean();
    let mut cov = f * state.cov() * f.transpose() + &dynamics.process_noise;
    repair_covariance(&mut cov);
    Ok(GaussianState::new(GaussianDensity::new(mean, cov)?, to_time))
}

/// Diagnostics attached to a measurement update.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateDiagnostics {
    /// Posterior covariance needed eigenvalue clamping.
    pub covariance_repaired: bool,
    /// Update was rejected and the prior state kept.
    pub rejected: bool,
    /// Smallest posterior eigenvalue before repair.
    pub min_eigenvalue_before_repair: f64,
}

/// Apply the gain computation and state correction given precomputed
/// measurement moments.
pub fn apply_update(
    state: &GaussianState,
    transform: &TransformResult,
    z: &DVector<f64>,
    angle_mask: &[bool],
) -> Result<(GaussianState, UpdateDiagnostics)> {
    let pzz = &transform.cov_zz;
    if symmetric_condition(pzz) > 1e12 {
        return Err(Error::Numerical(format!(
            "innovation covariance ill-conditioned (cond > 1e12), trace {}",
            pzz.trace()
        )));
    }
    let (chol, _) = cholesky_with_repair(pzz)?;
    // K = Pxz Pzz^-1 via solve against the factorization.
    let mut kt = transform.cov_xz.transpose();
    chol.solve_mut(&mut kt);
    let gain = kt.transpose();

    let mut innovation = z - &transform.z_mean;
    for (i, &is_angle) in angle_mask.iter().enumerate() {
        if is_angle {
            innovation[i] = wrap_angle(innovation[i]);
        }
    }

    let mean = state.mean() + &gain * &innovation;
    let mut cov = state.cov() - &gain * pzz * gain.transpose();
    let min_eig = min_eigenvalue(&cov);
    let repaired = repair_covariance(&mut cov);
    let mut diag = UpdateDiagnostics {
        covariance_repaired: repaired,
        rejected: false,
        min_eigenvalue_before_repair: min_eig,
    };

    match GaussianDensity::new(mean, cov) {
        Ok(density) => Ok((GaussianState::new(density, state.timestamp), diag)),
        Err(_) => {
            // Repair did not produce a usable covariance; keep the prior.
            diag.rejected = true;
            Ok((state.clone(), diag))
        }
    }
}

/// Full measurement update: moment transform per `kind`, then correction.
pub fn update<R: Rng>(
    state: &GaussianState,
    model: &MeasurementModel,
    z: &DVector<f64>,
    kind: &FilterKind,
    rng: &mut R,
) -> Result<(GaussianState, UpdateDiagnostics)> {
    let transform = measurement_transform(kind, model, &state.density, rng)?;
    apply_update(state, &transform, z, &model.angle_mask)
}

/// Closed-form Kalman filter update for a linear measurement z = H x + v.
/// Test oracle for the linear-Gaussian equivalence checks.
pub fn kalman_update_linear(
    state: &GaussianState,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    z: &DVector<f64>,
) -> Result<GaussianState> {
    let s = h * state.cov() * h.transpose() + r;
    let (chol, _) = cholesky_with_repair(&s)?;
    let mut kt = (state.cov() * h.transpose()).transpose();
    chol.solve_mut(&mut kt);
    let gain = kt.transpose();
    let mean = state.mean() + &gain * (z - h * state.mean());
    let mut cov = state.cov() - &gain * &s * gain.transpose();
    repair_covariance(&mut cov);
    Ok(GaussianState::new(GaussianDensity::new(mean, cov)?, state.timestamp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_linear, build_ncv_2d, build_range_bearing, SensorPose};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn state4() -> GaussianState {
        GaussianState::new(
            GaussianDensity::new(
                DVector::from_vec(vec![0.0, 1.0, 0.0, 2.0]),
                DMatrix::identity(4, 4),
            )
            .unwrap(),
            0.0,
        )
    }

    #[test]
    fn predict_identity_dynamics() {
        let dynamics = LinearDynamics {
            transition: DMatrix::identity(4, 4),
            process_noise: DMatrix::zeros(4, 4),
            dt: 1.0,
        };
        let s = state4();
        let p = predict(&s, &dynamics, 1.0).unwrap();
        assert_relative_eq!(p.mean(), s.mean(), epsilon = 1e-15);
        assert_relative_eq!(p.cov(), s.cov(), epsilon = 1e-15);
        assert_eq!(p.timestamp, 1.0);
    }

    #[test]
    fn predict_ncv_step() {
        let dynamics = build_ncv_2d(1.0, 0.05, 0.05).unwrap();
        let p = predict(&state4(), &dynamics, 1.0).unwrap();
        assert_relative_eq!(
            p.mean(),
            &DVector::from_vec(vec![1.0, 1.0, 2.0, 2.0]),
            epsilon = 1e-12
        );
        // Oracle: direct matrix arithmetic.
        let f = &dynamics.transition;
        let expected = f * DMatrix::identity(4, 4) * f.transpose() + &dynamics.process_noise;
        assert_relative_eq!(p.cov(), &expected, epsilon = 1e-12);
    }

    #[test]
    fn predict_rejects_time_regression() {
        let dynamics = build_ncv_2d(1.0, 0.05, 0.05).unwrap();
        let mut s = state4();
        s.timestamp = 5.0;
        assert!(predict(&s, &dynamics, 4.0).is_err());
    }

    #[test]
    fn update_linear_matches_kalman_all_kinds() {
        let h = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 2.0]));
        let model = build_linear(h.clone(), r.clone());
        let s = state4();
        let z = DVector::from_vec(vec![0.5, -0.3]);
        let exact = kalman_update_linear(&s, &h, &r, &z).unwrap();
        for kind in [
            FilterKind::Ekf,
            FilterKind::ukf_defaults(),
            FilterKind::Ckf,
            FilterKind::Sif { iterations: 5 },
        ] {
            let mut rng = ChaCha12Rng::seed_from_u64(1);
            let (post, diag) = update(&s, &model, &z, &kind, &mut rng).unwrap();
            assert!(!diag.rejected);
            let mean_err = (post.mean() - exact.mean()).abs().max();
            let cov_err = (post.cov() - exact.cov()).abs().max();
            assert!(mean_err < 1e-9, "{kind:?} mean error {mean_err}");
            assert!(cov_err < 1e-9, "{kind:?} cov error {cov_err}");
        }
    }

    #[test]
    fn zero_innovation_keeps_mean_shrinks_cov() {
        let sensor = SensorPose::new(DVector::from_vec(vec![0.0, 0.0]), None, "r").unwrap();
        let model = build_range_bearing(
            &sensor,
            DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1e-4])),
        )
        .unwrap();
        let s = GaussianState::new(
            GaussianDensity::new(
                DVector::from_vec(vec![1000.0, 0.0, 500.0, 0.0]),
                DMatrix::identity(4, 4) * 100.0,
            )
            .unwrap(),
            0.0,
        );
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let transform =
            measurement_transform(&FilterKind::Ckf, &model, &s.density, &mut rng).unwrap();
        let (post, _) =
            apply_update(&s, &transform, &transform.z_mean.clone(), &model.angle_mask).unwrap();
        assert_relative_eq!(post.mean(), s.mean(), epsilon = 1e-12);
        assert!(post.cov().trace() <= s.cov().trace() + 1e-12);
    }

    #[test]
    fn range_bearing_update_matches_independent_reimplementation() {
        // Independent straightforward reimplementation of the cubature update,
        // written directly from the moment-integral definitions.
        let sensor = SensorPose::new(DVector::from_vec(vec![0.0, 0.0]), None, "r").unwrap();
        let r_mat = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1e-4]));
        let model = build_range_bearing(&sensor, r_mat.clone()).unwrap();
        let s = GaussianState::new(
            GaussianDensity::new(
                DVector::from_vec(vec![1000.0, 5.0, 500.0, -3.0]),
                DMatrix::from_diagonal(&DVector::from_vec(vec![400.0, 25.0, 400.0, 25.0])),
            )
            .unwrap(),
            0.0,
        );
        let z = DVector::from_vec(vec![1120.0, 0.47]);

        // Oracle.
        let n = 4usize;
        let l = s.cov().clone().cholesky().unwrap().l();
        let mut pts = Vec::new();
        for i in 0..n {
            let col = l.column(i) * (n as f64).sqrt();
            pts.push(s.mean() + &col);
            pts.push(s.mean() - &col);
        }
        let w = 1.0 / (2.0 * n as f64);
        let hs: Vec<DVector<f64>> = pts
            .iter()
            .map(|p| {
                let r = (p[0] * p[0] + p[2] * p[2]).sqrt();
                DVector::from_vec(vec![r, p[2].atan2(p[0])])
            })
            .collect();
        let mut z_hat = DVector::zeros(2);
        for h in &hs {
            z_hat += h * w;
        }
        let mut pzz = r_mat.clone();
        let mut pxz = DMatrix::zeros(4, 2);
        for (h, p) in hs.iter().zip(&pts) {
            let dz = h - &z_hat;
            pzz += &dz * dz.transpose() * w;
            pxz += (p - s.mean()) * dz.transpose() * w;
        }
        let k = &pxz * pzz.clone().try_inverse().unwrap();
        let oracle_mean = s.mean() + &k * (z.clone() - &z_hat);
        let oracle_cov = s.cov() - &k * &pzz * k.transpose();

        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let (post, _) = update(&s, &model, &z, &FilterKind::Ckf, &mut rng).unwrap();
        assert!((post.mean() - &oracle_mean).abs().max() < 1e-10);
        assert!((post.cov() - &oracle_cov).abs().max() < 1e-10);
    }

    #[test]
    fn deterministic_under_seed() {
        let sensor = SensorPose::new(DVector::from_vec(vec![0.0, 0.0]), None, "r").unwrap();
        let model = build_range_bearing(
            &sensor,
            DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1e-4])),
        )
        .unwrap();
        let s = GaussianState::new(
            GaussianDensity::new(
                DVector::from_vec(vec![1000.0, 0.0, 500.0, 0.0]),
                DMatrix::identity(4, 4) * 100.0,
            )
            .unwrap(),
            0.0,
        );
        let z = DVector::from_vec(vec![1118.0, 0.46]);
        for kind in [FilterKind::Ekf, FilterKind::Sif { iterations: 10 }] {
            let run = || {
                let mut rng = ChaCha12Rng::seed_from_u64(17);
                update(&s, &model, &z, &kind, &mut rng).unwrap().0
            };
            let a = run();
            let b = run();
            assert_eq!(a.mean(), b.mean());
            assert_eq!(a.cov(), b.cov());
        }
    }
}
