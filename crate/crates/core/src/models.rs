//! State-space model building blocks: Gaussian densities, linear dynamics
//! (nearly constant velocity, coordinated turn, 3D constant velocity) and
//! nonlinear radar measurement models.
//!
//! State ordering convention is [p_N, v_N, p_E, v_E] in 2D and
//! [p_N, v_N, p_E, v_E, p_D, v_D] in 3D, with the down axis positive
//! towards the ground. Bearings are measured from north towards east,
//! i.e. atan2(east_offset, north_offset), in radians.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, wrap_masked};

/// A Gaussian density N{x; mean, cov} over a real vector.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianDensity {
    /// Construct after checking symmetry (absolute tolerance 1e-9) and
    /// positive semidefiniteness. The stored covariance is the exactly
    /// symmetrized input.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "covariance {}x{} does not match mean length {}",
                cov.nrows(),
                cov.ncols(),
                n
            )));
        }
        let asym = (&cov - cov.transpose()).abs().max();
        if asym > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "covariance asymmetry {asym:e} exceeds 1e-9"
            )));
        }
        let mut cov = cov;
        symmetrize(&mut cov);
        let min_eig = crate::linalg::min_eigenvalue(&cov);
        let scale = cov.trace().abs().max(1.0);
        if min_eig < -1e-9 * scale {
            return Err(Error::InvalidArgument(format!(
                "covariance not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// Linear dynamics x' = F x + w, w ~ N(0, Q), over a step of `dt` seconds.
#[derive(Debug, Clone)]
pub struct LinearDynamics {
    pub transition: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub dt: f64,
}

/// Parameter set from which `LinearDynamics` can be rebuilt for any step
/// length, used when scans arrive at irregular intervals.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DynamicsSpec {
    Ncv2d { qx: f64, qy: f64 },
    TurnRate2d { omega: f64, qx: f64, qy: f64 },
    Cv3d { qx: f64, qy: f64, qz: f64 },
}

impl DynamicsSpec {
    pub fn build(&self, dt: f64) -> Result<LinearDynamics> {
        match *self {
            DynamicsSpec::Ncv2d { qx, qy } => build_ncv_2d(dt, qx, qy),
            DynamicsSpec::TurnRate2d { omega, qx, qy } => build_turn_rate_2d(dt, omega, qx, qy),
            DynamicsSpec::Cv3d { qx, qy, qz } => build_cv_3d(dt, qx, qy, qz),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            DynamicsSpec::Cv3d { .. } => 6,
            _ => 4,
        }
    }
}

fn sigma_block(dt: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[dt.powi(3) / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt],
    )
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Nearly constant velocity model in 2D, state [p_N, v_N, p_E, v_E].
pub fn build_ncv_2d(dt: f64, q_x: f64, q_y: f64) -> Result<LinearDynamics> {
    check_dt(dt)?;
    if q_x < 0.0 || q_y < 0.0 {
        return Err(Error::InvalidArgument("noise intensity must be nonnegative".into()));
    }
    let mut f = DMatrix::identity(4, 4);
    f[(0, 1)] = dt;
    f[(2, 3)] = dt;
    let s = sigma_block(dt);
    let mut q = DMatrix::zeros(4, 4);
    q.view_mut((0, 0), (2, 2)).copy_from(&(&s * q_x));
    q.view_mut((2, 2), (2, 2)).copy_from(&(&s * q_y));
    Ok(LinearDynamics { transition: f, process_noise: q, dt })
}

/// Coordinated turn model with known turn rate `omega` (rad/s), state
/// [p_N, v_N, p_E, v_E]. The omega -> 0 limit is the NCV transition.
pub fn build_turn_rate_2d(dt: f64, omega: f64, q_x: f64, q_y: f64) -> Result<LinearDynamics> {
    check_dt(dt)?;
    if omega.abs() < 1e-9 {
        return build_ncv_2d(dt, q_x, q_y);
    }
    let wt = omega * dt;
    let (s, c) = (wt.sin(), wt.cos());
    let a = s / omega;
    let b = (1.0 - c) / omega;
    let f = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, a, 0.0, -b, //
            0.0, c, 0.0, -s, //
            0.0, b, 1.0, a, //
            0.0, s, 0.0, c,
        ],
    );
    let ncv = build_ncv_2d(dt, q_x, q_y)?;
    Ok(LinearDynamics { transition: f, process_noise: ncv.process_noise, dt })
}

/// Constant velocity model in 3D, state [p_N, v_N, p_E, v_E, p_D, v_D].
pub fn build_cv_3d(dt: f64, q_x: f64, q_y: f64, q_z: f64) -> Result<LinearDynamics> {
    check_dt(dt)?;
    let mut f = DMatrix::identity(6, 6);
    let s = sigma_block(dt);
    let mut q = DMatrix::zeros(6, 6);
    for (axis, &qi) in [q_x, q_y, q_z].iter().enumerate() {
        if qi < 0.0 {
            return Err(Error::InvalidArgument("noise intensity must be nonnegative".into()));
        }
        let o = 2 * axis;
        f[(o, o + 1)] = dt;
        q.view_mut((o, o), (2, 2)).copy_from(&(&s * qi));
    }
    Ok(LinearDynamics { transition: f, process_noise: q, dt })
}

/// Known pose of a sensor in scene coordinates.
#[derive(Debug, Clone)]
pub struct SensorPose {
    pub position: DVector<f64>,
    pub max_range: Option<f64>,
    pub label: String,
}

impl SensorPose {
    pub fn new(position: DVector<f64>, max_range: Option<f64>, label: impl Into<String>) -> Result<Self> {
        if let Some(r) = max_range {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("max_range must be positive".into()));
            }
        }
        Ok(Self { position, max_range, label: label.into() })
    }
}

type VecFn = dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync;
type MatFn = dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>> + Send + Sync;

/// Nonlinear measurement model z = h(x) + v, v ~ N(0, R).
///
/// Components flagged in `angle_mask` are angles and are always reported
/// wrapped to (-pi, pi]. When no analytic Jacobian is registered a central
/// finite-difference Jacobian is used.
#[derive(Clone)]
pub struct MeasurementModel {
    h: Arc<VecFn>,
    pub noise: DMatrix<f64>,
    pub angle_mask: Vec<bool>,
    jacobian: Option<Arc<MatFn>>,
    position_inverse: Option<Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>>,
    pub state_dim: usize,
}

impl std::fmt::Debug for MeasurementModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasurementModel")
            .field("n_z", &self.angle_mask.len())
            .field("state_dim", &self.state_dim)
            .finish()
    }
}

impl MeasurementModel {
    pub fn new(
        h: Arc<VecFn>,
        noise: DMatrix<f64>,
        angle_mask: Vec<bool>,
        jacobian: Option<Arc<MatFn>>,
        state_dim: usize,
    ) -> Self {
        Self { h, noise, angle_mask, jacobian, position_inverse: None, state_dim }
    }

    pub fn with_position_inverse(
        mut self,
        inv: Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    ) -> Self {
        self.position_inverse = Some(inv);
        self
    }

    pub fn measurement_dim(&self) -> usize {
        self.angle_mask.len()
    }

    /// Evaluate h with angle components wrapped to (-pi, pi].
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut z = (self.h)(x)?;
        wrap_masked(&mut z, &self.angle_mask);
        Ok(z)
    }

    /// Analytic Jacobian when registered, otherwise central differences with
    /// step 1e-6 * max(1, |x_i|) per component.
    pub fn jacobian_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        self.finite_difference_jacobian(x)
    }

    pub fn finite_difference_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n_z = self.measurement_dim();
        let n_x = x.len();
        let mut jac = DMatrix::zeros(n_z, n_x);
        for i in 0..n_x {
            let step = 1e-6 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            let zp = (self.h)(&xp)?;
            let zm = (self.h)(&xm)?;
            for r in 0..n_z {
                let mut d = zp[r] - zm[r];
                if self.angle_mask[r] {
                    d = crate::linalg::wrap_angle(d);
                }
                jac[(r, i)] = d / (2.0 * step);
            }
        }
        Ok(jac)
    }

    /// Invert a measurement to a scene position, when the model geometry
    /// admits a closed form. Used by single-point track initiation.
    pub fn invert_position(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        self.position_inverse.as_ref().map(|f| f(z))
    }

    /// Finite-difference Jacobian of the position inverse at z, for mapping
    /// measurement noise into an initial position covariance.
    pub fn position_inverse_jacobian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let inv = self.position_inverse.as_ref()?;
        let p0 = inv(z);
        let n_p = p0.len();
        let n_z = z.len();
        let mut jac = DMatrix::zeros(n_p, n_z);
        for i in 0..n_z {
            let step = 1e-6 * z[i].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += step;
            zm[i] -= step;
            let pp = inv(&zp);
            let pm = inv(&zm);
            for r in 0..n_p {
                jac[(r, i)] = (pp[r] - pm[r]) / (2.0 * step);
            }
        }
        Some(jac)
    }
}

/// Range-and-bearing radar in 2D. h(x) = [range, bearing] with the bearing
/// measured from north, positive towards east.
pub fn build_range_bearing(sensor: &SensorPose, noise: DMatrix<f64>) -> Result<MeasurementModel> {
    if sensor.position.len() != 2 {
        return Err(Error::InvalidArgument("range-bearing sensor position must be 2D".into()));
    }
    let (rn, re) = (sensor.position[0], sensor.position[1]);
    let h = Arc::new(move |x: &DVector<f64>| -> Result<DVector<f64>> {
        let dn = x[0] - rn;
        let de = x[2] - re;
        let range = (dn * dn + de * de).sqrt();
        if range < 1e-9 {
            return Err(Error::DegenerateGeometry("target coincident with sensor".into()));
        }
        Ok(DVector::from_vec(vec![range, de.atan2(dn)]))
    });
    let jac = Arc::new(move |x: &DVector<f64>| -> Result<DMatrix<f64>> {
        let dn = x[0] - rn;
        let de = x[2] - re;
        let r2 = dn * dn + de * de;
        let r = r2.sqrt();
        if r < 1e-9 {
            return Err(Error::DegenerateGeometry("target coincident with sensor".into()));
        }
        let mut j = DMatrix::zeros(2, 4);
        j[(0, 0)] = dn / r;
        j[(0, 2)] = de / r;
        j[(1, 0)] = -de / r2;
        j[(1, 2)] = dn / r2;
        Ok(j)
    });
    let inv = Arc::new(move |z: &DVector<f64>| {
        DVector::from_vec(vec![rn + z[0] * z[1].cos(), re + z[0] * z[1].sin()])
    });
    Ok(MeasurementModel::new(h, noise, vec![false, true], Some(jac), 4)
        .with_position_inverse(inv))
}

/// Elevation/bearing/range radar in 3D. Measurement order is
/// [elevation, bearing, range]; elevation is positive above the sensor's
/// horizontal plane (the down axis is positive towards the ground). At
/// zenith or nadir the bearing is reported as 0.
pub fn build_az_el_range(sensor: &SensorPose, noise: DMatrix<f64>) -> Result<MeasurementModel> {
    if sensor.position.len() != 3 {
        return Err(Error::InvalidArgument("az/el/range sensor position must be 3D".into()));
    }
    let (rn, re, rd) = (sensor.position[0], sensor.position[1], sensor.position[2]);
    let h = Arc::new(move |x: &DVector<f64>| -> Result<DVector<f64>> {
        let dn = x[0] - rn;
        let de = x[2] - re;
        let up = rd - x[4];
        let rho = (dn * dn + de * de + up * up).sqrt();
        if rho < 1e-9 {
            return Err(Error::DegenerateGeometry("target coincident with sensor".into()));
        }
        let horiz = (dn * dn + de * de).sqrt();
        let bearing = if horiz < 1e-9 { 0.0 } else { de.atan2(dn) };
        Ok(DVector::from_vec(vec![(up / rho).asin(), bearing, rho]))
    });
    let jac = Arc::new(move |x: &DVector<f64>| -> Result<DMatrix<f64>> {
        let dn = x[0] - rn;
        let de = x[2] - re;
        let up = rd - x[4];
        let rho2 = dn * dn + de * de + up * up;
        let rho = rho2.sqrt();
        if rho < 1e-9 {
            return Err(Error::DegenerateGeometry("target coincident with sensor".into()));
        }
        let h2 = dn * dn + de * de;
        let horiz = h2.sqrt();
        let mut j = DMatrix::zeros(3, 6);
        if horiz > 1e-9 {
            // elevation = atan2(up, horiz)
            j[(0, 0)] = -up * dn / (rho2 * horiz);
            j[(0, 2)] = -up * de / (rho2 * horiz);
            j[(0, 4)] = -horiz / rho2;
            j[(1, 0)] = -de / h2;
            j[(1, 2)] = dn / h2;
        }
        j[(2, 0)] = dn / rho;
        j[(2, 2)] = de / rho;
        j[(2, 4)] = -up / rho;
        Ok(j)
    });
    let inv = Arc::new(move |z: &DVector<f64>| {
        let (el, b, rho) = (z[0], z[1], z[2]);
        let horiz = rho * el.cos();
        DVector::from_vec(vec![
            rn + horiz * b.cos(),
            re + horiz * b.sin(),
            rd - rho * el.sin(),
        ])
    });
    Ok(MeasurementModel::new(h, noise, vec![true, true, false], Some(jac), 6)
        .with_position_inverse(inv))
}

/// Linear measurement model z = H x + v. Mostly used by tests and the
/// linear-Gaussian equivalence checks.
pub fn build_linear(h_matrix: DMatrix<f64>, noise: DMatrix<f64>) -> MeasurementModel {
    let n_z = h_matrix.nrows();
    let n_x = h_matrix.ncols();
    let hm = h_matrix.clone();
    let h = Arc::new(move |x: &DVector<f64>| -> Result<DVector<f64>> { Ok(&hm * x) });
    let jac = Arc::new(move |_: &DVector<f64>| -> Result<DMatrix<f64>> { Ok(h_matrix.clone()) });
    MeasurementModel::new(h, noise, vec![false; n_z], Some(jac), n_x)
}

/// Row-stochastic matrix of motion-model switching probabilities.
#[derive(Debug, Clone)]
pub struct ModelSwitchMatrix {
    probs: DMatrix<f64>,
}

impl ModelSwitchMatrix {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.nrows() != probs.ncols() {
            return Err(Error::InvalidArgument("switching matrix must be square".into()));
        }
        for r in 0..probs.nrows() {
            let mut sum = 0.0;
            for c in 0..probs.ncols() {
                let p = probs[(r, c)];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "switching probability out of [0,1] at row {r}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "switching matrix row {r} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { probs })
    }

    pub fn size(&self) -> usize {
        self.probs.nrows()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        (0..self.probs.ncols()).map(|c| self.probs[(r, c)]).collect()
    }

    /// Draw the next model index given the current one, using a uniform
    /// variate from `rng`.
    pub fn sample_next<R: rand::Rng>(&self, current: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for c in 0..self.probs.ncols() {
            acc += self.probs[(current, c)];
            if u < acc {
                return c;
            }
        }
        self.probs.ncols() - 1
    }
}
