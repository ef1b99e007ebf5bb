//! Simulated terminal-airspace scenario: maneuvering targets switching
//! between nearly-constant-velocity and coordinated-turn motion, observed
//! by a single range/bearing radar.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::association::Detection;
use crate::error::Result;
use crate::filters::GaussianState;
use crate::linalg::cholesky_with_repair;
use crate::models::{
    build_range_bearing, GaussianDensity, LinearDynamics, MeasurementModel, ModelSwitchMatrix,
    SensorPose,
};
use crate::tracker::Scan;

use super::GroundTruthPath;

#[derive(Debug, Clone)]
pub struct ClassBConfig {
    pub n_targets: usize,
    /// Box corner nearest the radar, in meters north/east.
    pub box_origin: (f64, f64),
    /// North and east extents of the initial-position box, meters.
    pub box_extent: (f64, f64),
    /// Initial per-axis speed bound, m/s.
    pub speed_bound: f64,
    pub dt: f64,
    /// Number of scans.
    pub horizon: usize,
    pub switch: ModelSwitchMatrix,
    /// Coordinated-turn rate magnitude, rad/s.
    pub omega: f64,
    pub q_x: f64,
    pub q_y: f64,
    pub radar_position: (f64, f64),
    /// Measurement noise covariance, [range; bearing].
    pub noise: DMatrix<f64>,
}

impl Default for ClassBConfig {
    fn default() -> Self {
        let switch = ModelSwitchMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.7, 0.15, 0.15, 0.4, 0.6, 0.0, 0.6, 0.4, 0.0],
        ))
        .expect("row-stochastic");
        let deg = std::f64::consts::PI / 180.0;
        Self {
            n_targets: 10,
            box_origin: (5_000.0, -5_000.0),
            // 30 km x 10 km rectangle (300 km^2).
            box_extent: (30_000.0, 10_000.0),
            speed_bound: 200.0,
            dt: 1.0,
            horizon: 100,
            switch,
            omega: 20.0 * deg,
            q_x: 0.05,
            q_y: 0.05,
            radar_position: (0.0, 0.0),
            noise: DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.5 * deg * deg])),
        }
    }
}

impl ClassBConfig {
    /// The three candidate motion models: NCV, turn left, turn right.
    pub fn motion_models(&self) -> Result<Vec<LinearDynamics>> {
        Ok(vec![
            crate::models::build_ncv_2d(self.dt, self.q_x, self.q_y)?,
            crate::models::build_turn_rate_2d(self.dt, self.omega, self.q_x, self.q_y)?,
            crate::models::build_turn_rate_2d(self.dt, -self.omega, self.q_x, self.q_y)?,
        ])
    }

    pub fn radar_model(&self) -> Result<Arc<MeasurementModel>> {
        let pose = SensorPose::new(
            DVector::from_vec(vec![self.radar_position.0, self.radar_position.1]),
            None,
            "radar",
        )?;
        Ok(Arc::new(build_range_bearing(&pose, self.noise.clone())?))
    }
}

#[derive(Debug)]
pub struct ClassBData {
    pub truths: Vec<GroundTruthPath>,
    pub scans: Vec<Scan>,
    /// Per-target model index history (simulation bookkeeping).
    pub model_history: Vec<Vec<usize>>,
}

/// Generate ground truth and detections for the simulated scenario. With
/// equal seeds the output is bit-identical.
pub fn simulate_class_b(config: &ClassBConfig, seed: u64) -> Result<ClassBData> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let models = config.motion_models()?;
    let radar = config.radar_model()?;
    let noise_chol: Option<DMatrix<f64>> = if config.noise.iter().any(|&v| v != 0.0) {
        Some(cholesky_with_repair(&config.noise)?.0.l())
    } else {
        None
    };
    let q_chols: Vec<Option<DMatrix<f64>>> = models
        .iter()
        .map(|m| {
            if m.process_noise.iter().any(|&v| v != 0.0) {
                cholesky_with_repair(&m.process_noise).map(|(c, _)| Some(c.l()))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;

    let mut states: Vec<DVector<f64>> = (0..config.n_targets)
        .map(|_| {
            DVector::from_vec(vec![
                config.box_origin.0 + rng.gen::<f64>() * config.box_extent.0,
                -config.speed_bound + rng.gen::<f64>() * 2.0 * config.speed_bound,
                config.box_origin.1 + rng.gen::<f64>() * config.box_extent.1,
                -config.speed_bound + rng.gen::<f64>() * 2.0 * config.speed_bound,
            ])
        })
        .collect();
    let mut model_idx = vec![0usize; config.n_targets];

    let mut truths: Vec<GroundTruthPath> = (0..config.n_targets)
        .map(|i| GroundTruthPath {
            id: format!("target-{i}"),
            times: Vec::new(),
            states: Vec::new(),
        })
        .collect();
    let mut model_history = vec![Vec::new(); config.n_targets];
    let mut scans = Vec::with_capacity(config.horizon);

    for k in 0..config.horizon {
        let t = k as f64 * config.dt;
        let mut detections = Vec::with_capacity(config.n_targets);
        for (i, x) in states.iter().enumerate() {
            truths[i].times.push(t);
            truths[i].states.push(x.clone());
            model_history[i].push(model_idx[i]);
            let mut z = radar.evaluate(x)?;
            if let Some(l) = &noise_chol {
                let w = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
                z += l * w;
                crate::linalg::wrap_masked(&mut z, &radar.angle_mask);
            }
            detections.push(Detection {
                z,
                timestamp: t,
                sensor: "radar".into(),
                model: radar.clone(),
                is_clutter: false,
            });
        }
        scans.push(Scan { time: t, detections });

        // Evolve each target: draw the next model, then propagate through it.
        for i in 0..config.n_targets {
            model_idx[i] = config.switch.sample_next(model_idx[i], &mut rng);
            let m = &models[model_idx[i]];
            let mut next = &m.transition * &states[i];
            if let Some(l) = &q_chols[model_idx[i]] {
                let w = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
                next += l * w;
            }
            states[i] = next;
        }
    }

    Ok(ClassBData { truths, scans, model_history })
}

/// One initial track prior per true target: the truth mean perturbed by a
/// draw from the prior covariance.
pub fn initial_priors(
    truths: &[GroundTruthPath],
    prior_cov: &DMatrix<f64>,
    seed: u64,
) -> Result<Vec<GaussianState>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let l = cholesky_with_repair(prior_cov)?.0.l();
    truths
        .iter()
        .map(|truth| {
            let x0 = &truth.states[0];
            let w = DVector::from_fn(x0.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let mean = x0 + &l * w;
            Ok(GaussianState::new(
                GaussianDensity::new(mean, prior_cov.clone())?,
                truth.times[0],
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSwitchMatrix;

    #[test]
    fn identity_switching_never_changes_model() {
        let mut config = ClassBConfig { horizon: 50, n_targets: 3, ..Default::default() };
        config.switch = ModelSwitchMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let data = simulate_class_b(&config, 1).unwrap();
        for hist in &data.model_history {
            assert!(hist.iter().all(|&m| m == 0));
        }
    }

    #[test]
    fn switch_frequencies_match_first_row() {
        // 1e5 draws from row 0 of the default matrix: empirical frequencies
        // within +-0.01 of (0.7, 0.15, 0.15).
        let config = ClassBConfig::default();
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[config.switch.sample_next(0, &mut rng)] += 1;
        }
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        for (f, e) in freqs.iter().zip([0.7, 0.15, 0.15]) {
            assert!((f - e).abs() < 0.01, "frequency {f} vs expected {e}");
        }
    }

    #[test]
    fn switch_chi_square_goodness_of_fit() {
        let config = ClassBConfig::default();
        let n = 100_000usize;
        for row in 0..3 {
            let mut rng = ChaCha12Rng::seed_from_u64(900 + row as u64);
            let mut counts = [0usize; 3];
            for _ in 0..n {
                counts[config.switch.sample_next(row, &mut rng)] += 1;
            }
            let expected = config.switch.row(row);
            let mut chi2 = 0.0;
            let mut dof = 0;
            for (c, e) in counts.iter().zip(&expected) {
                let en = e * n as f64;
                if en > 0.0 {
                    chi2 += (*c as f64 - en).powi(2) / en;
                    dof += 1;
                }
            }
            // p > 0.001 for dof - 1 in {1, 2}: chi2 critical values 10.83 / 13.82.
            let crit = if dof <= 2 { 10.83 } else { 13.82 };
            assert!(chi2 < crit, "row {row}: chi2 {chi2} exceeds {crit}");
        }
    }

    #[test]
    fn noise_free_detections_match_truth() {
        let mut config = ClassBConfig {
            horizon: 20,
            n_targets: 2,
            q_x: 0.0,
            q_y: 0.0,
            noise: DMatrix::zeros(2, 2),
            ..Default::default()
        };
        config.switch = ModelSwitchMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let data = simulate_class_b(&config, 5).unwrap();
        let radar = config.radar_model().unwrap();
        for (k, scan) in data.scans.iter().enumerate() {
            for (i, det) in scan.detections.iter().enumerate() {
                let z = radar.evaluate(&data.truths[i].states[k]).unwrap();
                assert_eq!(det.z, z);
            }
        }
    }

    #[test]
    fn equal_seeds_bit_identical() {
        let config = ClassBConfig { horizon: 10, ..Default::default() };
        let a = simulate_class_b(&config, 42).unwrap();
        let b = simulate_class_b(&config, 42).unwrap();
        for (ta, tb) in a.truths.iter().zip(&b.truths) {
            assert_eq!(ta.states, tb.states);
        }
        for (sa, sb) in a.scans.iter().zip(&b.scans) {
            for (da, db) in sa.detections.iter().zip(&sb.detections) {
                assert_eq!(da.z, db.z);
            }
        }
    }

    #[test]
    fn initial_positions_inside_box_and_speed_bounded() {
        let config = ClassBConfig::default();
        let data = simulate_class_b(&config, 9).unwrap();
        for truth in &data.truths {
            let x0 = &truth.states[0];
            assert!(x0[0] >= config.box_origin.0 && x0[0] <= config.box_origin.0 + config.box_extent.0);
            assert!(x0[2] >= config.box_origin.1 && x0[2] <= config.box_origin.1 + config.box_extent.1);
            assert!(x0[1].abs() <= config.speed_bound);
            assert!(x0[3].abs() <= config.speed_bound);
        }
    }
}
