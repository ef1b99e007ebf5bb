//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use airtrack_core::models::{build_range_bearing, MeasurementModel, SensorPose};
use airtrack_core::{GaussianDensity, GaussianState};

/// A 4D constant-velocity state a few kilometers from the sensor.
pub fn bench_state() -> GaussianState {
    let mean = DVector::from_vec(vec![4000.0, 20.0, 3000.0, -10.0]);
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![400.0, 25.0, 400.0, 25.0]));
    GaussianState::new(GaussianDensity::new(mean, cov).unwrap(), 0.0)
}

/// Range-bearing radar at the origin observing the position components.
pub fn bench_model() -> Arc<MeasurementModel> {
    let sensor = SensorPose::new(DVector::from_vec(vec![0.0, 0.0]), None, "radar").unwrap();
    let noise = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 1e-4]));
    Arc::new(build_range_bearing(&sensor, noise).unwrap())
}
