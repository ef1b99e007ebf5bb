//! Scenario generation: the simulated terminal-airspace experiment and the
//! ADS-B replay experiment with synthesized radar detections.

pub mod adsb;
pub mod class_b;
pub mod geodesy;

use nalgebra::DVector;

pub use adsb::{load_adsb, simulate_detections, AdsbLoad, ClassAConfig};
pub use class_b::{simulate_class_b, ClassBConfig, ClassBData};
pub use geodesy::{Geodetic, LocalFrame};

/// True trajectory of one target over its active interval.
#[derive(Debug, Clone)]
pub struct GroundTruthPath {
    pub id: String,
    pub times: Vec<f64>,
    /// Full states, position/velocity interleaved per axis.
    pub states: Vec<DVector<f64>>,
}

impl GroundTruthPath {
    /// Position components (indices 0, 2, 4...) of the state at index `i`.
    pub fn position_at(&self, i: usize) -> DVector<f64> {
        let s = &self.states[i];
        let n_p = s.len() / 2;
        DVector::from_fn(n_p, |k, _| s[2 * k])
    }

    /// Index of the sample at time `t`, if the path is active there.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&ti| (ti - t).abs() < 1e-9)
    }
}
