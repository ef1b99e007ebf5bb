//! Multi-target tracking toolkit built around local Gaussian filters.
//!
//! The crate provides:
//!
//! * motion and measurement models ([`models`]),
//! * moment transforms, including a stochastic integration rule
//!   ([`transforms`]),
//! * the EKF / UKF / CKF / SIF filter family ([`filters`]),
//! * global nearest neighbor association with an optimal 2D assignment
//!   solver ([`association`]),
//! * a multi-sensor, multi-target tracker loop ([`tracker`]),
//! * scenario generation for a simulated maneuvering-target experiment and
//!   an ADS-B replay experiment ([`scenarios`]),
//! * OSPA, SIAP, and covariance-size metrics ([`metrics`]).

pub mod association;
pub mod error;
pub mod evaluation;
pub mod filters;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod scenarios;
pub mod tracker;
pub mod transforms;

pub use association::{assign_2d, hypothesize, Assignment, Detection, HypothesisMatrix};
pub use error::{Error, Result};
pub use filters::{predict, update, FilterKind, GaussianState, UpdateDiagnostics};
pub use models::{
    DynamicsSpec, GaussianDensity, LinearDynamics, MeasurementModel, ModelSwitchMatrix, SensorPose,
};
pub use tracker::{run_tracker, InitiationPolicy, Scan, Track, TrackerConfig, TrackerOutput};
