//! Per-scan tracking loop: predict, hypothesize, assign, update or coast,
//! initiate, delete. Produces the track history and a structured scan log.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::association::{assign_2d, delete_stale, hypothesize, Detection};
use crate::error::{Error, Result};
use crate::filters::{apply_update, predict, FilterKind, GaussianState};
use crate::linalg::frobenius_norm;
use crate::models::{DynamicsSpec, GaussianDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

/// A single target hypothesis maintained over time.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub states: Vec<GaussianState>,
    pub last_update_time: f64,
    pub update_rejections: u32,
    pub status: TrackStatus,
    pub born_scan: usize,
    updates_since_birth: u32,
}

impl Track {
    pub fn latest(&self) -> &GaussianState {
        self.states.last().expect("track has at least one state")
    }
}

/// Track initiation policy.
#[derive(Debug, Clone)]
pub enum InitiationPolicy {
    /// Start one confirmed track per supplied prior at the first scan.
    KnownPriors(Vec<GaussianState>),
    /// Invert unassigned detections through the measurement geometry.
    SinglePoint {
        velocity_std: f64,
        confirm_updates: u32,
        confirm_window_scans: u32,
    },
    /// Never initiate.
    None,
}

impl InitiationPolicy {
    pub fn single_point_default() -> Self {
        InitiationPolicy::SinglePoint {
            velocity_std: 150.0,
            confirm_updates: 2,
            confirm_window_scans: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackerConfig {
    pub dynamics: DynamicsSpec,
    /// Mahalanobis gate; also the missed-detection cost.
    pub gate: f64,
    /// Seconds since last update after which a track is deleted.
    pub deletion_threshold: f64,
    pub initiation: InitiationPolicy,
    /// Process detections grouped per sensor, sequentially within a scan.
    pub sequential_sensors: bool,
}

impl TrackerConfig {
    pub fn new(dynamics: DynamicsSpec, initiation: InitiationPolicy) -> Self {
        Self {
            dynamics,
            gate: 5.0,
            deletion_threshold: 10.0,
            initiation,
            sequential_sensors: true,
        }
    }
}

/// All detections sharing one timestamp.
#[derive(Debug, Clone)]
pub struct Scan {
    pub time: f64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackOutcome {
    Updated { detections: Vec<usize> },
    Missed,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackScanRecord {
    pub track_id: u64,
    pub outcome: TrackOutcome,
    pub covariance_frobenius: f64,
    pub covariance_repaired: bool,
    pub update_rejected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanLog {
    pub scan: usize,
    pub time: f64,
    pub tracks: Vec<TrackScanRecord>,
    pub initiated: Vec<u64>,
    pub deleted: Vec<u64>,
}

#[derive(Debug)]
pub struct TrackerOutput {
    /// All tracks ever created, including deleted ones (status records it).
    pub tracks: Vec<Track>,
    pub scan_logs: Vec<ScanLog>,
}

struct LiveTrack {
    track: Track,
    updated_this_scan: Vec<usize>,
    repaired_this_scan: bool,
    rejected_this_scan: bool,
}

/// Run the full per-scan loop over a detection stream.
///
/// Scans must be in non-decreasing time order. Per-track numerical failures
/// are logged and the track coasts; they never abort the run.
pub fn run_tracker(
    scans: &[Scan],
    config: &TrackerConfig,
    kind: &FilterKind,
    seed: u64,
) -> Result<TrackerOutput> {
    for w in scans.windows(2) {
        if w[1].time < w[0].time {
            return Err(Error::InvalidArgument(
                "scans must be in non-decreasing time order".into(),
            ));
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut live: Vec<LiveTrack> = Vec::new();
    let mut finished: Vec<Track> = Vec::new();
    let mut scan_logs = Vec::with_capacity(scans.len());
    let mut next_id: u64 = 1;

    for (scan_idx, scan) in scans.iter().enumerate() {
        // Initiate from known priors at the first scan.
        if scan_idx == 0 {
            if let InitiationPolicy::KnownPriors(priors) = &config.initiation {
                for prior in priors {
                    live.push(LiveTrack {
                        track: Track {
                            id: next_id,
                            states: vec![GaussianState::new(prior.density.clone(), scan.time)],
                            last_update_time: scan.time,
                            update_rejections: 0,
                            status: TrackStatus::Confirmed,
                            born_scan: 0,
                            updates_since_birth: 0,
                        },
                        updated_this_scan: Vec::new(),
                        repaired_this_scan: false,
                        rejected_this_scan: false,
                    });
                    next_id += 1;
                }
            }
        }

        // Predict every live track to the scan time, rebuilding the dynamics
        // for the actual gap.
        for lt in live.iter_mut() {
            lt.updated_this_scan.clear();
            lt.repaired_this_scan = false;
            lt.rejected_this_scan = false;
            let gap = scan.time - lt.track.latest().timestamp;
            if gap > 1e-12 {
                let dynamics = config.dynamics.build(gap)?;
                match predict(lt.track.latest(), &dynamics, scan.time) {
                    Ok(s) => lt.track.states.push(s),
                    Err(_) => {
                        // keep previous state at the new timestamp
                        let mut s = lt.track.latest().clone();
                        s.timestamp = scan.time;
                        lt.track.states.push(s);
                    }
                }
            } else if lt.track.states.is_empty() {
                unreachable!("live track always has a state");
            } else if (lt.track.latest().timestamp - scan.time).abs() > 1e-9 {
                let mut s = lt.track.latest().clone();
                s.timestamp = scan.time;
                lt.track.states.push(s);
            }
        }

        let initiated_before = next_id;

        // Group detections per sensor when configured; groups are processed
        // sequentially, so a track can be updated by each sensor in turn.
        let groups: Vec<Vec<usize>> = if config.sequential_sensors {
            let mut labels: Vec<&str> = scan.detections.iter().map(|d| d.sensor.as_str()).collect();
            labels.sort_unstable();
            labels.dedup();
            labels
                .iter()
                .map(|lab| {
                    scan.detections
                        .iter()
                        .enumerate()
                        .filter(|(_, d)| d.sensor == *lab)
                        .map(|(i, _)| i)
                        .collect()
                })
                .collect()
        } else if scan.detections.is_empty() {
            Vec::new()
        } else {
            vec![(0..scan.detections.len()).collect()]
        };

        for group in &groups {
            let group_dets: Vec<Detection> =
                group.iter().map(|&i| scan.detections[i].clone()).collect();
            let states: Vec<GaussianState> =
                live.iter().map(|lt| lt.track.latest().clone()).collect();
            let hm = hypothesize(&states, &group_dets, kind, config.gate, &mut rng);
            let assignment = assign_2d(&hm)?;

            for &(ti, det) in &assignment.pairs {
                if let Some(local_idx) = det {
                    let det_global = group[local_idx];
                    let det = &scan.detections[det_global];
                    let key = std::sync::Arc::as_ptr(&det.model) as usize;
                    let transform = &hm.transforms[ti][&key];
                    let lt = &mut live[ti];
                    match apply_update(
                        lt.track.latest(),
                        transform,
                        &det.z,
                        &det.model.angle_mask,
                    ) {
                        Ok((post, diag)) => {
                            if diag.rejected {
                                lt.track.update_rejections += 1;
                                lt.rejected_this_scan = true;
                            } else {
                                *lt.track.states.last_mut().unwrap() = post;
                                lt.track.last_update_time = scan.time;
                                lt.track.updates_since_birth += 1;
                                lt.updated_this_scan.push(det_global);
                                lt.repaired_this_scan |= diag.covariance_repaired;
                            }
                        }
                        Err(_) => {
                            lt.track.update_rejections += 1;
                            lt.rejected_this_scan = true;
                        }
                    }
                }
            }

            // Initiate tracks from unassigned detections.
            if let InitiationPolicy::SinglePoint { velocity_std, .. } = config.initiation {
                for &local_idx in &assignment.unassigned_detections {
                    let det = &scan.detections[group[local_idx]];
                    if let Some(state) = single_point_state(det, velocity_std, scan.time) {
                        live.push(LiveTrack {
                            track: Track {
                                id: next_id,
                                states: vec![state],
                                last_update_time: scan.time,
                                update_rejections: 0,
                                status: TrackStatus::Tentative,
                                born_scan: scan_idx,
                                updates_since_birth: 0,
                            },
                            updated_this_scan: Vec::new(),
                            repaired_this_scan: false,
                            rejected_this_scan: false,
                        });
                        next_id += 1;
                    }
                }
            }
        }

        // Confirmation and tentative expiry.
        if let InitiationPolicy::SinglePoint { confirm_updates, confirm_window_scans, .. } =
            config.initiation
        {
            for lt in live.iter_mut() {
                if lt.track.status == TrackStatus::Tentative {
                    if lt.track.updates_since_birth >= confirm_updates {
                        lt.track.status = TrackStatus::Confirmed;
                    } else if scan_idx >= lt.track.born_scan + confirm_window_scans as usize {
                        lt.track.status = TrackStatus::Deleted;
                    }
                }
            }
        }

        // Deletion by time since last update.
        let ids: Vec<(u64, f64)> = live
            .iter()
            .map(|lt| (lt.track.id, lt.track.last_update_time))
            .collect();
        let (_, stale) = delete_stale(&ids, scan.time, config.deletion_threshold);
        let mut deleted_ids = stale;
        for lt in live.iter() {
            if lt.track.status == TrackStatus::Deleted && !deleted_ids.contains(&lt.track.id) {
                deleted_ids.push(lt.track.id);
            }
        }
        deleted_ids.sort_unstable();

        let records: Vec<TrackScanRecord> = live
            .iter()
            .map(|lt| TrackScanRecord {
                track_id: lt.track.id,
                outcome: if lt.updated_this_scan.is_empty() {
                    TrackOutcome::Missed
                } else {
                    TrackOutcome::Updated { detections: lt.updated_this_scan.clone() }
                },
                covariance_frobenius: frobenius_norm(lt.track.latest().cov()),
                covariance_repaired: lt.repaired_this_scan,
                update_rejected: lt.rejected_this_scan,
            })
            .collect();

        let (kept, removed): (Vec<LiveTrack>, Vec<LiveTrack>) = live
            .drain(..)
            .partition(|lt| !deleted_ids.contains(&lt.track.id));
        live = kept;
        for mut lt in removed {
            lt.track.status = TrackStatus::Deleted;
            finished.push(lt.track);
        }

        scan_logs.push(ScanLog {
            scan: scan_idx,
            time: scan.time,
            tracks: records,
            initiated: (initiated_before..next_id).collect(),
            deleted: deleted_ids,
        });
    }

    let mut tracks: Vec<Track> = finished;
    tracks.extend(live.into_iter().map(|lt| lt.track));
    tracks.sort_by_key(|t| t.id);
    Ok(TrackerOutput { tracks, scan_logs })
}

/// Build an initial Gaussian state from a single detection: position from the
/// measurement-geometry inverse, zero velocity with the configured standard
/// deviation, position covariance from the inverse-map Jacobian.
fn single_point_state(det: &Detection, velocity_std: f64, time: f64) -> Option<GaussianState> {
    let pos = det.model.invert_position(&det.z)?;
    let jac = det.model.position_inverse_jacobian(&det.z)?;
    let pos_cov = &jac * &det.model.noise * jac.transpose();
    let n_p = pos.len();
    let n_x = 2 * n_p;
    let mut mean = DVector::zeros(n_x);
    let mut cov = DMatrix::zeros(n_x, n_x);
    for i in 0..n_p {
        mean[2 * i] = pos[i];
        for j in 0..n_p {
            cov[(2 * i, 2 * j)] = pos_cov[(i, j)];
        }
        cov[(2 * i + 1, 2 * i + 1)] = velocity_std * velocity_std;
    }
    crate::linalg::repair_covariance(&mut cov);
    GaussianDensity::new(mean, cov)
        .ok()
        .map(|d| GaussianState::new(d, time))
}
