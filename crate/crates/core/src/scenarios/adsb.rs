//! ADS-B replay scenario: aircraft state vectors loaded from a CSV export
//! are treated as ground truth, and elevation/bearing/range detections are
//! synthesized from three radars with finite range.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::association::Detection;
use crate::error::{Error, Result};
use crate::linalg::cholesky_with_repair;
use crate::models::{build_az_el_range, MeasurementModel, SensorPose};
use crate::tracker::Scan;

use super::geodesy::{Geodetic, LocalFrame};
use super::GroundTruthPath;

/// Maximum gap between consecutive reports before a path is split, seconds.
const MAX_GAP_S: f64 = 30.0;

/// One radar site: geodetic position and label.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SensorSite {
    pub label: String,
    pub position: Geodetic,
}

#[derive(Debug, Clone)]
pub struct ClassAConfig {
    /// Scene origin; defaults to the midpoint of the two fixed radars.
    pub origin: Geodetic,
    pub sensors: Vec<SensorSite>,
    pub max_range: f64,
    /// Measurement noise covariance, [elevation; bearing; range].
    pub noise: DMatrix<f64>,
    /// Expected clutter detections per sensor per scan; 0 disables clutter.
    pub clutter_rate: f64,
    pub scan_interval: f64,
}

impl Default for ClassAConfig {
    fn default() -> Self {
        let deg = std::f64::consts::PI / 180.0;
        Self {
            origin: Geodetic::new(52.41185, -1.36465, 0.0),
            sensors: vec![
                SensorSite {
                    label: "manchester".into(),
                    position: Geodetic::new(53.3537, -2.2750, 0.0),
                },
                SensorSite {
                    label: "heathrow".into(),
                    position: Geodetic::new(51.4700, -0.4543, 0.0),
                },
                SensorSite {
                    label: "airborne".into(),
                    position: Geodetic::new(52.25, -0.09, 5_000.0),
                },
            ],
            max_range: 111_000.0,
            noise: DMatrix::from_diagonal(&DVector::from_vec(vec![
                (0.75 * deg).powi(2),
                (2.0 * deg).powi(2),
                100.0_f64.powi(2),
            ])),
            clutter_rate: 0.0,
            scan_interval: 5.0,
        }
    }
}

impl ClassAConfig {
    /// Build the sensor poses and measurement models in the scene frame.
    pub fn build_sensors(&self) -> Result<Vec<(SensorPose, Arc<MeasurementModel>)>> {
        let frame = LocalFrame::new(&self.origin);
        self.sensors
            .iter()
            .map(|site| {
                let ned = frame.to_ned(&site.position);
                let pose = SensorPose::new(
                    DVector::from_vec(vec![ned.x, ned.y, ned.z]),
                    Some(self.max_range),
                    site.label.clone(),
                )?;
                let model = Arc::new(build_az_el_range(&pose, self.noise.clone())?);
                Ok((pose, model))
            })
            .collect()
    }
}

/// Result of loading an ADS-B CSV export.
#[derive(Debug)]
pub struct AdsbLoad {
    pub paths: Vec<GroundTruthPath>,
    pub skipped_rows: usize,
}

struct RawRecord {
    time: f64,
    ned: Vector3<f64>,
}

/// Load an OpenSky-style state-vector CSV and resample the trajectories onto
/// the scan grid in scene-local coordinates.
///
/// Required columns: `time` (unix seconds), `icao24`, `lat`, `lon`
/// (degrees), `geoaltitude` (meters). Unparseable rows are skipped and
/// counted. Gaps over 30 s split a path into separate truth segments.
pub fn load_adsb(path: &Path, origin: &Geodetic, scan_interval: f64) -> Result<AdsbLoad> {
    if !(scan_interval > 0.0) {
        return Err(Error::InvalidArgument("scan_interval must be positive".into()));
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Format(format!("cannot open ADS-B file: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("missing header row: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing required column `{name}`")))
    };
    let c_time = col("time")?;
    let c_id = col("icao24")?;
    let c_lat = col("lat")?;
    let c_lon = col("lon")?;
    let c_alt = col("geoaltitude")?;

    let frame = LocalFrame::new(origin);
    let mut skipped = 0usize;
    let mut by_aircraft: Vec<(String, Vec<RawRecord>)> = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let parse = |i: usize| record.get(i).and_then(|s| s.trim().parse::<f64>().ok());
        let (time, lat, lon, alt) = match (parse(c_time), parse(c_lat), parse(c_lon), parse(c_alt))
        {
            (Some(t), Some(la), Some(lo), Some(al)) => (t, la, lo, al),
            _ => {
                skipped += 1;
                continue;
            }
        };
        let id = match record.get(c_id) {
            Some(s) if !s.trim().is_empty() => s.trim().to_string(),
            _ => {
                skipped += 1;
                continue;
            }
        };
        let ned = frame.to_ned(&Geodetic::new(lat, lon, alt));
        match by_aircraft.iter_mut().find(|(aid, _)| *aid == id) {
            Some((_, recs)) => recs.push(RawRecord { time, ned }),
            None => by_aircraft.push((id, vec![RawRecord { time, ned }])),
        }
    }

    // Scenario time is measured from the earliest report in the file.
    let t0 = by_aircraft
        .iter()
        .flat_map(|(_, recs)| recs.iter().map(|r| r.time))
        .fold(f64::INFINITY, f64::min);
    if !t0.is_finite() {
        return Ok(AdsbLoad { paths: Vec::new(), skipped_rows: skipped });
    }

    let mut paths = Vec::new();
    for (id, mut recs) in by_aircraft {
        recs.sort_by(|a, b| a.time.total_cmp(&b.time));
        recs.dedup_by(|a, b| (a.time - b.time).abs() < 1e-9);
        // Split at gaps.
        let mut segments: Vec<Vec<&RawRecord>> = Vec::new();
        for rec in &recs {
            match segments.last_mut() {
                Some(seg) if rec.time - seg.last().unwrap().time <= MAX_GAP_S => seg.push(rec),
                _ => segments.push(vec![rec]),
            }
        }
        for (si, seg) in segments.iter().enumerate() {
            if seg.len() < 2 {
                continue;
            }
            let seg_id = if segments.len() == 1 { id.clone() } else { format!("{id}#{si}") };
            let start = seg.first().unwrap().time - t0;
            let end = seg.last().unwrap().time - t0;
            let mut times = Vec::new();
            let mut states = Vec::new();
            let mut k = (start / scan_interval).ceil() as i64;
            while (k as f64) * scan_interval <= end + 1e-9 {
                let t = k as f64 * scan_interval;
                let abs_t = t + t0;
                // Locate the bracketing raw records.
                let j = seg.partition_point(|r| r.time <= abs_t + 1e-9);
                let (a, b) = if j == 0 {
                    (&seg[0], &seg[1])
                } else if j >= seg.len() {
                    (&seg[seg.len() - 2], &seg[seg.len() - 1])
                } else {
                    (&seg[j - 1], &seg[j])
                };
                let span = (b.time - a.time).max(1e-9);
                let alpha = ((abs_t - a.time) / span).clamp(0.0, 1.0);
                let pos = a.ned + (b.ned - a.ned) * alpha;
                let vel = (b.ned - a.ned) / span;
                times.push(t);
                states.push(DVector::from_vec(vec![
                    pos.x, vel.x, pos.y, vel.y, pos.z, vel.z,
                ]));
                k += 1;
            }
            if !times.is_empty() {
                paths.push(GroundTruthPath { id: seg_id, times, states });
            }
        }
    }
    paths.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(AdsbLoad { paths, skipped_rows: skipped })
}

/// Synthesize per-scan detections from the truth paths. Every aircraft
/// within `max_range` of a sensor is detected (unit detection probability);
/// optional Poisson clutter is drawn uniformly in each sensor's measurement
/// volume.
pub fn simulate_detections(
    paths: &[GroundTruthPath],
    config: &ClassAConfig,
    seed: u64,
) -> Result<Vec<Scan>> {
    let sensors = config.build_sensors()?;
    let noise_nonzero = config.noise.iter().any(|&v| v != 0.0);
    let noise_chol = if noise_nonzero {
        Some(cholesky_with_repair(&config.noise)?.0.l())
    } else {
        None
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut times: Vec<f64> = paths.iter().flat_map(|p| p.times.iter().copied()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut scans = Vec::with_capacity(times.len());
    for &t in &times {
        let mut detections = Vec::new();
        for (pose, model) in &sensors {
            for path in paths {
                let Some(i) = path.index_at(t) else { continue };
                let state = &path.states[i];
                let offset = DVector::from_vec(vec![
                    state[0] - pose.position[0],
                    state[2] - pose.position[1],
                    state[4] - pose.position[2],
                ]);
                if offset.norm() > config.max_range {
                    continue;
                }
                let mut z = model.evaluate(state)?;
                if let Some(l) = &noise_chol {
                    let w = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
                    z += l * w;
                    crate::linalg::wrap_masked(&mut z, &model.angle_mask);
                }
                detections.push(Detection {
                    z,
                    timestamp: t,
                    sensor: pose.label.clone(),
                    model: model.clone(),
                    is_clutter: false,
                });
            }
            if config.clutter_rate > 0.0 {
                let poisson = Poisson::new(config.clutter_rate)
                    .map_err(|_| Error::InvalidArgument("invalid clutter rate".into()))?;
                let n_clutter = poisson.sample(&mut rng) as usize;
                for _ in 0..n_clutter {
                    let el = rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                    let b = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let r = rng.gen_range(0.0..config.max_range);
                    detections.push(Detection {
                        z: DVector::from_vec(vec![el, b, r]),
                        timestamp: t,
                        sensor: pose.label.clone(),
                        model: model.clone(),
                        is_clutter: true,
                    });
                }
            }
        }
        scans.push(Scan { time: t, detections });
    }
    Ok(scans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn origin_row_maps_to_origin() {
        let origin = Geodetic::new(52.41185, -1.36465, 0.0);
        let csv = format!(
            "time,icao24,lat,lon,geoaltitude\n\
             0,abc123,{lat},{lon},0\n\
             10,abc123,{lat},{lon},0\n",
            lat = origin.lat_deg,
            lon = origin.lon_deg
        );
        let f = write_csv(&csv);
        let load = load_adsb(f.path(), &origin, 5.0).unwrap();
        assert_eq!(load.paths.len(), 1);
        let p = &load.paths[0];
        let pos = p.position_at(0);
        assert!(pos.norm() < 1e-6, "origin offset {}", pos.norm());
    }

    #[test]
    fn linear_interpolation_midpoint() {
        let origin = Geodetic::new(52.0, -1.0, 0.0);
        // Two rows 10 s apart moving straight north.
        let csv = "time,icao24,lat,lon,geoaltitude\n\
                   100,aaa111,52.0,-1.0,1000\n\
                   110,aaa111,52.02,-1.0,1000\n";
        let f = write_csv(csv);
        let load = load_adsb(f.path(), &origin, 5.0).unwrap();
        let p = &load.paths[0];
        let i = p.index_at(5.0).expect("midpoint sample");
        let frame = LocalFrame::new(&origin);
        let a = frame.to_ned(&Geodetic::new(52.0, -1.0, 1000.0));
        let b = frame.to_ned(&Geodetic::new(52.02, -1.0, 1000.0));
        let mid = (a + b) / 2.0;
        let pos = p.position_at(i);
        assert_relative_eq!(pos[0], mid.x, epsilon = 1e-6);
        assert_relative_eq!(pos[1], mid.y, epsilon = 1e-6);
        assert_relative_eq!(pos[2], mid.z, epsilon = 1e-6);
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "time,icao24,lat,lon\n0,a,52.0,-1.0\n";
        let f = write_csv(csv);
        let err = load_adsb(f.path(), &Geodetic::new(52.0, -1.0, 0.0), 5.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("geoaltitude"), "error should name the column: {msg}");
    }

    #[test]
    fn bad_rows_skipped_and_counted() {
        let csv = "time,icao24,lat,lon,geoaltitude\n\
                   0,a,52.0,-1.0,1000\n\
                   not_a_time,a,52.0,-1.0,1000\n\
                   5,a,junk,-1.0,1000\n\
                   10,a,52.01,-1.0,1000\n";
        let f = write_csv(csv);
        let load = load_adsb(f.path(), &Geodetic::new(52.0, -1.0, 0.0), 5.0).unwrap();
        assert_eq!(load.skipped_rows, 2);
        assert_eq!(load.paths.len(), 1);
    }

    #[test]
    fn gap_splits_path() {
        let csv = "time,icao24,lat,lon,geoaltitude\n\
                   0,a,52.00,-1.0,1000\n\
                   10,a,52.01,-1.0,1000\n\
                   100,a,52.10,-1.0,1000\n\
                   110,a,52.11,-1.0,1000\n";
        let f = write_csv(csv);
        let load = load_adsb(f.path(), &Geodetic::new(52.0, -1.0, 0.0), 5.0).unwrap();
        assert_eq!(load.paths.len(), 2);
    }

    #[test]
    fn unique_id_count_matches_group_by_oracle() {
        // Independent oracle: count distinct ids by plain text processing.
        let csv = "time,icao24,lat,lon,geoaltitude\n\
                   0,a1,52.0,-1.0,1000\n\
                   10,a1,52.01,-1.0,1000\n\
                   0,b2,52.1,-1.0,2000\n\
                   10,b2,52.11,-1.0,2000\n\
                   0,c3,52.2,-1.0,3000\n\
                   10,c3,52.21,-1.0,3000\n";
        let mut distinct: Vec<&str> = csv
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').nth(1))
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        let f = write_csv(csv);
        let load = load_adsb(f.path(), &Geodetic::new(52.0, -1.0, 0.0), 5.0).unwrap();
        assert_eq!(load.paths.len(), distinct.len());
    }

    #[test]
    fn range_boundary_detection() {
        // One aircraft just inside 111 km of one sensor, then just outside.
        let config = ClassAConfig { clutter_rate: 0.0, ..Default::default() };
        let sensors = config.build_sensors().unwrap();
        let (pose, _) = &sensors[0];
        let near = DVector::from_vec(vec![
            pose.position[0] + 110_900.0,
            0.0,
            pose.position[1],
            0.0,
            pose.position[2],
            0.0,
        ]);
        let far = DVector::from_vec(vec![
            pose.position[0] + 111_100.0,
            0.0,
            pose.position[1],
            0.0,
            pose.position[2],
            0.0,
        ]);
        let path = GroundTruthPath {
            id: "x".into(),
            times: vec![0.0, 5.0],
            states: vec![near, far],
        };
        let scans = simulate_detections(&[path], &config, 0).unwrap();
        let from_first = |scan: &Scan| {
            scan.detections
                .iter()
                .filter(|d| d.sensor == sensors[0].0.label)
                .count()
        };
        assert_eq!(from_first(&scans[0]), 1);
        assert_eq!(from_first(&scans[1]), 0);
    }

    #[test]
    fn noise_free_detections_invert_to_truth() {
        let mut config = ClassAConfig::default();
        config.noise = DMatrix::zeros(3, 3);
        let sensors = config.build_sensors().unwrap();
        let (pose, _) = &sensors[1];
        let state = DVector::from_vec(vec![
            pose.position[0] + 20_000.0,
            100.0,
            pose.position[1] - 30_000.0,
            -50.0,
            -10_000.0,
            0.0,
        ]);
        let path = GroundTruthPath { id: "y".into(), times: vec![0.0], states: vec![state.clone()] };
        let scans = simulate_detections(&[path], &config, 0).unwrap();
        for det in &scans[0].detections {
            let p = det.model.invert_position(&det.z).unwrap();
            assert!((p[0] - state[0]).abs() < 1e-6);
            assert!((p[1] - state[2]).abs() < 1e-6);
            assert!((p[2] - state[4]).abs() < 1e-6);
        }
        assert!(!scans[0].detections.is_empty());
    }

    #[test]
    fn clutter_defaults_off() {
        let config = ClassAConfig::default();
        let path = GroundTruthPath {
            id: "z".into(),
            times: vec![0.0],
            states: vec![DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, -10_000.0, 0.0])],
        };
        let scans = simulate_detections(&[path], &config, 3).unwrap();
        assert!(scans[0].detections.iter().all(|d| !d.is_clutter));
    }
}
