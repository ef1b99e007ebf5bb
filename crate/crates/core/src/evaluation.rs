//! Turns a tracker run plus ground truth into per-scan metric series:
//! OSPA, SIAP association counts, and the summed covariance norm.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::metrics::{
    associate_timestamp, covariance_norm_sum, ospa, AssociationCounts, OspaParams,
};
use crate::scenarios::GroundTruthPath;
use crate::tracker::{Scan, Track, TrackerOutput};

#[derive(Debug, Clone, Copy)]
pub struct EvalParams {
    pub ospa: OspaParams,
    /// Truth/track association cutoff for the SIAP metrics, meters.
    pub siap_cutoff: f64,
}

/// Per-scan metric values for one tracker run.
#[derive(Debug, Clone)]
pub struct MetricSeries {
    pub times: Vec<f64>,
    pub ospa: Vec<f64>,
    pub cov_norm_sum: Vec<f64>,
    pub counts: AssociationCounts,
}

impl MetricSeries {
    pub fn time_averaged_ospa(&self) -> f64 {
        mean(&self.ospa)
    }

    pub fn time_averaged_cov_norm(&self) -> f64 {
        mean(&self.cov_norm_sum)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Whether `track` has a state for scan index `k`, and that state's index.
fn state_index(track: &Track, k: usize) -> Option<usize> {
    if k < track.born_scan {
        return None;
    }
    let i = k - track.born_scan;
    if i < track.states.len() {
        Some(i)
    } else {
        None
    }
}

/// Position components (state indices 0, 2, 4...) of a state mean.
fn position_of(mean: &DVector<f64>) -> DVector<f64> {
    let n_p = mean.len() / 2;
    DVector::from_fn(n_p, |i, _| mean[2 * i])
}

/// Evaluate one tracker run against ground truth, scan by scan. All tracks
/// present at a scan contribute, tentative ones included.
pub fn evaluate_run(
    truths: &[GroundTruthPath],
    scans: &[Scan],
    output: &TrackerOutput,
    params: &EvalParams,
) -> Result<MetricSeries> {
    let mut series = MetricSeries {
        times: Vec::with_capacity(scans.len()),
        ospa: Vec::with_capacity(scans.len()),
        cov_norm_sum: Vec::with_capacity(scans.len()),
        counts: AssociationCounts::default(),
    };
    for (k, scan) in scans.iter().enumerate() {
        let t = scan.time;
        let truth_positions: Vec<DVector<f64>> = truths
            .iter()
            .filter_map(|p| p.index_at(t).map(|i| p.position_at(i)))
            .collect();
        let mut track_positions = Vec::new();
        let mut track_covs: Vec<DMatrix<f64>> = Vec::new();
        for track in &output.tracks {
            if let Some(i) = state_index(track, k) {
                track_positions.push(position_of(track.states[i].mean()));
                track_covs.push(track.states[i].cov().clone());
            }
        }
        let d = ospa(&truth_positions, &track_positions, &params.ospa)?;
        let (na, jt, errs) =
            associate_timestamp(&truth_positions, &track_positions, params.siap_cutoff);
        series.times.push(t);
        series.ospa.push(d);
        series.cov_norm_sum.push(covariance_norm_sum(&track_covs));
        series.counts.times.push(t);
        series.counts.associated_tracks.push(na);
        series.counts.associated_truths.push(jt);
        series.counts.position_errors.push(errs);
    }
    Ok(series)
}
